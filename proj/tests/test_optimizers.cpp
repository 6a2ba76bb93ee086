#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "npalf/hdi_data.hpp"
#include "npalf/optimizers.hpp"
#include "npalf/synthetic.hpp"
#include "oracles.hpp"

using namespace npalf;

namespace {

struct fixture {
    hdi_dataset ds;
    std::vector<rating_triple> train;
    std::vector<rating_triple> valid;
};

fixture synthetic_30x20() {
    fixture fx;
    fx.ds = make_synthetic({30, 20, 3, 0.3, 0.01, 17});
    const auto split = split_dataset(fx.ds, {7, 1, 2}, 17);
    fx.train = select_entries(fx.ds, split.train);
    fx.valid = select_entries(fx.ds, split.validation);
    return fx;
}

double max_abs_diff(const factor_model& a, const factor_model& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.user_factors().size(); ++i)
        m = std::max(m, std::abs(a.user_factors()[i] - b.user_factors()[i]));
    for (std::size_t i = 0; i < a.item_factors().size(); ++i)
        m = std::max(m, std::abs(a.item_factors()[i] - b.item_factors()[i]));
    return m;
}

std::vector<std::size_t> identity_order(std::size_t n) {
    std::vector<std::size_t> o(n);
    std::iota(o.begin(), o.end(), std::size_t{0});
    return o;
}

}  // namespace

TEST(SgdEpoch, HandComputedStep) {
    factor_model m(1, 1, 1);
    m.user_row(0)[0] = 0.1;
    m.item_row(0)[0] = 0.2;
    const std::vector<rating_triple> train{{0, 0, 1.0}};
    sgd_epoch(m, train, 0.01, 0.05, identity_order(1));
    EXPECT_NEAR(m.user_row(0)[0], 0.10191, 1e-15);
    EXPECT_NEAR(m.item_row(0)[0], 0.20088, 1e-15);
}

TEST(SgdEpoch, ZeroStepAndFixedPoint) {
    auto fx = synthetic_30x20();
    auto m = init_factors(30, 20, 3, 1);
    const auto before = m;
    sgd_epoch(m, fx.train, 0.0, 0.05, identity_order(fx.train.size()));
    EXPECT_EQ(m, before);

    // Entries rated exactly at the prediction with lambda = 0.
    std::vector<rating_triple> exact;
    for (const auto& t : fx.train) exact.push_back({t.user, t.item, m.predict(t.user, t.item)});
    // One entry per row pair so no update changes another entry's prediction first.
    std::vector<rating_triple> single{exact.front()};
    sgd_epoch(m, single, 0.3, 0.0, identity_order(1));
    EXPECT_EQ(m, before);
}

TEST(SgdEpoch, DivergenceNamesTheEntry) {
    factor_model m(1, 1, 1);
    m.user_row(0)[0] = 1e200;
    m.item_row(0)[0] = 1e200;
    const std::vector<rating_triple> train{{0, 0, 1.0}};
    try {
        sgd_epoch(m, train, 1.0, 0.0, identity_order(1));
        FAIL() << "expected divergence_error";
    } catch (const divergence_error& e) {
        EXPECT_EQ(e.entry(), 0u);
    }
}

TEST(SgdEpoch, RejectsBadOrder) {
    auto fx = synthetic_30x20();
    auto m = init_factors(30, 20, 3, 1);
    EXPECT_THROW(sgd_epoch(m, fx.train, 0.01, 0.05, identity_order(fx.train.size() - 1)), config_error);
}

TEST(SgdEpoch, GradientMatchesFiniteDifferences) {
    rng gen(123);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t f = 1 + gen.below(5);
        factor_model m(1, 1, f);
        for (double& v : m.user_factors()) v = gen.uniform(-1, 1);
        for (double& v : m.item_factors()) v = gen.uniform(-1, 1);
        const double r = gen.uniform(0, 5), lambda = gen.uniform(0, 0.2), eta = 1e-3;
        std::vector<double> x(m.user_factors().begin(), m.user_factors().end());
        std::vector<double> y(m.item_factors().begin(), m.item_factors().end());
        const auto grad = oracle::finite_difference_gradient(x, y, r, lambda);
        const std::vector<rating_triple> train{{0, 0, r}};
        sgd_epoch(m, train, eta, lambda, identity_order(1));
        for (std::size_t d = 0; d < f; ++d) {
            const double step_x = m.user_factors()[d] - x[d];
            const double step_y = m.item_factors()[d] - y[d];
            EXPECT_NEAR(step_x, -eta * grad[d], 1e-5 * std::abs(eta * grad[d]) + 1e-13);
            EXPECT_NEAR(step_y, -eta * grad[f + d], 1e-5 * std::abs(eta * grad[f + d]) + 1e-13);
        }
    }
}

TEST(SgdEpoch, ObjectiveDescendsWithSmallStep) {
    auto fx = synthetic_30x20();
    auto m = init_factors(30, 20, 3, 5);
    const auto order = identity_order(fx.train.size());
    double prev = objective(m, fx.train, 0.05);
    for (int epoch = 0; epoch < 10; ++epoch) {
        sgd_epoch(m, fx.train, 0.01, 0.05, order);
        const double cur = objective(m, fx.train, 0.05);
        EXPECT_LE(cur, prev);
        prev = cur;
    }
}

TEST(VisitOrder, FixedAndShuffled) {
    visit_order fixed(5, false, 1);
    EXPECT_EQ(std::vector<std::size_t>(fixed.next().begin(), fixed.next().end()), identity_order(5));
    visit_order a(50, true, 9), b(50, true, 9);
    for (int i = 0; i < 5; ++i) {
        const auto pa = a.next();
        const auto pb = b.next();
        EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
    }
}

TEST(PidSgdEpoch, UnitProportionalEqualsSgd) {
    auto fx = synthetic_30x20();
    auto a = init_factors(30, 20, 3, 2);
    auto b = a;
    controller_bank bank(fx.train.size());
    visit_order oa(fx.train.size(), true, 3), ob(fx.train.size(), true, 3);
    for (int epoch = 0; epoch < 20; ++epoch) {
        sgd_epoch(a, fx.train, 0.04, 0.05, oa.next());
        pid_sgd_epoch(b, bank, fx.train, 0.04, 0.05, {1.0, 0.0, 0.0}, ob.next());
        EXPECT_LE(max_abs_diff(a, b), 1e-14);
    }
}

TEST(PidSgdEpoch, IntegralOfConstantResidualGrowsLinearly) {
    factor_model m(1, 1, 1);
    m.user_row(0)[0] = 0.5;
    m.item_row(0)[0] = 0.5;
    const std::vector<rating_triple> train{{0, 0, 2.0}};
    const double e = 2.0 - 0.25;
    controller_bank bank(1);
    const pid_gains gains{1.0, 0.1, 0.0};
    // eta = 0 keeps the residual constant while the bank advances.
    for (int t = 1; t <= 10; ++t) {
        pid_sgd_epoch(m, bank, train, 0.0, 0.05, gains, identity_order(1));
        EXPECT_NEAR(bank[0].integral_sum, t * e, 1e-13);
    }
    // Recover the refined error from one real step: dx = eta * (u * y - lambda * x).
    const double eta = 1e-3, lambda = 0.05, x = 0.5, y = 0.5;
    pid_sgd_epoch(m, bank, train, eta, lambda, gains, identity_order(1));
    const double u = ((m.user_row(0)[0] - x) / eta + lambda * x) / y;
    EXPECT_NEAR(u, e * (1.0 + 0.1 * 11), 1e-9);
}

TEST(NpidSgdEpoch, IdentityGainsEqualSgdExactly) {
    auto fx = synthetic_30x20();
    auto a = init_factors(30, 20, 3, 2);
    auto b = a;
    controller_bank bank(fx.train.size());
    visit_order oa(fx.train.size(), true, 4), ob(fx.train.size(), true, 4);
    for (int epoch = 0; epoch < 20; ++epoch) {
        sgd_epoch(a, fx.train, 0.04, 0.05, oa.next());
        npid_sgd_epoch(b, bank, fx.train, 0.04, 0.05, npid_gains{}, ob.next());
        EXPECT_LE(max_abs_diff(a, b), 1e-14);
    }
}

TEST(NpidSgdEpoch, LinearProfileEqualsPidSgd) {
    auto fx = synthetic_30x20();
    auto a = init_factors(30, 20, 3, 2);
    auto b = a;
    controller_bank bank_a(fx.train.size()), bank_b(fx.train.size());
    const pid_gains pid{0.9, 0.02, 0.15};
    const npid_gains npid{0.9, 0.4, 0.0, 0.02, 0.0, 0.05, 0.10, 0.0, 0.7};
    visit_order oa(fx.train.size(), true, 4), ob(fx.train.size(), true, 4);
    for (int epoch = 0; epoch < 20; ++epoch) {
        pid_sgd_epoch(a, bank_a, fx.train, 0.04, 0.05, pid, oa.next());
        npid_sgd_epoch(b, bank_b, fx.train, 0.04, 0.05, npid, ob.next());
        EXPECT_LE(max_abs_diff(a, b), 1e-12);
    }
}

TEST(NpidSgdEpoch, ZeroStepStillAdvancesBank) {
    auto fx = synthetic_30x20();
    auto m = init_factors(30, 20, 3, 2);
    const auto before = m;
    controller_bank bank(fx.train.size());
    const npid_gains g{0.8, 0.3, 1.0, 0.05, 0.5, 0.1, 0.1, 1.0, 1.0};
    npid_sgd_epoch(m, bank, fx.train, 0.0, 0.05, g, identity_order(fx.train.size()));
    EXPECT_EQ(m, before);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        EXPECT_EQ(bank[i].observations, 1u);
        EXPECT_EQ(bank[i].integral_sum, before.instant_error(fx.train[i]));
    }
}

TEST(NpidSgdEpoch, BankSizeMustMatch) {
    auto fx = synthetic_30x20();
    auto m = init_factors(30, 20, 3, 2);
    controller_bank bank(fx.train.size() + 1);
    EXPECT_THROW(npid_sgd_epoch(m, bank, fx.train, 0.01, 0.05, npid_gains{}, identity_order(fx.train.size())),
                 config_error);
}

TEST(AdaptiveRules, MatchScalarSimulations) {
    const double g = 0.37;
    {
        auto p = adaptive_params::defaults(adaptive_kind::rmsprop, 0.01);
        const auto ref = oracle::scalar_rmsprop(g, 0.01, p.rho, p.epsilon, 200);
        double first = 0, second = 0;
        for (int k = 0; k < 200; ++k)
            EXPECT_NEAR(detail::adaptive_increment(p, g, first, second, k + 1), ref[k], 1e-15);
        // Constant gradient: the step settles at lr * sign(g).
        EXPECT_NEAR(ref.back(), -0.01, 1e-8);
    }
    {
        auto p = adaptive_params::defaults(adaptive_kind::adam, 0.02);
        const auto ref = oracle::scalar_adam(g, 0.02, p.beta1, p.beta2, p.epsilon, 200);
        double first = 0, second = 0;
        for (int k = 0; k < 200; ++k)
            EXPECT_NEAR(detail::adaptive_increment(p, g, first, second, k + 1), ref[k], 1e-15);
    }
    {
        auto p = adaptive_params::defaults(adaptive_kind::adadelta, 0.0);
        const auto ref = oracle::scalar_adadelta(g, p.rho, p.epsilon, 200);
        double first = 0, second = 0;
        for (int k = 0; k < 200; ++k)
            EXPECT_NEAR(detail::adaptive_increment(p, g, first, second, k + 1), ref[k], 1e-15);
    }
}

TEST(AdaptiveRules, AdamWithZeroBetasIsNormalizedGradient) {
    adaptive_params p = adaptive_params::defaults(adaptive_kind::adam, 0.05);
    p.beta1 = p.beta2 = 0.0;
    rng gen(3);
    double first = 0, second = 0;
    for (int k = 1; k <= 100; ++k) {
        const double g = gen.normal();
        EXPECT_NEAR(detail::adaptive_increment(p, g, first, second, k), -0.05 * g / (std::abs(g) + p.epsilon), 1e-15);
    }
}

TEST(AdaptiveEpoch, ZeroGradientLeavesModelAndDecaysMoments) {
    for (auto kind : {adaptive_kind::adam, adaptive_kind::rmsprop, adaptive_kind::adadelta}) {
        factor_model m(1, 1, 2);
        m.user_row(0)[0] = 1.0;
        m.item_row(0)[0] = 2.0;
        const std::vector<rating_triple> train{{0, 0, 2.0}};  // exact prediction
        moment_state mom(m);
        std::fill(mom.first_x.begin(), mom.first_x.end(), 0.0);
        mom.second_x.assign(2, 0.5);
        const auto before = m;
        const auto p = adaptive_params::defaults(kind, 0.01);
        adaptive_epoch(m, mom, train, p, 0.0, identity_order(1));
        EXPECT_EQ(m, before);
        const double decay = kind == adaptive_kind::adam ? p.beta2 : p.rho;
        EXPECT_DOUBLE_EQ(mom.second_x[0], 0.5 * decay);
    }
}

TEST(AdaptiveEpoch, OneStepUsesPreUpdateGradients) {
    factor_model m(1, 1, 1);
    m.user_row(0)[0] = 0.3;
    m.item_row(0)[0] = -0.2;
    const std::vector<rating_triple> train{{0, 0, 1.5}};
    const double lambda = 0.05, e = 1.5 - (0.3 * -0.2);
    const double gx = -(e * -0.2 - lambda * 0.3), gy = -(e * 0.3 - lambda * -0.2);
    moment_state mom(m);
    const auto p = adaptive_params::defaults(adaptive_kind::rmsprop, 0.01);
    adaptive_epoch(m, mom, train, p, lambda, identity_order(1));
    EXPECT_NEAR(m.user_row(0)[0], 0.3 + oracle::scalar_rmsprop(gx, 0.01, 0.9, 1e-8, 1)[0], 1e-15);
    EXPECT_NEAR(m.item_row(0)[0], -0.2 + oracle::scalar_rmsprop(gy, 0.01, 0.9, 1e-8, 1)[0], 1e-15);
    EXPECT_EQ(mom.user_steps[0], 1u);
}

TEST(AdaptiveEpoch, ReducesTrainingError) {
    auto fx = synthetic_30x20();
    for (auto kind : {adaptive_kind::adam, adaptive_kind::rmsprop, adaptive_kind::adadelta}) {
        auto m = init_factors(30, 20, 3, 2);
        moment_state mom(m);
        const double before = rmse(m, fx.train);
        visit_order order(fx.train.size(), true, 1);
        for (int epoch = 0; epoch < 30; ++epoch)
            adaptive_epoch(m, mom, fx.train, adaptive_params::defaults(kind, 0.01), 0.05, order.next());
        EXPECT_LT(rmse(m, fx.train), before) << static_cast<int>(kind);
    }
}

TEST(AdaptiveParams, Validation) {
    auto p = adaptive_params::defaults(adaptive_kind::adam, 0.01);
    EXPECT_NO_THROW(p.validate());
    p.beta1 = 1.0;
    EXPECT_THROW(p.validate(), config_error);
    auto q = adaptive_params::defaults(adaptive_kind::rmsprop, 0.01);
    q.epsilon = 0.0;
    EXPECT_THROW(q.validate(), config_error);
}

TEST(OptimizerKind, ParseNames) {
    EXPECT_EQ(parse_optimizer_kind("pid"), optimizer_kind::pid_sgd);
    EXPECT_EQ(parse_optimizer_kind("npalf"), optimizer_kind::npalf);
    EXPECT_STREQ(optimizer_name(optimizer_kind::adadelta), "adadelta");
    EXPECT_THROW(parse_optimizer_kind("momentum"), config_error);
}

TEST(Determinism, SameOrderSameModel) {
    auto fx = synthetic_30x20();
    auto run = [&] {
        auto m = init_factors(30, 20, 3, 8);
        controller_bank bank(fx.train.size());
        visit_order order(fx.train.size(), true, 8);
        for (int epoch = 0; epoch < 10; ++epoch)
            npid_sgd_epoch(m, bank, fx.train, 0.02, 0.05, {0.9, 0.2, 1, 0.01, 1, 0.05, 0.05, 1, 1}, order.next());
        return m;
    };
    EXPECT_EQ(run(), run());
}
