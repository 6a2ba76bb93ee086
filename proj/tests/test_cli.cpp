#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct outcome {
    int code = -1;
    std::string output;
};

outcome run(const std::string& args) {
    const std::string cmd = std::string(NPALF_CLI_PATH) + " " + args + " 2>&1";
    outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return o;
    char buf[512];
    while (std::fgets(buf, sizeof(buf), pipe)) o.output += buf;
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / "npalf_cli_test";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        std::ofstream(dir_ / "tiny.txt") << "1::1::5\n1::2::3\n2::1::4\n";
        ASSERT_EQ(run("synth --users 40 --items 30 --density 0.2 --out " + path("syn.tsv")).code, 0);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, InspectReportsShapeAndDensity) {
    const auto o = run("inspect --format colons --data " + path("tiny.txt"));
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.output.find("rows (M)        2"), std::string::npos) << o.output;
    EXPECT_NE(o.output.find("columns (N)     2"), std::string::npos);
    EXPECT_NE(o.output.find("known entries   3"), std::string::npos);
    EXPECT_NE(o.output.find("75.0000%"), std::string::npos);
}

TEST_F(CliTest, TrainWritesCurveSummaryAndModel) {
    const auto o = run("train --optimizer npalf --rank 3 --max-epochs 4 --swarm-size 3 --data " + path("syn.tsv") +
                       " --out " + path("run"));
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(dir_ / "run" / "curve.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "run" / "summary.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "run" / "model.txt"));
    EXPECT_TRUE(fs::exists(dir_ / "run" / "best_position.csv"));
}

TEST_F(CliTest, ConfigFileSuppliesOptions) {
    std::ofstream(dir_ / "run.ini") << "optimizer=sgd\nrank=2\nmax-epochs=3\n";
    const auto o = run("train --config " + path("run.ini") + " --data " + path("syn.tsv") + " --out " + path("cfg"));
    EXPECT_EQ(o.code, 0) << o.output;
    std::ifstream curve(dir_ / "cfg" / "curve.csv");
    std::string line;
    int rows = 0;
    while (std::getline(curve, line)) ++rows;
    EXPECT_LE(rows, 4);

    const auto overridden = run("train --config " + path("run.ini") + " --max-epochs 5 --tol 1e-300 --data " +
                                path("syn.tsv") + " --out " + path("cfg2"));
    EXPECT_EQ(overridden.code, 0) << overridden.output;
    std::ifstream curve2(dir_ / "cfg2" / "curve.csv");
    rows = 0;
    while (std::getline(curve2, line)) ++rows;
    EXPECT_EQ(rows, 6) << "command-line flags override the file";
    EXPECT_EQ(run("train --config " + path("absent.ini") + " --data " + path("syn.tsv") + " --out " + path("x")).code,
              2);
}

TEST_F(CliTest, CrossValidationWritesAggregate) {
    const auto o = run("train --rank 2 --max-epochs 3 --folds 10 --data " + path("syn.tsv") + " --out " + path("cv"));
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(dir_ / "cv" / "aggregate.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "cv" / "r1f10" / "curve.csv"));
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
    EXPECT_EQ(run("train --optimizer nope --data " + path("syn.tsv") + " --out " + path("x")).code, 2);
    EXPECT_EQ(run("train --split 7:0:3 --data " + path("syn.tsv") + " --out " + path("x")).code, 2);
    EXPECT_EQ(run("train --data " + path("missing.tsv") + " --out " + path("x")).code, 2);
    EXPECT_EQ(run("train --out " + path("x")).code, 2);
    EXPECT_EQ(run("").code, 2);
}

TEST_F(CliTest, MalformedInputExitsTwo) {
    std::ofstream(dir_ / "bad.tsv") << "1\t1\t5\n1\t1\t4\n";
    const auto o = run("train --data " + path("bad.tsv") + " --out " + path("x"));
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.output.find("line 2"), std::string::npos) << o.output;
}

TEST_F(CliTest, DivergenceExitsThree) {
    const auto o =
        run("train --optimizer sgd --eta 50 --rank 3 --data " + path("syn.tsv") + " --out " + path("div"));
    EXPECT_EQ(o.code, 3) << o.output;
}
