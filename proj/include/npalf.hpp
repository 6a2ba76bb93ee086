#pragma once

#include "npalf/adaptive_lfa.hpp"
#include "npalf/errors.hpp"
#include "npalf/factor_model.hpp"
#include "npalf/hdi_data.hpp"
#include "npalf/npid_controller.hpp"
#include "npalf/optimizers.hpp"
#include "npalf/random.hpp"
#include "npalf/swarm.hpp"
#include "npalf/synthetic.hpp"
#include "npalf/trainer.hpp"
