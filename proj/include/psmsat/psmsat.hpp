#pragma once

#include "psmsat/analysis.hpp"
#include "psmsat/backoff_model.hpp"
#include "psmsat/config.hpp"
#include "psmsat/error.hpp"
#include "psmsat/harness.hpp"
#include "psmsat/mc_oracle.hpp"
#include "psmsat/phy_timing.hpp"
#include "psmsat/psm_simulator.hpp"
#include "psmsat/stats.hpp"
