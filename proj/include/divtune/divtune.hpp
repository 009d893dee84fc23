#pragma once

// Umbrella header.

#include "divtune/api.hpp"
#include "divtune/baselines.hpp"
#include "divtune/bip.hpp"
#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/model.hpp"
#include "divtune/monitor.hpp"
#include "divtune/oracle.hpp"
#include "divtune/program.hpp"
#include "divtune/recommender.hpp"
#include "divtune/routing.hpp"
#include "divtune/scenarios.hpp"
#include "divtune/service.hpp"
#include "divtune/simplex.hpp"
#include "divtune/solver.hpp"
#include "divtune/synthetic.hpp"
