#pragma once

#include "roadid/error.hpp"
#include "roadid/numerics.hpp"
#include "roadid/csv.hpp"
#include "roadid/filter.hpp"
#include "roadid/model.hpp"
#include "roadid/road_profile.hpp"
#include "roadid/simulator.hpp"
#include "roadid/extended_system.hpp"
#include "roadid/estimate.hpp"
#include "roadid/universal_smoother.hpp"
#include "roadid/mvu_smoother.hpp"
#include "roadid/dual_kalman.hpp"
#include "roadid/evaluation.hpp"
#include "roadid/scenario.hpp"
#include "roadid/config.hpp"
#include "roadid/svg.hpp"
#include "roadid/commands.hpp"
