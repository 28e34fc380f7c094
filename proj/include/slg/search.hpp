#pragma once

#include "slg/search/batch.hpp"
#include "slg/search/planner.hpp"
#include "slg/search/sim.hpp"
