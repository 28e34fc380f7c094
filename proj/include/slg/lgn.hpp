#pragma once

#include "slg/lgn/checkpoint.hpp"
#include "slg/lgn/layers.hpp"
#include "slg/lgn/model.hpp"
#include "slg/lgn/synth.hpp"
#include "slg/lgn/train.hpp"
