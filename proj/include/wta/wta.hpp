#pragma once

#include "wta/config.hpp"
#include "wta/engagement.hpp"
#include "wta/errors.hpp"
#include "wta/eval.hpp"
#include "wta/guidance.hpp"
#include "wta/network.hpp"
#include "wta/parallel.hpp"
#include "wta/plot.hpp"
#include "wta/ppo.hpp"
#include "wta/rng.hpp"
#include "wta/scenario.hpp"
#include "wta/sensor.hpp"
#include "wta/solvers.hpp"
#include "wta/tensor.hpp"
#include "wta/vec3.hpp"
