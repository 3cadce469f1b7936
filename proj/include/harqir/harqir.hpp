#pragma once

// Everything except the JSON and CLI layers, which pull in nlohmann/json.

#include "harqir/error.hpp"
#include "harqir/specfun.hpp"
#include "harqir/channel.hpp"
#include "harqir/stats.hpp"
#include "harqir/montecarlo.hpp"
#include "harqir/moments.hpp"
#include "harqir/gammafit.hpp"
#include "harqir/metrics.hpp"
#include "harqir/optimizer.hpp"
