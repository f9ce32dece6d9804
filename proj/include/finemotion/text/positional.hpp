#pragma once

#include <vector>

#include "finemotion/nn/graph.hpp"

namespace finemotion::text {

// Sinusoidal table: PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos(...).
// Throws TextError(OddDimension) for odd d.
nn::Matrix positional_encoding(int n, int d);

// PE rows 0..size-1 restarted for every segment, stacked.
nn::Matrix segment_positional_encoding(const nn::Segments& segs, int d);

// One PE row per timestep value (the same sin/cos family evaluated at t).
nn::Matrix timestep_encoding(const std::vector<int>& timesteps, int d);

}  // namespace finemotion::text
