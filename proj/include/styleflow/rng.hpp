#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "styleflow/tensor.hpp"

namespace styleflow {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; mixes a base seed with stream tags into an
/// independent seed so per-step and per-line generators do not overlap.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0);

Tensor normal_tensor(const Shape& shape, double stddev, Rng& rng);
Tensor uniform_tensor(const Shape& shape, double lo, double hi, Rng& rng);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace styleflow
