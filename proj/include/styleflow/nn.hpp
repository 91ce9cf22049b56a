#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "styleflow/autodiff.hpp"
#include "styleflow/rng.hpp"
#include "styleflow/tensor.hpp"

namespace styleflow {

/// Glorot-uniform matrix parameter.
Parameter xavier(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Parameter zeros(std::string name, Shape shape);
Parameter filled(std::string name, Shape shape, double value);

namespace nn {

/// x W + b, with b broadcast over rows.
ad::Var linear(ad::Graph& g, ad::Var x, const Parameter& w, const Parameter& b);

/// Row-wise layer normalization with learned gain/bias.
ad::Var layer_norm(ad::Graph& g, ad::Var x, const Parameter& gain, const Parameter& bias,
                   double eps = 1e-5);

/// Sinusoidal position encodings, [length, dim].
Tensor positional_encoding(std::size_t length, std::size_t dim);

}  // namespace nn

/// Runs fn(i) for i in [0, n) over up to `threads` workers. Exceptions are
/// rethrown in the caller (the lowest failing index wins).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Sums per-sample parameter gradients into the parameters' grad buffers, in
/// sample order, scaled by `weight`.
void accumulate_grads(const std::vector<std::pair<const Parameter*, Tensor>>& grads, double weight);

}  // namespace styleflow
