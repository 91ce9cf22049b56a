#pragma once

// Every differentiable op, each reduced to a scalar, for finite-difference
// checks in the unit and acceptance tests.

#include <functional>
#include <string>
#include <vector>

#include "styleflow/autodiff.hpp"
#include "styleflow/rng.hpp"

namespace opcases {

using namespace styleflow;

using Builder = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

struct OpCase {
    std::string name;
    std::vector<Shape> shapes;
    Builder build;
    double lo = -1.5, hi = 1.5;
};

// Each case reduces its op to a scalar through a fixed random weighting so
// that every output entry contributes a distinct gradient.
inline ad::Var weigh(ad::Graph& g, ad::Var v) {
    Rng rng(99);
    Tensor w = uniform_tensor(v.shape(), 0.5, 1.5, rng);
    return ad::sum(ad::mul(v, g.constant(std::move(w))));
}

inline std::vector<OpCase> op_cases() {
    using V = const std::vector<ad::Var>&;
    return {
        {"matmul", {{3, 4}, {4, 2}}, [](ad::Graph& g, V x) { return weigh(g, ad::matmul(x[0], x[1])); }},
        {"transpose", {{3, 2}}, [](ad::Graph& g, V x) { return weigh(g, ad::transpose(x[0])); }},
        {"add", {{3, 2}, {3, 2}}, [](ad::Graph& g, V x) { return weigh(g, ad::add(x[0], x[1])); }},
        {"add_bcast_row", {{3, 2}, {2}}, [](ad::Graph& g, V x) { return weigh(g, ad::add(x[0], x[1])); }},
        {"add_bcast_col", {{3, 2}, {3, 1}}, [](ad::Graph& g, V x) { return weigh(g, ad::add(x[0], x[1])); }},
        {"sub", {{3, 2}, {2}}, [](ad::Graph& g, V x) { return weigh(g, ad::sub(x[0], x[1])); }},
        {"mul", {{3, 2}, {3, 1}}, [](ad::Graph& g, V x) { return weigh(g, ad::mul(x[0], x[1])); }},
        {"div", {{3, 2}, {3, 2}}, [](ad::Graph& g, V x) { return weigh(g, ad::div(x[0], ad::add_scalar(ad::mul(x[1], x[1]), 0.5))); }},
        {"neg", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::neg(x[0])); }},
        {"scale", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::scale(x[0], -1.7)); }},
        {"add_scalar", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::add_scalar(x[0], 0.3)); }},
        {"exp", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::exp(x[0])); }},
        {"log", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::log(x[0])); }, 0.2, 2.0},
        {"sqrt", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::sqrt(x[0])); }, 0.2, 2.0},
        {"tanh", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::tanh(x[0])); }},
        {"sigmoid", {{2, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::sigmoid(x[0])); }},
        {"clamp", {{3, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::clamp(x[0], -0.8, 0.9)); }},
        {"softmax", {{2, 4}}, [](ad::Graph& g, V x) { return weigh(g, ad::softmax(x[0])); }},
        {"log_softmax", {{2, 4}}, [](ad::Graph& g, V x) { return weigh(g, ad::log_softmax(x[0])); }},
        {"mean_last", {{3, 4}}, [](ad::Graph& g, V x) { return weigh(g, ad::mean_last(x[0])); }},
        {"var_last", {{3, 4}}, [](ad::Graph& g, V x) { return weigh(g, ad::var_last(x[0])); }},
        {"sum", {{3, 2}}, [](ad::Graph&, V x) { return ad::sum(ad::mul(x[0], x[0])); }},
        {"mean", {{3, 2}}, [](ad::Graph&, V x) { return ad::mean(ad::mul(x[0], x[0])); }},
        {"gather_rows", {{4, 2}}, [](ad::Graph& g, V x) { return weigh(g, ad::gather_rows(x[0], {3, 0, 3, 1})); }},
        {"scatter_rows", {{4, 2}, {2, 2}}, [](ad::Graph& g, V x) { return weigh(g, ad::scatter_rows(x[0], x[1], {2, 0})); }},
        {"concat0", {{2, 3}, {1, 3}}, [](ad::Graph& g, V x) { return weigh(g, ad::concat(x, 0)); }},
        {"concat1", {{2, 3}, {2, 1}}, [](ad::Graph& g, V x) { return weigh(g, ad::concat(x, 1)); }},
        {"slice", {{3, 5}}, [](ad::Graph& g, V x) { return weigh(g, ad::slice(x[0], 1, 1, 4)); }},
        {"pick", {{3, 4}}, [](ad::Graph& g, V x) { return weigh(g, ad::pick(x[0], {2, 0, 3})); }},
        {"reshape", {{2, 6}}, [](ad::Graph& g, V x) { return weigh(g, ad::reshape(x[0], {3, 4})); }},
    };
}

}  // namespace opcases
