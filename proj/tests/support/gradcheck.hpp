#pragma once

// Central finite-difference checks shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "styleflow/autodiff.hpp"
#include "styleflow/nn.hpp"
#include "styleflow/rng.hpp"

namespace gradcheck {

using styleflow::Parameter;
using styleflow::Rng;
using styleflow::Tensor;
namespace ad = styleflow::ad;

inline constexpr double kStep = 1e-5;
// Denominator floor: below it the check is effectively absolute.
inline constexpr double kFloor = 1e-4;

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

struct Result {
    double worst = 0.0;
    std::size_t probes = 0;
};

/// f builds a scalar from the given leaf inputs. Every input entry (or
/// `max_probes` random ones per input) is probed.
inline Result check_inputs(const std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>& f,
                           std::vector<Tensor> inputs, Rng& rng, std::size_t max_probes = 0) {
    ad::Graph g;
    std::vector<ad::Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(g.variable(t));
    ad::Var out = f(g, leaves);
    g.backward(out);

    auto eval = [&](const std::vector<Tensor>& xs) {
        ad::Graph h;
        std::vector<ad::Var> ls;
        for (const Tensor& t : xs) ls.push_back(h.constant(t));
        return f(h, ls).value().item();
    };
    Result r;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor analytic = g.grad(leaves[k]);
        std::vector<std::size_t> idx(inputs[k].size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (max_probes > 0 && idx.size() > max_probes) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_probes);
        }
        for (std::size_t i : idx) {
            const double saved = inputs[k][i];
            inputs[k][i] = saved + kStep;
            const double up = eval(inputs);
            inputs[k][i] = saved - kStep;
            const double down = eval(inputs);
            inputs[k][i] = saved;
            r.worst = std::max(r.worst, relative_error(analytic[i], (up - down) / (2 * kStep)));
            ++r.probes;
        }
    }
    return r;
}

/// `loss` builds a scalar over a fresh graph; gradients w.r.t. `params` come
/// from parameter_grads(). `probes` random (parameter, entry) pairs.
inline Result check_parameters(const std::function<ad::Var(ad::Graph&)>& loss, const std::vector<Parameter*>& params,
                               std::size_t probes, Rng& rng) {
    ad::Graph g;
    ad::Var out = loss(g);
    g.backward(out);
    std::vector<std::pair<const Parameter*, Tensor>> grads = g.parameter_grads();
    auto analytic_for = [&](const Parameter* p, std::size_t i) {
        for (const auto& [q, t] : grads)
            if (q == p) return t[i];
        return 0.0;
    };
    auto eval = [&] {
        ad::Graph h;
        return loss(h).value().item();
    };
    Result r;
    std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
    for (std::size_t n = 0; n < probes; ++n) {
        Parameter* p = params[pick_param(rng)];
        const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p->value.size() - 1)(rng);
        const double saved = p->value[i];
        p->value[i] = saved + kStep;
        const double up = eval();
        p->value[i] = saved - kStep;
        const double down = eval();
        p->value[i] = saved;
        r.worst = std::max(r.worst, relative_error(analytic_for(p, i), (up - down) / (2 * kStep)));
        ++r.probes;
    }
    return r;
}

}  // namespace gradcheck
