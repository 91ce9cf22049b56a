#include "styleflow/nn.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "styleflow/error.hpp"

namespace styleflow {

Parameter xavier(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return Parameter(std::move(name), uniform_tensor({fan_in, fan_out}, -limit, limit, rng));
}

Parameter zeros(std::string name, Shape shape) { return Parameter(std::move(name), Tensor(std::move(shape))); }

Parameter filled(std::string name, Shape shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return Parameter(std::move(name), std::move(t));
}

namespace nn {

ad::Var linear(ad::Graph& g, ad::Var x, const Parameter& w, const Parameter& b) {
    return ad::add(ad::matmul(x, g.parameter(w)), g.parameter(b));
}

ad::Var layer_norm(ad::Graph& g, ad::Var x, const Parameter& gain, const Parameter& bias, double eps) {
    ad::Var centered = ad::sub(x, ad::mean_last(x));
    ad::Var denom = ad::sqrt(ad::add_scalar(ad::var_last(x), eps));
    return ad::add(ad::mul(ad::div(centered, denom), g.parameter(gain)), g.parameter(bias));
}

Tensor positional_encoding(std::size_t length, std::size_t dim) {
    Tensor pe({length, dim});
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
            const double angle = static_cast<double>(pos) * rate;
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

}  // namespace nn

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void accumulate_grads(const std::vector<std::pair<const Parameter*, Tensor>>& grads, double weight) {
    for (const auto& [p, g] : grads) {
        auto* param = const_cast<Parameter*>(p);
        if (param->grad.size() != param->value.size()) param->zero_grad();
        for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += weight * g[i];
    }
}

}  // namespace styleflow
