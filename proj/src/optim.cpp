#include "styleflow/optim.hpp"

#include <cmath>

#include "styleflow/error.hpp"

namespace styleflow {

void adam_step(std::vector<Parameter*>& params, std::vector<AdamMoments>& moments,
               const AdamConfig& config, std::int64_t step) {
    require(params.size() == moments.size(), "adam_step: moment count does not match parameters");
    require(step >= 1, "adam_step: step count must be positive");
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        if (p.grad.shape() != p.value.shape() || p.grad.size() != p.value.size()) {
            throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
        }
        AdamMoments& mo = moments[k];
        if (mo.m.size() != p.value.size()) mo.m = Tensor::zeros_like(p.value);
        if (mo.v.size() != p.value.size()) mo.v = Tensor::zeros_like(p.value);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            mo.m[i] = config.beta1 * mo.m[i] + (1.0 - config.beta1) * g;
            mo.v[i] = config.beta2 * mo.v[i] + (1.0 - config.beta2) * g * g;
            const double mhat = mo.m[i] / c1;
            const double vhat = mo.v[i] / c2;
            p.value[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
        }
        p.zero_grad();
    }
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), moments_(params_.size()), config_(config) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        moments_[k].m = Tensor::zeros_like(params_[k]->value);
        moments_[k].v = Tensor::zeros_like(params_[k]->value);
    }
}

void Adam::step() {
    ++steps_;
    adam_step(params_, moments_, config_, steps_);
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

}  // namespace styleflow
