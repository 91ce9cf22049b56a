#pragma once

#include <cstdint>
#include <vector>

#include "styleflow/tensor.hpp"

namespace styleflow {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment estimates for one parameter.
struct AdamMoments {
    Tensor m;
    Tensor v;
};

/// Bias-corrected adaptive-moment update. Each parameter's grad must have the
/// parameter's shape; grads are zeroed after the update.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig config);

    void step();
    void zero_grad();

    const AdamConfig& config() const noexcept { return config_; }
    void set_lr(double lr) noexcept { config_.lr = lr; }
    std::int64_t steps() const noexcept { return steps_; }
    void set_steps(std::int64_t steps) noexcept { steps_ = steps; }

    const std::vector<Parameter*>& params() const noexcept { return params_; }
    std::vector<AdamMoments>& moments() noexcept { return moments_; }
    const std::vector<AdamMoments>& moments() const noexcept { return moments_; }

private:
    std::vector<Parameter*> params_;
    std::vector<AdamMoments> moments_;
    AdamConfig config_;
    std::int64_t steps_ = 0;
};

/// One update over explicit state; `step` is the 1-based step count after this update.
void adam_step(std::vector<Parameter*>& params, std::vector<AdamMoments>& moments,
               const AdamConfig& config, std::int64_t step);

}  // namespace styleflow
