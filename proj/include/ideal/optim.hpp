#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "ideal/tensor.hpp"

namespace ideal {

struct AdamConfig {
  float lr = 1e-3F;
  float beta1 = 0.9F;
  float beta2 = 0.999F;
  float eps = 1e-8F;
};

struct SgdMomentumConfig {
  float lr = 1e-2F;
  float momentum = 0.9F;
};

/// Optimizer bound to a parameter list. step() reads each parameter's grad
/// (a missing grad counts as zero) and leaves grads untouched; call
/// zero_grad() between steps.
class Optimizer {
 public:
  static Optimizer adam(std::vector<Tensor> params, AdamConfig config = {});
  static Optimizer sgd_momentum(std::vector<Tensor> params, SgdMomentumConfig config = {});

  void step();
  void zero_grad();

  [[nodiscard]] std::uint64_t step_count() const { return steps_; }
  [[nodiscard]] const std::vector<Tensor>& params() const { return params_; }
  [[nodiscard]] const std::variant<AdamConfig, SgdMomentumConfig>& config() const { return config_; }

 private:
  Optimizer(std::vector<Tensor> params, std::variant<AdamConfig, SgdMomentumConfig> config,
            std::size_t moment_buffers);

  std::vector<Tensor> params_;
  std::variant<AdamConfig, SgdMomentumConfig> config_;
  // adam: [m, v] per parameter; sgd: [velocity]
  std::vector<std::vector<std::vector<float>>> moments_;
  std::uint64_t steps_ = 0;
};

}  // namespace ideal
