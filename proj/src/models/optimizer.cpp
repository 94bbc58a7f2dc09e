#include <cmath>

#include "ideal/optim.hpp"

namespace ideal {

Optimizer::Optimizer(std::vector<Tensor> params, std::variant<AdamConfig, SgdMomentumConfig> config,
                     std::size_t moment_buffers)
    : params_(std::move(params)), config_(config) {
  moments_.reserve(params_.size());
  for (const auto& p : params_) {
    moments_.emplace_back(moment_buffers, std::vector<float>(p.numel(), 0.0F));
  }
}

Optimizer Optimizer::adam(std::vector<Tensor> params, AdamConfig config) {
  return Optimizer(std::move(params), config, 2);
}

Optimizer Optimizer::sgd_momentum(std::vector<Tensor> params, SgdMomentumConfig config) {
  return Optimizer(std::move(params), config, 1);
}

void Optimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto n = params_[i].numel();
    if (params_[i].has_grad() && params_[i].grad().size() != n) {
      throw ShapeError("optimizer: grad of parameter " + std::to_string(i) + " has " +
                       std::to_string(params_[i].grad().size()) + " values, parameter has " +
                       std::to_string(n));
    }
    for (const auto& m : moments_[i]) {
      if (m.size() != n) {
        throw ShapeError("optimizer: moment buffer of parameter " + std::to_string(i) + " has " +
                         std::to_string(m.size()) + " values, parameter has " + std::to_string(n));
      }
    }
  }
  ++steps_;
  const auto t = static_cast<double>(steps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto grad = p.has_grad() ? p.grad() : std::span<const float>{};
    auto w = p.data();
    if (const auto* c = std::get_if<AdamConfig>(&config_)) {
      auto& m = moments_[i][0];
      auto& v = moments_[i][1];
      const auto bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(c->beta1), t));
      const auto bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(c->beta2), t));
      for (std::size_t k = 0; k < w.size(); ++k) {
        const float g = grad.empty() ? 0.0F : grad[k];
        m[k] = c->beta1 * m[k] + (1.0F - c->beta1) * g;
        v[k] = c->beta2 * v[k] + (1.0F - c->beta2) * g * g;
        const float mhat = m[k] / bc1;
        const float vhat = v[k] / bc2;
        w[k] -= c->lr * mhat / (std::sqrt(vhat) + c->eps);
      }
    } else {
      const auto& sgd = std::get<SgdMomentumConfig>(config_);
      auto& vel = moments_[i][0];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const float g = grad.empty() ? 0.0F : grad[k];
        vel[k] = sgd.momentum * vel[k] + g;
        w[k] -= sgd.lr * vel[k];
      }
    }
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace ideal
