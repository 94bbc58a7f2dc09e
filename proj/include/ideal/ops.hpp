#pragma once

#include <cstdint>
#include <optional>

#include "ideal/tensor.hpp"

// Differentiable tensor operations. Every op validates its shape rule and
// throws ShapeError naming the op and the offending dimensions.
namespace ideal::ops {

inline constexpr float kLeakySlope = 0.2F;

// (M, K) x (K, N) -> (M, N)
Tensor matmul(const Tensor& a, const Tensor& b);

struct Conv2dParams {
  std::int64_t stride = 1;
  std::int64_t pad = 0;
};

// x: (B, Cin, H, W), weight: (Cout, Cin, kh, kw), bias: (Cout) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dParams params);

// x: (B, Cin, H, W), weight: (Cin, Cout, kh, kw), bias: (Cout) or undefined.
// Output spatial size is (H - 1) * stride - 2 * pad + kh.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, Conv2dParams params);

// Elementwise with numpy-style broadcasting over size-1 (or missing) axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope = kLeakySlope);
Tensor tanh(const Tensor& x);

// Square window, stride == kernel. Gradient goes to the first maximum in
// row-major window order.
Tensor max_pool2d(const Tensor& x, std::int64_t kernel);

Tensor reshape(const Tensor& x, Shape shape);

// Along the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

// Throws DomainError on any non-positive entry.
Tensor log(const Tensor& x);
Tensor clamp_min(const Tensor& x, float floor);

Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
// Reduces one axis, removing it from the shape.
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x, std::size_t axis);

struct BatchStats {
  std::vector<float> mean;
  std::vector<float> var;  // biased
};

inline constexpr float kBatchNormEps = 1e-5F;

// Per-channel normalisation of (B, C) or (B, C, H, W) over every axis but 1,
// using the batch's own statistics. When `stats_out` is set the statistics are
// written there for later use by batch_norm_fixed.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchStats* stats_out = nullptr);
Tensor batch_norm_fixed(const Tensor& x, const Tensor& gamma,
                        const Tensor& beta, const BatchStats& stats);

}  // namespace ideal::ops
