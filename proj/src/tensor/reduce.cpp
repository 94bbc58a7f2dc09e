#include <algorithm>
#include <cmath>

#include "ideal/ops.hpp"
#include "ideal/tape.hpp"

namespace ideal::ops {

namespace {

void require_rank(std::string_view op, const Tensor& x, std::size_t min_rank) {
  if (x.rank() < min_rank) {
    throw ShapeError(std::string(op) + ": needs rank >= " + std::to_string(min_rank) + ", got " +
                     to_string(x.shape()));
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisSplit split_axis(std::string_view op, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     to_string(x.shape()));
  }
  AxisSplit s{1, static_cast<std::size_t>(x.dim(axis)), 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(x.dim(i));
  for (std::size_t i = axis + 1; i < x.rank(); ++i) s.inner *= static_cast<std::size_t>(x.dim(i));
  return s;
}

Tensor reduce_all(OpKind kind, const Tensor& x, float factor) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc * factor));
  if (should_record({&x})) {
    record_op(kind, {x}, out, [factor](const TapeNode& node) {
      auto& in = *node.inputs[0];
      if (!in.requires_grad) return;
      const float g0 = node.output->grad[0] * factor;
      for (auto& g : grad_buffer(in)) g += g0;
    });
  }
  return out;
}

Tensor reduce_axis(OpKind kind, std::string_view op, const Tensor& x, std::size_t axis,
                   bool average) {
  const auto s = split_axis(op, x, axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(shape);
  const float factor = average ? 1.0F / static_cast<float>(std::max<std::size_t>(s.extent, 1)) : 1.0F;
  const float* xd = x.data().data();
  float* yd = out.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) acc += xd[(o * s.extent + e) * s.inner + i];
      yd[o * s.inner + i] = static_cast<float>(acc * factor);
    }
  }
  if (should_record({&x})) {
    record_op(kind, {x}, out, [s, factor](const TapeNode& node) {
      auto& in = *node.inputs[0];
      if (!in.requires_grad) return;
      auto& g = grad_buffer(in);
      const auto& dy = node.output->grad;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t e = 0; e < s.extent; ++e) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            g[(o * s.extent + e) * s.inner + i] += dy[o * s.inner + i] * factor;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor softmax(const Tensor& x) {
  require_rank("softmax", x, 1);
  const auto cols = static_cast<std::size_t>(x.shape().back());
  const auto rows = x.numel() / std::max<std::size_t>(cols, 1);
  Tensor out(x.shape());
  const float* xd = x.data().data();
  float* yd = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xd + r * cols;
    float* y = yd + r * cols;
    const float mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(in[c] - mx);
      total += y[c];
    }
    const auto inv = static_cast<float>(1.0 / total);
    for (std::size_t c = 0; c < cols; ++c) y[c] *= inv;
  }
  out.impl()->softmax_logits = x.impl();
  if (should_record({&x})) {
    record_op(OpKind::kSoftmax, {x}, out, [rows, cols](const TapeNode& node) {
      auto& in = *node.inputs[0];
      if (!in.requires_grad) return;
      auto& g = grad_buffer(in);
      const auto& dy = node.output->grad;
      const auto& y = node.output->data;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          const auto k = r * cols + c;
          g[k] += y[k] * (dy[k] - static_cast<float>(dot));
        }
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& x) {
  require_rank("log_softmax", x, 1);
  const auto cols = static_cast<std::size_t>(x.shape().back());
  const auto rows = x.numel() / std::max<std::size_t>(cols, 1);
  Tensor out(x.shape());
  const float* xd = x.data().data();
  float* yd = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xd + r * cols;
    const float mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(static_cast<double>(in[c] - mx));
    const auto lse = static_cast<float>(std::log(total)) + mx;
    for (std::size_t c = 0; c < cols; ++c) yd[r * cols + c] = in[c] - lse;
  }
  if (should_record({&x})) {
    record_op(OpKind::kLogSoftmax, {x}, out, [rows, cols](const TapeNode& node) {
      auto& in = *node.inputs[0];
      if (!in.requires_grad) return;
      auto& g = grad_buffer(in);
      const auto& dy = node.output->grad;
      const auto& y = node.output->data;
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += dy[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          const auto k = r * cols + c;
          g[k] += dy[k] - std::exp(y[k]) * static_cast<float>(total);
        }
      }
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  return reduce_all(OpKind::kMean, x, 1.0F / static_cast<float>(x.numel()));
}

Tensor sum(const Tensor& x) { return reduce_all(OpKind::kSum, x, 1.0F); }

Tensor mean(const Tensor& x, std::size_t axis) {
  if (axis < x.rank() && x.dim(axis) == 0) throw ShapeError("mean: empty axis");
  return reduce_axis(OpKind::kMean, "mean", x, axis, true);
}

Tensor sum(const Tensor& x, std::size_t axis) {
  return reduce_axis(OpKind::kSum, "sum", x, axis, false);
}

namespace {

struct BnLayout {
  std::size_t batch;
  std::size_t channels;
  std::size_t spatial;
};

BnLayout bn_layout(std::string_view op, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw ShapeError(std::string(op) + ": input must be (B, C) or (B, C, H, W), got " +
                     to_string(x.shape()));
  }
  const auto C = x.dim(1);
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
    throw ShapeError(std::string(op) + ": scale " + to_string(gamma.shape()) + " / shift " +
                     to_string(beta.shape()) + " must be (" + std::to_string(C) + ")");
  }
  const auto spatial = x.rank() == 4 ? static_cast<std::size_t>(x.dim(2) * x.dim(3)) : 1;
  return {static_cast<std::size_t>(x.dim(0)), static_cast<std::size_t>(C), spatial};
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchStats* stats_out) {
  const auto L = bn_layout("batch_norm", x, gamma, beta);
  const auto count = L.batch * L.spatial;
  if (count == 0) throw ShapeError("batch_norm: empty batch");
  std::vector<float> mu(L.channels);
  std::vector<float> var(L.channels);
  std::vector<float> inv_std(L.channels);
  const float* xd = x.data().data();
  for (std::size_t c = 0; c < L.channels; ++c) {
    double s = 0.0;
    for (std::size_t b = 0; b < L.batch; ++b) {
      const float* p = xd + (b * L.channels + c) * L.spatial;
      for (std::size_t q = 0; q < L.spatial; ++q) s += p[q];
    }
    const double m = s / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t b = 0; b < L.batch; ++b) {
      const float* p = xd + (b * L.channels + c) * L.spatial;
      for (std::size_t q = 0; q < L.spatial; ++q) {
        const double d = p[q] - m;
        ss += d * d;
      }
    }
    mu[c] = static_cast<float>(m);
    var[c] = static_cast<float>(ss / static_cast<double>(count));
    inv_std[c] = 1.0F / std::sqrt(var[c] + kBatchNormEps);
  }
  Tensor out(x.shape());
  std::vector<float> xhat(x.numel());
  float* yd = out.data().data();
  const float* gd = gamma.data().data();
  const float* bd = beta.data().data();
  for (std::size_t b = 0; b < L.batch; ++b) {
    for (std::size_t c = 0; c < L.channels; ++c) {
      const auto base = (b * L.channels + c) * L.spatial;
      for (std::size_t q = 0; q < L.spatial; ++q) {
        xhat[base + q] = (xd[base + q] - mu[c]) * inv_std[c];
        yd[base + q] = gd[c] * xhat[base + q] + bd[c];
      }
    }
  }
  if (stats_out != nullptr) *stats_out = BatchStats{mu, var};
  if (should_record({&x, &gamma, &beta})) {
    record_op(OpKind::kBatchNorm, {x, gamma, beta}, out,
              [L, count, xhat = std::move(xhat), inv_std = std::move(inv_std)](const TapeNode& node) {
                auto& ix = *node.inputs[0];
                auto& ig = *node.inputs[1];
                auto& ib = *node.inputs[2];
                const auto& dy = node.output->grad;
                std::vector<double> sum_dy(L.channels, 0.0);
                std::vector<double> sum_dy_xhat(L.channels, 0.0);
                for (std::size_t b = 0; b < L.batch; ++b) {
                  for (std::size_t c = 0; c < L.channels; ++c) {
                    const auto base = (b * L.channels + c) * L.spatial;
                    for (std::size_t q = 0; q < L.spatial; ++q) {
                      sum_dy[c] += dy[base + q];
                      sum_dy_xhat[c] += dy[base + q] * xhat[base + q];
                    }
                  }
                }
                if (ig.requires_grad) {
                  auto& g = grad_buffer(ig);
                  for (std::size_t c = 0; c < L.channels; ++c) g[c] += static_cast<float>(sum_dy_xhat[c]);
                }
                if (ib.requires_grad) {
                  auto& g = grad_buffer(ib);
                  for (std::size_t c = 0; c < L.channels; ++c) g[c] += static_cast<float>(sum_dy[c]);
                }
                if (!ix.requires_grad) return;
                auto& g = grad_buffer(ix);
                const auto& gamma_v = ig.data;
                const auto n = static_cast<double>(count);
                for (std::size_t b = 0; b < L.batch; ++b) {
                  for (std::size_t c = 0; c < L.channels; ++c) {
                    const auto base = (b * L.channels + c) * L.spatial;
                    const double k = gamma_v[c] * inv_std[c] / n;
                    for (std::size_t q = 0; q < L.spatial; ++q) {
                      const auto i = base + q;
                      g[i] += static_cast<float>(
                          k * (n * dy[i] - sum_dy[c] - xhat[i] * sum_dy_xhat[c]));
                    }
                  }
                }
              });
  }
  return out;
}

Tensor batch_norm_fixed(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const BatchStats& stats) {
  const auto L = bn_layout("batch_norm_fixed", x, gamma, beta);
  if (stats.mean.size() != L.channels || stats.var.size() != L.channels) {
    throw ShapeError("batch_norm_fixed: statistics for " + std::to_string(stats.mean.size()) +
                     " channels, input has " + std::to_string(L.channels));
  }
  // y = x * a + c with per-channel constants; differentiable w.r.t. x only
  // through the broadcasting ops, which keeps this path on the tape.
  Shape bshape = x.rank() == 4 ? Shape{1, static_cast<std::int64_t>(L.channels), 1, 1}
                               : Shape{1, static_cast<std::int64_t>(L.channels)};
  std::vector<float> a(L.channels);
  std::vector<float> c(L.channels);
  for (std::size_t ch = 0; ch < L.channels; ++ch) {
    const float inv = 1.0F / std::sqrt(stats.var[ch] + kBatchNormEps);
    a[ch] = inv;
    c[ch] = -stats.mean[ch] * inv;
  }
  auto normalized = add(mul(x, Tensor(bshape, std::move(a))), Tensor(bshape, std::move(c)));
  return add(mul(normalized, reshape(gamma, bshape)), reshape(beta, bshape));
}

}  // namespace ideal::ops
