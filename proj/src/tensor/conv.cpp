#include <algorithm>
#include <limits>

#include "gemm.hpp"
#include "ideal/ops.hpp"
#include "ideal/tape.hpp"

namespace ideal::ops {

namespace {

struct Geometry {
  std::size_t channels;  // channels of the image side
  std::size_t height;    // image side
  std::size_t width;
  std::size_t kh;
  std::size_t kw;
  std::size_t stride;
  std::size_t pad;
  std::size_t out_h;  // column side (sliding positions)
  std::size_t out_w;

  [[nodiscard]] std::size_t rows() const { return channels * kh * kw; }
  [[nodiscard]] std::size_t positions() const { return out_h * out_w; }
};

// cols[(c*kh + i)*kw + j][offset + oy*out_w + ox] = img[c][oy*s - p + i][ox*s - p + j]
void im2col(const Geometry& g, const float* img, float* cols, std::size_t col_stride,
            std::size_t offset) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto p = static_cast<std::ptrdiff_t>(g.pad);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const float* plane = img + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        float* row = cols + ((c * g.kh + i) * g.kw + j) * col_stride + offset;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(i);
          float* dst = row + oy * g.out_w;
          if (y < 0 || y >= H) {
            std::fill(dst, dst + g.out_w, 0.0F);
            continue;
          }
          const float* src = plane + y * W;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(j);
            dst[ox] = (x < 0 || x >= W) ? 0.0F : src[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back into the image.
void col2im(const Geometry& g, const float* cols, std::size_t col_stride, std::size_t offset,
            float* img) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto p = static_cast<std::ptrdiff_t>(g.pad);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t c = 0; c < g.channels; ++c) {
    float* plane = img + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const float* row = cols + ((c * g.kh + i) * g.kw + j) * col_stride + offset;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(i);
          if (y < 0 || y >= H) continue;
          const float* src = row + oy * g.out_w;
          float* dst = plane + y * W;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(j);
            if (x >= 0 && x < W) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

// Samples per chunk so a column buffer stays around 4M floats.
std::size_t chunk_size(std::size_t rows, std::size_t positions, std::size_t batch) {
  constexpr std::size_t kBudget = std::size_t{1} << 22;
  const auto per_sample = std::max<std::size_t>(rows * positions, 1);
  return std::clamp<std::size_t>(kBudget / per_sample, 1, batch);
}

// (B, C, P) block [b0, b0 + nb) -> (C, nb * P)
void gather_channels(const float* src, std::size_t b0, std::size_t nb, std::size_t C,
                     std::size_t P, float* dst) {
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const float* from = src + ((b0 + b) * C + c) * P;
      std::copy(from, from + P, dst + c * nb * P + b * P);
    }
  }
}

// (C, nb * P) -> accumulate into (B, C, P) block
void scatter_channels_add(const float* src, std::size_t b0, std::size_t nb, std::size_t C,
                          std::size_t P, float* dst) {
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const float* from = src + c * nb * P + b * P;
      float* to = dst + ((b0 + b) * C + c) * P;
      for (std::size_t q = 0; q < P; ++q) to[q] += from[q];
    }
  }
}

void check_conv_operands(std::string_view op, const Tensor& x, const Tensor& weight,
                         const Tensor& bias, std::int64_t weight_in_axis,
                         std::int64_t weight_out_axis, Conv2dParams params) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": input must be (B, C, H, W), got " +
                     to_string(x.shape()));
  }
  if (weight.rank() != 4) {
    throw ShapeError(std::string(op) + ": weight must be rank 4, got " +
                     to_string(weight.shape()));
  }
  if (weight.dim(static_cast<std::size_t>(weight_in_axis)) != x.dim(1)) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.dim(1)) +
                     " channels but weight " + to_string(weight.shape()) + " expects " +
                     std::to_string(weight.dim(static_cast<std::size_t>(weight_in_axis))));
  }
  if (bias.defined() &&
      (bias.rank() != 1 || bias.dim(0) != weight.dim(static_cast<std::size_t>(weight_out_axis)))) {
    throw ShapeError(std::string(op) + ": bias " + to_string(bias.shape()) +
                     " does not match weight " + to_string(weight.shape()));
  }
  if (params.stride < 1 || params.pad < 0) {
    throw ShapeError(std::string(op) + ": stride must be >= 1 and pad >= 0");
  }
}

void add_bias(float* y, const float* bias, std::size_t B, std::size_t C, std::size_t P) {
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      float* row = y + (b * C + c) * P;
      const float v = bias[c];
      for (std::size_t q = 0; q < P; ++q) row[q] += v;
    }
  }
}

void bias_grad(const float* dy, float* db, std::size_t B, std::size_t C, std::size_t P) {
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const float* row = dy + (b * C + c) * P;
      float acc = 0.0F;
      for (std::size_t q = 0; q < P; ++q) acc += row[q];
      db[c] += acc;
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dParams params) {
  check_conv_operands("conv2d", x, weight, bias, 1, 0, params);
  const auto B = static_cast<std::size_t>(x.dim(0));
  const auto Cin = static_cast<std::size_t>(x.dim(1));
  const auto H = x.dim(2);
  const auto W = x.dim(3);
  const auto Cout = static_cast<std::size_t>(weight.dim(0));
  const auto kh = weight.dim(2);
  const auto kw = weight.dim(3);
  const auto span_h = H + 2 * params.pad - kh;
  const auto span_w = W + 2 * params.pad - kw;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: kernel " + to_string(weight.shape()) + " larger than padded input " +
                     to_string(x.shape()));
  }
  const Geometry g{Cin,
                   static_cast<std::size_t>(H),
                   static_cast<std::size_t>(W),
                   static_cast<std::size_t>(kh),
                   static_cast<std::size_t>(kw),
                   static_cast<std::size_t>(params.stride),
                   static_cast<std::size_t>(params.pad),
                   static_cast<std::size_t>(span_h / params.stride + 1),
                   static_cast<std::size_t>(span_w / params.stride + 1)};
  const auto P = g.positions();
  const auto R = g.rows();
  Tensor out(Shape{x.dim(0), static_cast<std::int64_t>(Cout), static_cast<std::int64_t>(g.out_h),
                   static_cast<std::int64_t>(g.out_w)});
  const auto chunk = chunk_size(R, P, B);
  {
    std::vector<float> cols(R * chunk * P);
    std::vector<float> ymat(Cout * chunk * P);
    const float* xd = x.data().data();
    float* yd = out.data().data();
    const auto in_stride = Cin * g.height * g.width;
    for (std::size_t b0 = 0; b0 < B; b0 += chunk) {
      const auto nb = std::min(chunk, B - b0);
      for (std::size_t b = 0; b < nb; ++b) im2col(g, xd + (b0 + b) * in_stride, cols.data(), nb * P, b * P);
      detail::gemm(false, false, Cout, nb * P, R, 1.0F, weight.data().data(), cols.data(), 0.0F,
                   ymat.data());
      scatter_channels_add(ymat.data(), b0, nb, Cout, P, yd);
    }
    if (bias.defined()) add_bias(yd, bias.data().data(), B, Cout, P);
  }
  if (should_record({&x, &weight, &bias})) {
    record_op(OpKind::kConv2d, {x, weight, bias}, out, [g, B, Cout, chunk](const TapeNode& node) {
      auto& ix = *node.inputs[0];
      auto& iw = *node.inputs[1];
      const auto* ib = node.inputs[2].get();
      const float* dy = node.output->grad.data();
      const auto P = g.positions();
      const auto R = g.rows();
      const auto in_stride = g.channels * g.height * g.width;
      if (ib != nullptr && ib->requires_grad) bias_grad(dy, grad_buffer(*node.inputs[2]).data(), B, Cout, P);
      if (!ix.requires_grad && !iw.requires_grad) return;
      std::vector<float> cols(R * chunk * P);
      std::vector<float> dymat(Cout * chunk * P);
      for (std::size_t b0 = 0; b0 < B; b0 += chunk) {
        const auto nb = std::min(chunk, B - b0);
        gather_channels(dy, b0, nb, Cout, P, dymat.data());
        if (iw.requires_grad) {
          for (std::size_t b = 0; b < nb; ++b) im2col(g, ix.data.data() + (b0 + b) * in_stride, cols.data(), nb * P, b * P);
          detail::gemm(false, true, Cout, R, nb * P, 1.0F, dymat.data(), cols.data(), 1.0F,
                       grad_buffer(iw).data());
        }
        if (ix.requires_grad) {
          detail::gemm(true, false, R, nb * P, Cout, 1.0F, iw.data.data(), dymat.data(), 0.0F,
                       cols.data());
          float* dx = grad_buffer(ix).data();
          for (std::size_t b = 0; b < nb; ++b) col2im(g, cols.data(), nb * P, b * P, dx + (b0 + b) * in_stride);
        }
      }
    });
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        Conv2dParams params) {
  check_conv_operands("conv_transpose2d", x, weight, bias, 0, 1, params);
  const auto B = static_cast<std::size_t>(x.dim(0));
  const auto Cin = static_cast<std::size_t>(x.dim(1));
  const auto H = x.dim(2);
  const auto W = x.dim(3);
  const auto Cout = static_cast<std::size_t>(weight.dim(1));
  const auto kh = weight.dim(2);
  const auto kw = weight.dim(3);
  const auto out_h = (H - 1) * params.stride - 2 * params.pad + kh;
  const auto out_w = (W - 1) * params.stride - 2 * params.pad + kw;
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("conv_transpose2d: non-positive output size for input " + to_string(x.shape()) +
                     " and weight " + to_string(weight.shape()));
  }
  // The image side of the im2col geometry is the (larger) output.
  const Geometry g{Cout,
                   static_cast<std::size_t>(out_h),
                   static_cast<std::size_t>(out_w),
                   static_cast<std::size_t>(kh),
                   static_cast<std::size_t>(kw),
                   static_cast<std::size_t>(params.stride),
                   static_cast<std::size_t>(params.pad),
                   static_cast<std::size_t>(H),
                   static_cast<std::size_t>(W)};
  const auto P = g.positions();
  const auto R = g.rows();
  Tensor out(Shape{x.dim(0), static_cast<std::int64_t>(Cout), out_h, out_w});
  const auto chunk = chunk_size(R, P, B);
  const auto out_stride = Cout * g.height * g.width;
  {
    std::vector<float> xmat(Cin * chunk * P);
    std::vector<float> cols(R * chunk * P);
    float* yd = out.data().data();
    for (std::size_t b0 = 0; b0 < B; b0 += chunk) {
      const auto nb = std::min(chunk, B - b0);
      gather_channels(x.data().data(), b0, nb, Cin, P, xmat.data());
      detail::gemm(true, false, R, nb * P, Cin, 1.0F, weight.data().data(), xmat.data(), 0.0F,
                   cols.data());
      for (std::size_t b = 0; b < nb; ++b) col2im(g, cols.data(), nb * P, b * P, yd + (b0 + b) * out_stride);
    }
    if (bias.defined()) add_bias(yd, bias.data().data(), B, Cout, g.height * g.width);
  }
  if (should_record({&x, &weight, &bias})) {
    record_op(OpKind::kConvTranspose2d, {x, weight, bias}, out,
              [g, B, Cin, Cout, chunk, out_stride](const TapeNode& node) {
                auto& ix = *node.inputs[0];
                auto& iw = *node.inputs[1];
                const auto* ib = node.inputs[2].get();
                const float* dy = node.output->grad.data();
                const auto P = g.positions();
                const auto R = g.rows();
                if (ib != nullptr && ib->requires_grad) {
                  bias_grad(dy, grad_buffer(*node.inputs[2]).data(), B, Cout, g.height * g.width);
                }
                if (!ix.requires_grad && !iw.requires_grad) return;
                std::vector<float> cols(R * chunk * P);
                std::vector<float> xmat(Cin * chunk * P);
                for (std::size_t b0 = 0; b0 < B; b0 += chunk) {
                  const auto nb = std::min(chunk, B - b0);
                  for (std::size_t b = 0; b < nb; ++b) im2col(g, dy + (b0 + b) * out_stride, cols.data(), nb * P, b * P);
                  if (iw.requires_grad) {
                    gather_channels(ix.data.data(), b0, nb, Cin, P, xmat.data());
                    detail::gemm(false, true, Cin, R, nb * P, 1.0F, xmat.data(), cols.data(), 1.0F,
                                 grad_buffer(iw).data());
                  }
                  if (ix.requires_grad) {
                    detail::gemm(false, false, Cin, nb * P, R, 1.0F, iw.data.data(), cols.data(), 0.0F,
                                 xmat.data());
                    scatter_channels_add(xmat.data(), b0, nb, Cin, P, grad_buffer(ix).data());
                  }
                }
              });
  }
  return out;
}

Tensor max_pool2d(const Tensor& x, std::int64_t kernel) {
  if (x.rank() != 4) {
    throw ShapeError("max_pool2d: input must be (B, C, H, W), got " + to_string(x.shape()));
  }
  if (kernel < 1 || x.dim(2) < kernel || x.dim(3) < kernel) {
    throw ShapeError("max_pool2d: kernel " + std::to_string(kernel) + " does not fit input " +
                     to_string(x.shape()));
  }
  const auto planes = static_cast<std::size_t>(x.dim(0) * x.dim(1));
  const auto H = static_cast<std::size_t>(x.dim(2));
  const auto W = static_cast<std::size_t>(x.dim(3));
  const auto k = static_cast<std::size_t>(kernel);
  const auto oh = H / k;
  const auto ow = W / k;
  Tensor out(Shape{x.dim(0), x.dim(1), static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)});
  std::vector<std::uint32_t> argmax(out.numel());
  const float* xd = x.data().data();
  float* yd = out.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        std::size_t best_idx = p * H * W + oy * k * W + ox * k;
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const auto idx = p * H * W + (oy * k + i) * W + ox * k + j;
            if (xd[idx] > best) {
              best = xd[idx];
              best_idx = idx;
            }
          }
        }
        const auto o = (p * oh + oy) * ow + ox;
        yd[o] = best;
        argmax[o] = static_cast<std::uint32_t>(best_idx);
      }
    }
  }
  if (should_record({&x})) {
    record_op(OpKind::kMaxPool2d, {x}, out, [argmax = std::move(argmax)](const TapeNode& node) {
      auto& in = *node.inputs[0];
      if (!in.requires_grad) return;
      auto& g = grad_buffer(in);
      const auto& dy = node.output->grad;
      for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += dy[o];
    });
  }
  return out;
}

}  // namespace ideal::ops
