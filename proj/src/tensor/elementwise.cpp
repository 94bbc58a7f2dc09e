#include <cmath>

#include "ideal/ops.hpp"
#include "ideal/tape.hpp"

namespace ideal::ops {

namespace {

struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_stride;
  std::vector<std::size_t> b_stride;
  bool same = false;
};

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size());
  std::size_t s = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i] = s;
    s *= static_cast<std::size_t>(shape[i]);
  }
  return strides;
}

Broadcast plan_broadcast(std::string_view op, const Shape& a, const Shape& b) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const auto rank = std::max(a.size(), b.size());
  Shape pa(rank - a.size(), 1);
  pa.insert(pa.end(), a.begin(), a.end());
  Shape pb(rank - b.size(), 1);
  pb.insert(pb.end(), b.begin(), b.end());
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " +
                       to_string(b) + " (axis " + std::to_string(i) + ": " +
                       std::to_string(pa[i]) + " vs " + std::to_string(pb[i]) + ")");
    }
    plan.out[i] = std::max(pa[i], pb[i]);
  }
  auto sa = contiguous_strides(pa);
  auto sb = contiguous_strides(pb);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == 1) sa[i] = 0;
    if (pb[i] == 1) sb[i] = 0;
  }
  plan.a_stride = std::move(sa);
  plan.b_stride = std::move(sb);
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element in order.
template <typename F>
void for_each_broadcast(const Broadcast& plan, F&& f) {
  const auto n = shape_numel(plan.out);
  if (plan.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const auto rank = plan.out.size();
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  const auto inner = static_cast<std::size_t>(plan.out[rank - 1]);
  const auto sa_inner = plan.a_stride[rank - 1];
  const auto sb_inner = plan.b_stride[rank - 1];
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; o += inner) {
    for (std::size_t k = 0; k < inner; ++k) f(o + k, ia + k * sa_inner, ib + k * sb_inner);
    // advance the odometer over the outer axes
    for (std::size_t ax = rank - 1; ax-- > 0;) {
      ++counter[ax];
      ia += plan.a_stride[ax];
      ib += plan.b_stride[ax];
      if (counter[ax] < static_cast<std::size_t>(plan.out[ax])) break;
      ia -= plan.a_stride[ax] * counter[ax];
      ib -= plan.b_stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary(Binary kind, const Tensor& a, const Tensor& b) {
  static constexpr std::string_view kNames[] = {"add", "sub", "mul"};
  const auto name = kNames[static_cast<int>(kind)];
  auto plan = plan_broadcast(name, a.shape(), b.shape());
  Tensor out(plan.out);
  auto y = out.data();
  const auto xa = a.data();
  const auto xb = b.data();
  switch (kind) {
    case Binary::kAdd:
      for_each_broadcast(plan, [&](auto o, auto i, auto j) { y[o] = xa[i] + xb[j]; });
      break;
    case Binary::kSub:
      for_each_broadcast(plan, [&](auto o, auto i, auto j) { y[o] = xa[i] - xb[j]; });
      break;
    case Binary::kMul:
      for_each_broadcast(plan, [&](auto o, auto i, auto j) { y[o] = xa[i] * xb[j]; });
      break;
  }
  if (should_record({&a, &b})) {
    const OpKind op = kind == Binary::kAdd   ? OpKind::kAdd
                      : kind == Binary::kSub ? OpKind::kSub
                                             : OpKind::kMul;
    record_op(op, {a, b}, out, [kind, plan = std::move(plan)](const TapeNode& node) {
      auto& ia = *node.inputs[0];
      auto& ib = *node.inputs[1];
      const auto& dy = node.output->grad;
      if (ia.requires_grad) {
        auto& ga = grad_buffer(ia);
        if (kind == Binary::kMul) {
          const auto& vb = ib.data;
          for_each_broadcast(plan, [&](auto o, auto i, auto j) { ga[i] += dy[o] * vb[j]; });
        } else {
          for_each_broadcast(plan, [&](auto o, auto i, auto) { ga[i] += dy[o]; });
        }
      }
      if (ib.requires_grad) {
        auto& gb = grad_buffer(ib);
        if (kind == Binary::kMul) {
          const auto& va = ia.data;
          for_each_broadcast(plan, [&](auto o, auto i, auto j) { gb[j] += dy[o] * va[i]; });
        } else if (kind == Binary::kSub) {
          for_each_broadcast(plan, [&](auto o, auto, auto j) { gb[j] -= dy[o]; });
        } else {
          for_each_broadcast(plan, [&](auto o, auto, auto j) { gb[j] += dy[o]; });
        }
      }
    });
  }
  return out;
}

// Unary map whose derivative is expressed through (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(OpKind kind, const Tensor& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  auto y = out.data();
  const auto v = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = fwd(v[i]);
  if (should_record({&x})) {
    record_op(kind, {x}, out, [deriv](const TapeNode& node) {
      auto& in = *node.inputs[0];
      if (!in.requires_grad) return;
      auto& g = grad_buffer(in);
      const auto& dy = node.output->grad;
      const auto& xv = in.data;
      const auto& yv = node.output->data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * deriv(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(Binary::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(Binary::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(Binary::kMul, a, b); }

Tensor scale(const Tensor& x, float factor) {
  return unary(
      OpKind::kScale, x, [factor](float v) { return factor * v; },
      [factor](float, float) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(
      OpKind::kRelu, x, [](float v) { return v > 0.0F ? v : 0.0F; },
      [](float v, float) { return v > 0.0F ? 1.0F : 0.0F; });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  return unary(
      OpKind::kLeakyRelu, x, [slope](float v) { return v > 0.0F ? v : slope * v; },
      [slope](float v, float) { return v > 0.0F ? 1.0F : slope; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      OpKind::kTanh, x, [](float v) { return std::tanh(v); },
      [](float, float y) { return 1.0F - y * y; });
}

Tensor log(const Tensor& x) {
  const auto v = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0F)) {
      throw DomainError("log: non-positive value " + std::to_string(v[i]) +
                        " at flat index " + std::to_string(i));
    }
  }
  return unary(
      OpKind::kLog, x, [](float u) { return std::log(u); },
      [](float u, float) { return 1.0F / u; });
}

Tensor clamp_min(const Tensor& x, float floor) {
  return unary(
      OpKind::kClampMin, x, [floor](float v) { return v > floor ? v : floor; },
      [floor](float v, float) { return v > floor ? 1.0F : 0.0F; });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " +
                     to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<float>(x.data().begin(), x.data().end()));
  if (should_record({&x})) {
    record_op(OpKind::kReshape, {x}, out, [](const TapeNode& node) {
      if (node.inputs[0]->requires_grad) accumulate_grad(*node.inputs[0], node.output->grad);
    });
  }
  return out;
}

}  // namespace ideal::ops
