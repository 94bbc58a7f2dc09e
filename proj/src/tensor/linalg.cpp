#include <Eigen/Core>

#include "gemm.hpp"
#include "ideal/ops.hpp"
#include "ideal/tape.hpp"

namespace ideal::detail {

namespace {
using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          float alpha, const float* a, const float* b, float beta, float* c) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map out(c, M, N);
  if (beta == 0.0F) {
    out.setZero();
  } else if (beta != 1.0F) {
    out *= beta;
  }
  const ConstMap A(a, trans_a ? K : M, trans_a ? M : K);
  const ConstMap B(b, trans_b ? N : K, trans_b ? K : N);
  if (!trans_a && !trans_b) {
    out.noalias() += alpha * (A * B);
  } else if (trans_a && !trans_b) {
    out.noalias() += alpha * (A.transpose() * B);
  } else if (!trans_a && trans_b) {
    out.noalias() += alpha * (A * B.transpose());
  } else {
    out.noalias() += alpha * (A.transpose() * B.transpose());
  }
}

}  // namespace ideal::detail

namespace ideal::ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible operands " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const auto m = static_cast<std::size_t>(a.dim(0));
  const auto k = static_cast<std::size_t>(a.dim(1));
  const auto n = static_cast<std::size_t>(b.dim(1));
  Tensor out(Shape{a.dim(0), b.dim(1)});
  detail::gemm(false, false, m, n, k, 1.0F, a.data().data(), b.data().data(), 0.0F,
               out.data().data());
  if (should_record({&a, &b})) {
    record_op(OpKind::kMatmul, {a, b}, out, [m, n, k](const TapeNode& node) {
      auto& ia = *node.inputs[0];
      auto& ib = *node.inputs[1];
      const float* dy = node.output->grad.data();
      if (ia.requires_grad) {
        // dA = dY * B^T
        detail::gemm(false, true, m, k, n, 1.0F, dy, ib.data.data(), 1.0F,
                     grad_buffer(ia).data());
      }
      if (ib.requires_grad) {
        // dB = A^T * dY
        detail::gemm(true, false, k, n, m, 1.0F, ia.data.data(), dy, 1.0F,
                     grad_buffer(ib).data());
      }
    });
  }
  return out;
}

}  // namespace ideal::ops
