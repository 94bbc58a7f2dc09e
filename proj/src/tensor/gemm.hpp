#pragma once

#include <cstddef>

namespace ideal::detail {

// C (m x n) = alpha * op(A) * op(B) + beta * C, all row-major.
// op(A) is (m x k); A is stored (k x m) when trans_a.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          float alpha, const float* a, const float* b, float beta, float* c);

}  // namespace ideal::detail
