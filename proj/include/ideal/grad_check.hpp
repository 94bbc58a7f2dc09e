#pragma once

#include <functional>
#include <vector>

#include "ideal/tensor.hpp"

namespace ideal {

/// max over coordinates of |analytic - central difference| / max(1, |analytic|)
///
/// `f` must build its result from the tensors in `points` (which are marked
/// requires_grad by this function). Every coordinate of every point is probed.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> points,
                  double epsilon);

/// Single-point convenience overload.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor point,
                  double epsilon);

}  // namespace ideal
