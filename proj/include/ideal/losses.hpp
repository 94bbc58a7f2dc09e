#pragma once

#include <stdexcept>

#include "ideal/tensor.hpp"

namespace ideal::loss {

/// Floor applied inside log so that 0 * log 0 evaluates to 0.
inline constexpr float kLogClamp = 1e-7F;

class LossInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossValue {
  Tensor tensor;  // scalar, on the tape when its inputs are
  float value;    // detached copy for logging
};

/// Mean over the batch of -sum_k target_k * log(max(prob_k, kLogClamp)).
///
/// probs: (B, C) rows summing to 1; targets: (B, C) one-hot rows.
/// When `probs` came straight out of ops::softmax the log is taken through
/// log-softmax of the logits instead, which agrees with the clamped form
/// whenever the target probability is at least kLogClamp and keeps a
/// non-zero gradient below it.
LossValue cross_entropy(const Tensor& probs, const Tensor& targets);

/// Column-wise mean of a (B, C) batch of prediction scores.
Tensor average_prediction(const Tensor& probs);

/// (1/C) * sum_k p_k log p_k for the batch-average prediction p. Lies in
/// [(1/C) ln(1/C), 0]; minimal exactly at the uniform vector.
LossValue information_entropy_loss(const Tensor& average);

struct GeneratorLoss {
  LossValue total;  // ce + lambda * info
  LossValue ce;
  LossValue info;
};

GeneratorLoss generator_loss(const Tensor& probs, const Tensor& targets, float lambda);

/// Cross-entropy against the teacher's one-hot hard labels.
LossValue distill_loss(const Tensor& student_probs, const Tensor& teacher_one_hot);

}  // namespace ideal::loss
