#include "ideal/losses.hpp"

#include <cmath>

#include "ideal/ops.hpp"

namespace ideal::loss {

namespace {

constexpr double kRowSumTolerance = 1e-4;

void check_probabilities(std::string_view op, const Tensor& probs) {
  if (probs.rank() != 2 || probs.dim(0) < 1 || probs.dim(1) < 1) {
    throw LossInputError(std::string(op) + ": probabilities must be a non-empty (B, C) matrix, got " +
                         to_string(probs.shape()));
  }
  const auto C = static_cast<std::size_t>(probs.dim(1));
  const auto data = probs.data();
  for (std::size_t r = 0; r < static_cast<std::size_t>(probs.dim(0)); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const float p = data[r * C + c];
      if (!(p >= 0.0F)) {
        throw LossInputError(std::string(op) + ": negative or NaN probability in row " + std::to_string(r));
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      throw LossInputError(std::string(op) + ": row " + std::to_string(r) + " sums to " +
                           std::to_string(total));
    }
  }
}

void check_one_hot(std::string_view op, const Tensor& targets, const Shape& expected) {
  if (targets.shape() != expected) {
    throw LossInputError(std::string(op) + ": targets " + to_string(targets.shape()) +
                         " do not match probabilities " + to_string(expected));
  }
  const auto C = static_cast<std::size_t>(expected[1]);
  const auto data = targets.data();
  for (std::size_t r = 0; r < static_cast<std::size_t>(expected[0]); ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const float t = data[r * C + c];
      if (t == 1.0F) {
        ++ones;
      } else if (t != 0.0F) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw LossInputError(std::string(op) + ": target row " + std::to_string(r) + " is not one-hot");
  }
}

LossValue finish(Tensor t) {
  const float v = t.item();
  return {std::move(t), v};
}

}  // namespace

LossValue cross_entropy(const Tensor& probs, const Tensor& targets) {
  check_probabilities("cross_entropy", probs);
  check_one_hot("cross_entropy", targets, probs.shape());
  const auto& logits = probs.impl()->softmax_logits;
  const Tensor log_probs = logits ? ops::log_softmax(Tensor(logits))
                                  : ops::log(ops::clamp_min(probs, kLogClamp));
  const auto batch = static_cast<float>(probs.dim(0));
  return finish(ops::scale(ops::sum(ops::mul(targets, log_probs)), -1.0F / batch));
}

Tensor average_prediction(const Tensor& probs) {
  if (probs.rank() != 2 || probs.dim(0) < 1) {
    throw LossInputError("average_prediction: need a non-empty (B, C) batch, got " +
                         to_string(probs.shape()));
  }
  return ops::mean(probs, 0);
}

LossValue information_entropy_loss(const Tensor& average) {
  if (average.rank() != 1 || average.dim(0) < 1) {
    throw LossInputError("information_entropy_loss: expected a (C) vector, got " +
                         to_string(average.shape()));
  }
  double total = 0.0;
  for (float p : average.data()) {
    if (!(p >= 0.0F)) throw LossInputError("information_entropy_loss: negative entry " + std::to_string(p));
    total += p;
  }
  if (std::abs(total - 1.0) > kRowSumTolerance) {
    throw LossInputError("information_entropy_loss: entries sum to " + std::to_string(total));
  }
  const auto classes = static_cast<float>(average.dim(0));
  const auto plogp = ops::mul(average, ops::log(ops::clamp_min(average, kLogClamp)));
  return finish(ops::scale(ops::sum(plogp), 1.0F / classes));
}

GeneratorLoss generator_loss(const Tensor& probs, const Tensor& targets, float lambda) {
  if (!(lambda >= 0.0F)) throw LossInputError("generator_loss: lambda must be >= 0");
  auto ce = cross_entropy(probs, targets);
  auto info = information_entropy_loss(average_prediction(probs));
  auto total = finish(ops::add(ce.tensor, ops::scale(info.tensor, lambda)));
  return {std::move(total), std::move(ce), std::move(info)};
}

LossValue distill_loss(const Tensor& student_probs, const Tensor& teacher_one_hot) {
  return cross_entropy(student_probs, teacher_one_hot);
}

}  // namespace ideal::loss
