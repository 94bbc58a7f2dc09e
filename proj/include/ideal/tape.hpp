#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "ideal/tensor.hpp"

namespace ideal {

enum class OpKind {
  kMatmul,
  kConv2d,
  kConvTranspose2d,
  kAdd,
  kSub,
  kMul,
  kScale,
  kRelu,
  kLeakyRelu,
  kTanh,
  kMaxPool2d,
  kReshape,
  kSoftmax,
  kLogSoftmax,
  kLog,
  kClampMin,
  kMean,
  kSum,
  kBatchNorm,
};

std::string_view op_name(OpKind kind);

/// One recorded operation. The backward rule reads output->grad and
/// accumulates into the grads of `inputs` that require them.
struct TapeNode {
  OpKind kind;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::function<void(const TapeNode&)> backward;
};

/// Thread-local record of differentiable operations in execution order.
class Tape {
 public:
  static Tape& active();

  /// Appends a node and stamps its output with the node index.
  std::size_t record(TapeNode node);
  void clear();

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const std::vector<TapeNode>& nodes() const { return nodes_; }

  ~Tape();

 private:
  std::vector<TapeNode> nodes_;
};

/// True when ops should record onto the active tape.
bool grad_mode_enabled();

/// Disables recording for its lifetime (inference, eval, oracle queries).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populates grads of every leaf reachable from `loss`, then consumes the tape.
void backward(const Tensor& loss);

/// Adds `delta` into impl's grad buffer, allocating it on first use.
void accumulate_grad(TensorImpl& impl, std::span<const float> delta);
std::vector<float>& grad_buffer(TensorImpl& impl);

/// Records `out` if grad mode is on and any input requires grad.
bool should_record(std::initializer_list<const Tensor*> inputs);
void record_op(OpKind kind, std::vector<Tensor> inputs, Tensor& out,
               std::function<void(const TapeNode&)> backward_rule);

}  // namespace ideal
