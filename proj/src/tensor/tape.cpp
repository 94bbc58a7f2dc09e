#include "ideal/tape.hpp"

#include <algorithm>

namespace ideal {

namespace {
thread_local bool g_grad_mode = true;
}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kConvTranspose2d: return "conv_transpose2d";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kMaxPool2d: return "max_pool2d";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLog: return "log";
    case OpKind::kClampMin: return "clamp_min";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kBatchNorm: return "batch_norm";
  }
  return "unknown";
}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

std::size_t Tape::record(TapeNode node) {
  const auto id = nodes_.size();
  node.output->tape_id = id;
  node.output->is_leaf = false;
  nodes_.push_back(std::move(node));
  return id;
}

void Tape::clear() {
  for (auto& node : nodes_) node.output->tape_id.reset();
  nodes_.clear();
}

Tape::~Tape() { clear(); }

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

std::vector<float>& grad_buffer(TensorImpl& impl) {
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0F);
  return impl.grad;
}

void accumulate_grad(TensorImpl& impl, std::span<const float> delta) {
  auto& g = grad_buffer(impl);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_mode) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) {
    return t != nullptr && t->defined() && t->requires_grad();
  });
}

void record_op(OpKind kind, std::vector<Tensor> inputs, Tensor& out,
               std::function<void(const TapeNode&)> backward_rule) {
  TapeNode node{kind, {}, out.impl(), std::move(backward_rule)};
  node.inputs.reserve(inputs.size());
  for (auto& t : inputs) node.inputs.push_back(t.defined() ? t.impl() : nullptr);
  out.set_requires_grad(true);
  Tape::active().record(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw AutodiffError("backward: loss must be a scalar tensor");
  }
  auto& tape = Tape::active();
  const auto id = loss.tape_id();
  if (!id || *id >= tape.size() || tape.nodes()[*id].output != loss.impl()) {
    throw AutodiffError("backward: loss is not recorded on the active tape");
  }
  auto& root = *loss.impl();
  root.grad.assign(1, 1.0F);
  const auto& nodes = tape.nodes();
  for (std::size_t i = *id + 1; i-- > 0;) {
    const auto& node = nodes[i];
    if (node.output->grad.empty()) continue;
    node.backward(node);
    // Intermediate grads are no longer needed once propagated.
    node.output->grad.clear();
    node.output->grad.shrink_to_fit();
  }
  tape.clear();
}

}  // namespace ideal
