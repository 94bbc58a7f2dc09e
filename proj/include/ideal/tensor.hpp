#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ideal {

using Shape = std::vector<std::int64_t>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Raised when an op receives operands whose shapes violate its shape rule.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for values outside an op's mathematical domain (e.g. log of 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Misuse of the differentiation tape (backward on a non-scalar, etc).
class AutodiffError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty when absent
  bool requires_grad = false;
  bool is_leaf = true;
  std::optional<std::size_t> tape_id;
  // Set by softmax so probability consumers can take the log through a
  // fused log-softmax instead of differentiating log(p) directly.
  std::shared_ptr<TensorImpl> softmax_logits;
};

/// Dense row-major float32 tensor. Copies share storage (handle semantics),
/// which is what lets networks and optimizers refer to the same parameters.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, float fill = 0.0F);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float value);
  /// Leaf tensor that accumulates gradients during backward().
  static Tensor parameter(Shape shape, std::vector<float> data);

  [[nodiscard]] bool defined() const { return impl_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::int64_t dim(std::size_t axis) const;
  [[nodiscard]] std::size_t rank() const;
  [[nodiscard]] std::size_t numel() const;

  [[nodiscard]] std::span<float> data();
  [[nodiscard]] std::span<const float> data() const;
  [[nodiscard]] float item() const;
  [[nodiscard]] float at(std::size_t flat_index) const;

  [[nodiscard]] bool has_grad() const;
  [[nodiscard]] std::span<const float> grad() const;
  [[nodiscard]] std::span<float> mutable_grad();
  void zero_grad();
  void clear_grad();

  [[nodiscard]] bool requires_grad() const;
  void set_requires_grad(bool flag);
  [[nodiscard]] bool is_leaf() const;
  [[nodiscard]] bool on_tape() const;
  [[nodiscard]] std::optional<std::size_t> tape_id() const;

  /// Fresh tensor with a copy of the data and no autodiff history.
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

Tensor one_hot(std::span<const std::int64_t> labels, std::int64_t num_classes);

/// Row-wise argmax of a (B, C) tensor; ties resolve to the lowest index.
std::vector<std::int64_t> argmax_rows(const Tensor& matrix);

}  // namespace ideal
