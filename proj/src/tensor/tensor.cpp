#include "ideal/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace ideal {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{}, std::vector<float>{value}); }

Tensor Tensor::parameter(Shape shape, std::vector<float> data) {
  Tensor t(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " +
                     to_string(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::rank() const { return impl_->shape.size(); }
std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<float> Tensor::data() { return impl_->data; }
std::span<const float> Tensor::data() const { return impl_->data; }

float Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw ShapeError("item: tensor of shape " + to_string(impl_->shape) +
                     " is not a scalar");
  }
  return impl_->data[0];
}

float Tensor::at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const float> Tensor::grad() const { return impl_->grad; }

std::span<float> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0F);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0F);
}

void Tensor::clear_grad() {
  impl_->grad.clear();
  impl_->grad.shrink_to_fit();
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { impl_->requires_grad = flag; }
bool Tensor::is_leaf() const { return impl_->is_leaf; }
bool Tensor::on_tape() const { return impl_->tape_id.has_value(); }
std::optional<std::size_t> Tensor::tape_id() const { return impl_->tape_id; }

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

Tensor one_hot(std::span<const std::int64_t> labels, std::int64_t num_classes) {
  if (num_classes < 1) throw ShapeError("one_hot: num_classes must be >= 1");
  const auto rows = static_cast<std::int64_t>(labels.size());
  Tensor out(Shape{rows, num_classes});
  auto data = out.data();
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= num_classes) {
      throw std::out_of_range("one_hot: label " + std::to_string(label) +
                              " outside [0, " + std::to_string(num_classes) + ")");
    }
    data[static_cast<std::size_t>(i * num_classes + label)] = 1.0F;
  }
  return out;
}

std::vector<std::int64_t> argmax_rows(const Tensor& matrix) {
  if (matrix.rank() != 2) {
    throw ShapeError("argmax_rows: expected rank 2, got " + to_string(matrix.shape()));
  }
  const auto rows = static_cast<std::size_t>(matrix.dim(0));
  const auto cols = static_cast<std::size_t>(matrix.dim(1));
  const auto data = matrix.data();
  std::vector<std::int64_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = data.subspan(r * cols, cols);
    // max_element returns the first maximum: ties go to the lowest index.
    out[r] = std::distance(row.begin(), std::max_element(row.begin(), row.end()));
  }
  return out;
}

}  // namespace ideal
