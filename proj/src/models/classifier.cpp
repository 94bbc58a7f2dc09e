#include <cmath>
#include <sstream>

#include "ideal/models.hpp"
#include "ideal/ops.hpp"

namespace ideal {

std::string to_string(const ImageShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

ImageShape parse_image_shape(std::string_view text) {
  ImageShape shape;
  char x1 = 0;
  char x2 = 0;
  std::istringstream in{std::string(text)};
  if (!(in >> shape.channels >> x1 >> shape.height >> x2 >> shape.width) || x1 != 'x' ||
      x2 != 'x' || shape.channels < 1 || shape.height < 1 || shape.width < 1) {
    throw std::invalid_argument("invalid image shape '" + std::string(text) + "'");
  }
  return shape;
}

std::string_view arch_name(ClassifierArch arch) {
  switch (arch) {
    case ClassifierArch::kMlp: return "mlp";
    case ClassifierArch::kLeNet: return "lenet";
    case ClassifierArch::kSmallCnn: return "smallcnn";
  }
  return "unknown";
}

ClassifierArch parse_arch(std::string_view name) {
  if (name == "mlp") return ClassifierArch::kMlp;
  if (name == "lenet") return ClassifierArch::kLeNet;
  if (name == "smallcnn") return ClassifierArch::kSmallCnn;
  throw std::invalid_argument("unknown classifier architecture '" + std::string(name) + "'");
}

namespace {

std::int64_t pooled(std::int64_t size) { return size / 2; }

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ops::add(ops::matmul(x, w), b);
}

}  // namespace

Classifier::Classifier(ClassifierArch arch, std::int64_t num_classes, ImageShape input)
    : arch_(arch), num_classes_(num_classes), input_(input) {
  if (num_classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
  const auto C = input.channels;
  const auto H = input.height;
  const auto W = input.width;
  switch (arch) {
    case ClassifierArch::kMlp: {
      const auto in = C * H * W;
      add_param("fc1.weight", {in, 512});
      add_param("fc1.bias", {512});
      add_param("fc2.weight", {512, 256});
      add_param("fc2.bias", {256});
      add_param("fc3.weight", {256, num_classes});
      add_param("fc3.bias", {num_classes});
      break;
    }
    case ClassifierArch::kLeNet: {
      const auto h = pooled(pooled(H) - 4);
      const auto w = pooled(pooled(W) - 4);
      if (h < 1 || w < 1) throw std::invalid_argument("lenet: input " + to_string(input) + " too small");
      add_param("conv1.weight", {6, C, 5, 5});
      add_param("conv1.bias", {6});
      add_param("conv2.weight", {16, 6, 5, 5});
      add_param("conv2.bias", {16});
      add_param("fc1.weight", {16 * h * w, 120});
      add_param("fc1.bias", {120});
      add_param("fc2.weight", {120, 84});
      add_param("fc2.bias", {84});
      add_param("fc3.weight", {84, num_classes});
      add_param("fc3.bias", {num_classes});
      break;
    }
    case ClassifierArch::kSmallCnn: {
      const auto h = pooled(pooled(pooled(H)));
      const auto w = pooled(pooled(pooled(W)));
      if (h < 1 || w < 1) throw std::invalid_argument("smallcnn: input " + to_string(input) + " too small");
      add_param("conv1.weight", {32, C, 3, 3});
      add_param("conv1.bias", {32});
      add_param("conv2.weight", {64, 32, 3, 3});
      add_param("conv2.bias", {64});
      add_param("conv3.weight", {128, 64, 3, 3});
      add_param("conv3.bias", {128});
      add_param("fc1.weight", {128 * h * w, 256});
      add_param("fc1.bias", {256});
      add_param("fc2.weight", {256, num_classes});
      add_param("fc2.bias", {num_classes});
      break;
    }
  }
}

Classifier::Classifier(ClassifierArch arch, std::int64_t num_classes, ImageShape input,
                       SeededRng& rng)
    : Classifier(arch, num_classes, input) {
  initialize(rng);
}

void Classifier::add_param(std::string name, Shape shape) {
  const auto n = shape_numel(shape);
  params_.push_back({std::move(name), Tensor::parameter(std::move(shape), std::vector<float>(n))});
}

void Classifier::initialize(SeededRng& rng) {
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike. A bias
  // uses the fan-in of the weight registered right before it.
  std::int64_t fan_in = 1;
  for (auto& p : params_) {
    const auto& shape = p.value.shape();
    if (shape.size() == 4) {
      fan_in = shape[1] * shape[2] * shape[3];
    } else if (shape.size() == 2) {
      fan_in = shape[0];
    }
    const auto bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : p.value.data()) v = static_cast<float>((2.0 * rng.uniform01() - 1.0) * bound);
  }
}

Tensor Classifier::logits(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != input_.channels || images.dim(2) != input_.height ||
      images.dim(3) != input_.width) {
    throw ShapeError("classifier(" + std::string(arch_name(arch_)) + "): expected (B, " +
                     to_string(input_) + ") images, got " + to_string(images.shape()));
  }
  const auto B = images.dim(0);
  switch (arch_) {
    case ClassifierArch::kMlp: {
      auto h = ops::reshape(images, {B, input_.channels * input_.height * input_.width});
      h = ops::relu(dense(h, param(0), param(1)));
      h = ops::relu(dense(h, param(2), param(3)));
      return dense(h, param(4), param(5));
    }
    case ClassifierArch::kLeNet: {
      auto h = ops::max_pool2d(ops::relu(ops::conv2d(images, param(0), param(1), {1, 2})), 2);
      h = ops::max_pool2d(ops::relu(ops::conv2d(h, param(2), param(3), {1, 0})), 2);
      h = ops::reshape(h, {B, h.dim(1) * h.dim(2) * h.dim(3)});
      h = ops::relu(dense(h, param(4), param(5)));
      h = ops::relu(dense(h, param(6), param(7)));
      return dense(h, param(8), param(9));
    }
    case ClassifierArch::kSmallCnn: {
      auto h = ops::max_pool2d(ops::relu(ops::conv2d(images, param(0), param(1), {1, 1})), 2);
      h = ops::max_pool2d(ops::relu(ops::conv2d(h, param(2), param(3), {1, 1})), 2);
      h = ops::max_pool2d(ops::relu(ops::conv2d(h, param(4), param(5), {1, 1})), 2);
      h = ops::reshape(h, {B, h.dim(1) * h.dim(2) * h.dim(3)});
      h = ops::relu(dense(h, param(6), param(7)));
      return dense(h, param(8), param(9));
    }
  }
  throw std::logic_error("unreachable classifier arch");
}

Tensor Classifier::predict(const Tensor& images) const { return ops::softmax(logits(images)); }

std::string Classifier::descriptor() const {
  return "classifier:" + std::string(arch_name(arch_)) + ":" + std::to_string(num_classes_) + ":" +
         to_string(input_);
}

Classifier Classifier::from_descriptor(std::string_view descriptor) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : descriptor) {
    if (ch == ':') {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(current);
  if (parts.size() != 4 || parts[0] != "classifier") {
    throw std::invalid_argument("not a classifier descriptor: '" + std::string(descriptor) + "'");
  }
  return Classifier(parse_arch(parts[1]), std::stoll(parts[2]), parse_image_shape(parts[3]));
}

std::vector<Tensor> Classifier::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

Classifier Classifier::clone() const {
  Classifier copy(arch_, num_classes_, input_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].value.data();
    std::copy(src.begin(), src.end(), copy.params_[i].value.data().begin());
  }
  return copy;
}

FreezeGuard::FreezeGuard(std::vector<Tensor> params) : params_(std::move(params)) {
  previous_.reserve(params_.size());
  for (auto& p : params_) {
    previous_.push_back(p.requires_grad());
    p.set_requires_grad(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(previous_[i]);
}

}  // namespace ideal
