#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ideal/ops.hpp"
#include "ideal/rng.hpp"
#include "ideal/tensor.hpp"

namespace ideal {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct ImageShape {
  std::int64_t channels = 1;
  std::int64_t height = 28;
  std::int64_t width = 28;

  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

std::string to_string(const ImageShape& shape);
ImageShape parse_image_shape(std::string_view text);  // "1x28x28"

enum class ClassifierArch { kMlp, kLeNet, kSmallCnn };

std::string_view arch_name(ClassifierArch arch);
ClassifierArch parse_arch(std::string_view name);

/// Image classifier used for both the student and the teacher.
///
/// mlp:      flatten -> 512 -> 256 -> C, relu
/// lenet:    conv 6@5x5 (pad 2) -> pool -> conv 16@5x5 -> pool -> 120 -> 84 -> C, relu
/// smallcnn: three conv 3x3 blocks (32, 64, 128) each followed by 2x2 pooling,
///           then 256 -> C
class Classifier {
 public:
  Classifier(ClassifierArch arch, std::int64_t num_classes, ImageShape input, SeededRng& rng);

  [[nodiscard]] Tensor logits(const Tensor& images) const;
  /// Row-wise class probabilities, shape (B, C).
  [[nodiscard]] Tensor predict(const Tensor& images) const;

  [[nodiscard]] ClassifierArch arch() const { return arch_; }
  [[nodiscard]] std::int64_t num_classes() const { return num_classes_; }
  [[nodiscard]] const ImageShape& input_shape() const { return input_; }
  /// e.g. "classifier:lenet:10:1x28x28"; stored as the weight-file arch id.
  [[nodiscard]] std::string descriptor() const;
  static Classifier from_descriptor(std::string_view descriptor);

  [[nodiscard]] const std::vector<NamedTensor>& parameters() const { return params_; }
  [[nodiscard]] std::vector<Tensor> parameter_tensors() const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Deep copy with independent parameter storage.
  [[nodiscard]] Classifier clone() const;

 private:
  Classifier(ClassifierArch arch, std::int64_t num_classes, ImageShape input);
  void add_param(std::string name, Shape shape);
  [[nodiscard]] const Tensor& param(std::size_t index) const { return params_[index].value; }
  void initialize(SeededRng& rng);

  ClassifierArch arch_;
  std::int64_t num_classes_;
  ImageShape input_;
  std::vector<NamedTensor> params_;
};

using StudentNet = Classifier;
using TeacherNet = Classifier;

inline Tensor predict(const Classifier& net, const Tensor& images) { return net.predict(images); }

/// Marks a parameter set as non-trainable for the guard's lifetime.
/// Gradients still flow *through* the network to its inputs.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<Tensor> params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<Tensor> params_;
  std::vector<bool> previous_;
};

struct GeneratorConfig {
  std::int64_t latent_dim = 100;
  std::int64_t num_classes = 10;
  bool conditional = true;
  ImageShape output{1, 28, 28};
  // channels after the fully-connected layer and after each upsampling block
  std::int64_t base_channels = 128;
  std::int64_t mid_channels = 64;
  std::int64_t top_channels = 32;
};

/// DCGAN-style generator: [z, onehot(y)] -> fc -> (base, H/4, W/4) -> bn
/// -> 2 x (conv_transpose 4x4/2, leaky_relu, bn) -> conv 3x3 -> tanh.
///
/// Batch-norm uses the batch's statistics in training mode and the most
/// recent training-mode statistics in eval mode (identity statistics if the
/// generator has never run in training mode).
class GeneratorNet {
 public:
  GeneratorNet(GeneratorConfig config, SeededRng& rng);

  /// Redraws every parameter from `rng` and forgets batch statistics.
  /// Weights ~ N(0, 0.02), batch-norm scales ~ N(1, 0.02), biases 0.
  void reinitialize(SeededRng& rng);

  /// z: (B, latent_dim); labels: (B, C) one-hot, required iff conditional.
  Tensor generate(const Tensor& z, const Tensor* labels = nullptr);

  void set_training(bool training) { training_ = training; }
  [[nodiscard]] bool training() const { return training_; }

  [[nodiscard]] const GeneratorConfig& config() const { return config_; }
  [[nodiscard]] std::string descriptor() const;
  static GeneratorConfig config_from_descriptor(std::string_view descriptor);

  [[nodiscard]] const std::vector<NamedTensor>& parameters() const { return params_; }
  [[nodiscard]] std::vector<Tensor> parameter_tensors() const;

  /// Batch statistics as named tensors ("bn0.mean", ...), for serialisation.
  [[nodiscard]] std::vector<NamedTensor> batch_statistics() const;
  void set_batch_statistics(const std::vector<NamedTensor>& stats);

 private:
  void add_param(std::string name, Shape shape);
  [[nodiscard]] const Tensor& param(std::size_t index) const { return params_[index].value; }
  Tensor normalize(std::size_t layer, const Tensor& x, const Tensor& gamma, const Tensor& beta);

  GeneratorConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<std::optional<ops::BatchStats>> stats_;
  bool training_ = true;
};

}  // namespace ideal
