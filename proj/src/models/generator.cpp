#include <sstream>

#include "ideal/models.hpp"
#include "ideal/ops.hpp"

namespace ideal {

namespace {

constexpr float kInitStd = 0.02F;
constexpr std::size_t kNormLayers = 3;

// parameter indices
enum : std::size_t {
  kFcW,
  kFcB,
  kBn0G,
  kBn0B,
  kUp1W,
  kUp1B,
  kBn1G,
  kBn1B,
  kUp2W,
  kUp2B,
  kBn2G,
  kBn2B,
  kOutW,
  kOutB,
};

std::int64_t input_width(const GeneratorConfig& c) {
  return c.latent_dim + (c.conditional ? c.num_classes : 0);
}

}  // namespace

GeneratorNet::GeneratorNet(GeneratorConfig config, SeededRng& rng)
    : config_(config), stats_(kNormLayers) {
  const auto& out = config_.output;
  if (config_.latent_dim < 1) throw std::invalid_argument("generator: latent_dim must be >= 1");
  if (out.channels < 1 || out.height < 4 || out.width < 4 || out.height % 4 != 0 ||
      out.width % 4 != 0) {
    throw std::invalid_argument("generator: output shape " + to_string(out) +
                                " must have height and width divisible by 4");
  }
  if (config_.conditional && config_.num_classes < 2) {
    throw std::invalid_argument("generator: conditional mode needs num_classes >= 2");
  }
  const auto h = out.height / 4;
  const auto w = out.width / 4;
  const auto c0 = config_.base_channels;
  const auto c1 = config_.mid_channels;
  const auto c2 = config_.top_channels;
  add_param("fc.weight", {input_width(config_), c0 * h * w});
  add_param("fc.bias", {c0 * h * w});
  add_param("bn0.gamma", {c0});
  add_param("bn0.beta", {c0});
  add_param("up1.weight", {c0, c1, 4, 4});
  add_param("up1.bias", {c1});
  add_param("bn1.gamma", {c1});
  add_param("bn1.beta", {c1});
  add_param("up2.weight", {c1, c2, 4, 4});
  add_param("up2.bias", {c2});
  add_param("bn2.gamma", {c2});
  add_param("bn2.beta", {c2});
  add_param("out.weight", {out.channels, c2, 3, 3});
  add_param("out.bias", {out.channels});
  reinitialize(rng);
}

void GeneratorNet::add_param(std::string name, Shape shape) {
  const auto n = shape_numel(shape);
  params_.push_back({std::move(name), Tensor::parameter(std::move(shape), std::vector<float>(n))});
}

void GeneratorNet::reinitialize(SeededRng& rng) {
  for (auto& p : params_) {
    const auto& name = p.name;
    auto data = p.value.data();
    if (name.ends_with(".bias") || name.ends_with(".beta")) {
      std::fill(data.begin(), data.end(), 0.0F);
    } else {
      const float mean = name.ends_with(".gamma") ? 1.0F : 0.0F;
      for (auto& v : data) v = mean + kInitStd * static_cast<float>(rng.gaussian());
    }
    p.value.clear_grad();
  }
  for (auto& s : stats_) s.reset();
}

Tensor GeneratorNet::normalize(std::size_t layer, const Tensor& x, const Tensor& gamma,
                               const Tensor& beta) {
  if (training_) {
    ops::BatchStats stats;
    auto y = ops::batch_norm(x, gamma, beta, &stats);
    stats_[layer] = std::move(stats);
    return y;
  }
  if (stats_[layer]) return ops::batch_norm_fixed(x, gamma, beta, *stats_[layer]);
  const auto C = static_cast<std::size_t>(x.dim(1));
  return ops::batch_norm_fixed(x, gamma, beta,
                               ops::BatchStats{std::vector<float>(C, 0.0F), std::vector<float>(C, 1.0F)});
}

Tensor GeneratorNet::generate(const Tensor& z, const Tensor* labels) {
  if (z.rank() != 2 || z.dim(1) != config_.latent_dim) {
    throw ShapeError("generate: expected z of shape (B, " + std::to_string(config_.latent_dim) +
                     "), got " + to_string(z.shape()));
  }
  const auto B = z.dim(0);
  Tensor input = z;
  if (!config_.conditional && labels != nullptr) {
    throw std::invalid_argument("generate: unconditional generator was given labels");
  }
  if (config_.conditional) {
    if (labels == nullptr || !labels->defined()) {
      throw std::invalid_argument("generate: conditional generator requires one-hot labels");
    }
    if (labels->shape() != Shape{B, config_.num_classes}) {
      throw ShapeError("generate: labels must be (" + std::to_string(B) + ", " +
                       std::to_string(config_.num_classes) + "), got " + to_string(labels->shape()));
    }
    // Noise and labels are constants, so the concatenation happens off-tape.
    const auto zw = static_cast<std::size_t>(config_.latent_dim);
    const auto cw = static_cast<std::size_t>(config_.num_classes);
    std::vector<float> joined(static_cast<std::size_t>(B) * (zw + cw));
    const auto zd = z.data();
    const auto ld = labels->data();
    for (std::size_t b = 0; b < static_cast<std::size_t>(B); ++b) {
      std::copy_n(zd.begin() + static_cast<std::ptrdiff_t>(b * zw), zw, joined.begin() + static_cast<std::ptrdiff_t>(b * (zw + cw)));
      std::copy_n(ld.begin() + static_cast<std::ptrdiff_t>(b * cw), cw, joined.begin() + static_cast<std::ptrdiff_t>(b * (zw + cw) + zw));
    }
    input = Tensor(Shape{B, config_.latent_dim + config_.num_classes}, std::move(joined));
  }
  const auto& out = config_.output;
  auto h = ops::add(ops::matmul(input, param(kFcW)), param(kFcB));
  h = ops::reshape(h, {B, config_.base_channels, out.height / 4, out.width / 4});
  h = normalize(0, h, param(kBn0G), param(kBn0B));
  h = ops::conv_transpose2d(h, param(kUp1W), param(kUp1B), {2, 1});
  h = normalize(1, ops::leaky_relu(h), param(kBn1G), param(kBn1B));
  h = ops::conv_transpose2d(h, param(kUp2W), param(kUp2B), {2, 1});
  h = normalize(2, ops::leaky_relu(h), param(kBn2G), param(kBn2B));
  h = ops::conv2d(h, param(kOutW), param(kOutB), {1, 1});
  return ops::tanh(h);
}

std::string GeneratorNet::descriptor() const {
  std::ostringstream out;
  out << "generator:" << config_.latent_dim << ':' << config_.num_classes << ':'
      << (config_.conditional ? "cond" : "uncond") << ':' << to_string(config_.output) << ':'
      << config_.base_channels << '-' << config_.mid_channels << '-' << config_.top_channels;
  return out.str();
}

GeneratorConfig GeneratorNet::config_from_descriptor(std::string_view descriptor) {
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
  if (parts.size() != 6 || parts[0] != "generator" ||
      (parts[3] != "cond" && parts[3] != "uncond")) {
    throw std::invalid_argument("not a generator descriptor: '" + std::string(descriptor) + "'");
  }
  GeneratorConfig config;
  config.latent_dim = std::stoll(parts[1]);
  config.num_classes = std::stoll(parts[2]);
  config.conditional = parts[3] == "cond";
  config.output = parse_image_shape(parts[4]);
  char d1 = 0;
  char d2 = 0;
  std::istringstream widths(parts[5]);
  if (!(widths >> config.base_channels >> d1 >> config.mid_channels >> d2 >> config.top_channels) ||
      d1 != '-' || d2 != '-') {
    throw std::invalid_argument("bad generator widths in descriptor '" + std::string(descriptor) + "'");
  }
  return config;
}

std::vector<Tensor> GeneratorNet::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

std::vector<NamedTensor> GeneratorNet::batch_statistics() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    if (!stats_[i]) continue;
    const auto C = static_cast<std::int64_t>(stats_[i]->mean.size());
    const auto prefix = "bn" + std::to_string(i);
    out.push_back({prefix + ".mean", Tensor(Shape{C}, stats_[i]->mean)});
    out.push_back({prefix + ".var", Tensor(Shape{C}, stats_[i]->var)});
  }
  return out;
}

void GeneratorNet::set_batch_statistics(const std::vector<NamedTensor>& stats) {
  for (auto& s : stats_) s.reset();
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    const auto prefix = "bn" + std::to_string(i);
    const NamedTensor* mean = nullptr;
    const NamedTensor* var = nullptr;
    for (const auto& t : stats) {
      if (t.name == prefix + ".mean") mean = &t;
      if (t.name == prefix + ".var") var = &t;
    }
    if (mean == nullptr || var == nullptr) continue;
    stats_[i] = ops::BatchStats{{mean->value.data().begin(), mean->value.data().end()},
                                {var->value.data().begin(), var->value.data().end()}};
  }
}

}  // namespace ideal
