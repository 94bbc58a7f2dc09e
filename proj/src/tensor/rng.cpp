#include "ideal/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ideal {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::string_view stream)
    : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(fnv1a(stream)))) {}

SeededRng SeededRng::fork(std::string_view label) const {
  return SeededRng(seed_, stream_ + "/" + std::string(label));
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return draw % n;
}

double SeededRng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Tensor sample_gaussian(SeededRng& rng, const Shape& shape, float mean, float stddev) {
  if (shape.empty()) throw ShapeError("sample_gaussian: shape must be non-empty");
  Tensor out(shape);
  for (auto& v : out.data()) v = mean + stddev * static_cast<float>(rng.gaussian());
  return out;
}

std::int64_t sample_uniform_class(SeededRng& rng, std::int64_t num_classes) {
  if (num_classes < 2) throw std::invalid_argument("sample_uniform_class: need at least 2 classes");
  return static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(num_classes)));
}

}  // namespace ideal
