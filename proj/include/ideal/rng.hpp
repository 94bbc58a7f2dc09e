#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "ideal/tensor.hpp"

namespace ideal {

/// Reproducible random stream identified by (seed, label).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Standard distributions are not (their algorithms are left to the
/// library), so the transforms below are spelled out here to keep draws
/// identical across toolchains.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::string_view stream);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::string& stream() const { return stream_; }

  /// Independent child stream; same (seed, stream, label) -> same child.
  [[nodiscard]] SeededRng fork(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform over {0, .., n - 1} by rejection (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller; spare value cached.
  double gaussian();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::string stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Tensor sample_gaussian(SeededRng& rng, const Shape& shape, float mean = 0.0F,
                       float stddev = 1.0F);
std::int64_t sample_uniform_class(SeededRng& rng, std::int64_t num_classes);

}  // namespace ideal
