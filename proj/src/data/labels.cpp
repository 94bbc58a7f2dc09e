#include "ideal/labels.hpp"

#include <stdexcept>
#include <vector>

namespace ideal {

Tensor stratified_one_hot_labels(std::int64_t batch, std::int64_t num_classes, SeededRng& rng) {
  if (batch < 1 || num_classes < 1) {
    throw std::invalid_argument("stratified_one_hot_labels: batch and class count must be positive");
  }
  std::vector<std::int64_t> classes(static_cast<std::size_t>(batch));
  if (batch % num_classes == 0) {
    for (std::int64_t i = 0; i < batch; ++i) classes[static_cast<std::size_t>(i)] = i % num_classes;
    rng.shuffle(std::span<std::int64_t>(classes));
  } else {
    for (auto& c : classes) c = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(num_classes)));
  }
  return one_hot(classes, num_classes);
}

bool is_one_hot(const Tensor& rows) {
  if (rows.rank() != 2) return false;
  const auto C = static_cast<std::size_t>(rows.dim(1));
  const auto data = rows.data();
  for (std::size_t r = 0; r < static_cast<std::size_t>(rows.dim(0)); ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const float v = data[r * C + c];
      if (v == 1.0F) {
        ++ones;
      } else if (v != 0.0F) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

}  // namespace ideal
