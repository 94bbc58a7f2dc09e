#pragma once

#include <cstdint>

#include "ideal/rng.hpp"
#include "ideal/tensor.hpp"

namespace ideal {

/// (B, C) one-hot rows with exactly B / C rows per class, in shuffled order.
/// When C does not divide B each row is an independent uniform class draw.
Tensor stratified_one_hot_labels(std::int64_t batch, std::int64_t num_classes, SeededRng& rng);

/// True when every row of a (B, C) matrix has a single 1 and zeros elsewhere.
bool is_one_hot(const Tensor& rows);

}  // namespace ideal
