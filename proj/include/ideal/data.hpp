#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ideal/models.hpp"
#include "ideal/tensor.hpp"

namespace ideal {

class IdxFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { kTrain, kTest };

/// Immutable labelled image set; pixels in [-1, 1].
struct LabeledDataset {
  Tensor images;                     // (N, channels, H, W)
  std::vector<std::int64_t> labels;  // (N)
  std::int64_t num_classes = 10;
  Split split = Split::kTrain;

  [[nodiscard]] std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  [[nodiscard]] ImageShape image_shape() const;
  /// Copy of rows [begin, end) as a (n, channels, H, W) tensor.
  [[nodiscard]] Tensor batch(std::int64_t begin, std::int64_t end) const;
  [[nodiscard]] Tensor gather(std::span<const std::int64_t> indices) const;
};

/// Parses an IDX image/label pair (plain or gzip). Byte b maps to b / 127.5 - 1.
/// num_classes = 0 takes the class count to be the largest label + 1.
LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        Split split, std::int64_t num_classes = 0);

/// Loads the standard file names from `dir`:
/// train-images-idx3-ubyte / train-labels-idx1-ubyte (or t10k-* for the test
/// split), each optionally with a .gz suffix.
LabeledDataset load_idx_dir(const std::filesystem::path& dir, Split split, std::int64_t num_classes = 0);

/// Top-1 accuracy over the whole dataset; runs without recording a tape.
double evaluate_accuracy(const Classifier& net, const LabeledDataset& dataset, std::int64_t batch_size = 1000);

}  // namespace ideal
