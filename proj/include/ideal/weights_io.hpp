#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ideal/models.hpp"

namespace ideal {

// Binary layout (all integers and floats little-endian):
//   "IDLW" | u16 version | u32 len, arch id bytes | u32 tensor count |
//   per tensor: u32 len, name bytes | u32 rank | u32 dims[rank] | f32 data[]
inline constexpr std::uint16_t kWeightFormatVersion = 1;

class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArchMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WeightFile {
  std::string arch_id;
  std::vector<NamedTensor> tensors;
};

void write_weight_file(const std::filesystem::path& path, const WeightFile& file);
WeightFile read_weight_file(const std::filesystem::path& path);

void save_weights(const Classifier& net, const std::filesystem::path& path);
/// Reconstructs the classifier described by the file's arch id.
Classifier load_classifier(const std::filesystem::path& path);
/// Loads into an existing network; the file's arch id must match exactly.
void load_weights(Classifier& net, const std::filesystem::path& path);

/// Generator files also carry the eval-mode batch statistics.
void save_weights(const GeneratorNet& net, const std::filesystem::path& path);
GeneratorNet load_generator(const std::filesystem::path& path);

}  // namespace ideal
