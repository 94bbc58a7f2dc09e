#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ideal/tensor.hpp"
#include "ideal/trainer.hpp"

namespace ideal::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBudget = 3;
inline constexpr int kExitOracle = 4;

struct RunManifest {
  TrainConfig config;
  std::string oracle_kind;  // "local" or "remote"
  std::string teacher_weights;  // local oracle
  std::string oracle_url;       // remote oracle
  std::string eval_data;
  std::string out_dir;
  std::string tool_version = kToolVersion;

  [[nodiscard]] std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
};

struct Image {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t channels = 1;  // 1 -> PGM (P5), 3 -> PPM (P6)
  std::vector<std::uint8_t> pixels;  // row-major, interleaved channels
};

/// [-1, 1] -> {0..255}, rounding to nearest, clamping outside the range.
std::uint8_t to_pixel(float value);

/// Tiles the first rows * cols images of an (N, C, H, W) batch, row-major.
Image tile_grid(const Tensor& images, std::int64_t rows, std::int64_t cols);

void write_netpbm(const std::filesystem::path& path, const Image& image);
Image read_netpbm(const std::filesystem::path& path);

/// Entry point behind the `ideal` executable.
int run(int argc, char** argv);

}  // namespace ideal::cli
