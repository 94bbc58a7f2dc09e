#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "ideal/cli.hpp"

namespace ideal::cli {

std::uint8_t to_pixel(float value) {
  const float scaled = std::round((value + 1.0F) * 127.5F);
  if (!(scaled > 0.0F)) return 0;
  if (scaled >= 255.0F) return 255;
  return static_cast<std::uint8_t>(scaled);
}

Image tile_grid(const Tensor& images, std::int64_t rows, std::int64_t cols) {
  if (images.rank() != 4) throw ShapeError("tile_grid: expected (N, C, H, W), got " + to_string(images.shape()));
  if (rows < 1 || cols < 1) throw std::invalid_argument("tile_grid: rows and cols must be positive");
  const auto C = images.dim(1);
  const auto H = images.dim(2);
  const auto W = images.dim(3);
  if (C != 1 && C != 3) throw ShapeError("tile_grid: only 1 or 3 channels can be exported");
  if (images.dim(0) < rows * cols) {
    throw std::invalid_argument("tile_grid: need " + std::to_string(rows * cols) + " images, got " +
                                std::to_string(images.dim(0)));
  }
  Image out{cols * W, rows * H, C, {}};
  out.pixels.assign(static_cast<std::size_t>(out.width * out.height * C), 0);
  const auto src = images.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      const auto n = r * cols + c;
      for (std::int64_t ch = 0; ch < C; ++ch) {
        for (std::int64_t y = 0; y < H; ++y) {
          for (std::int64_t x = 0; x < W; ++x) {
            const auto v = src[static_cast<std::size_t>(((n * C + ch) * H + y) * W + x)];
            const auto py = r * H + y;
            const auto px = c * W + x;
            out.pixels[static_cast<std::size_t>((py * out.width + px) * C + ch)] = to_pixel(v);
          }
        }
      }
    }
  }
  return out;
}

void write_netpbm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("netpbm: 1 or 3 channels only");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string magic;
  int maxval = 0;
  Image img;
  in >> magic >> img.width >> img.height >> maxval;
  if ((magic != "P5" && magic != "P6") || maxval != 255 || img.width < 1 || img.height < 1) {
    throw std::runtime_error(path.string() + ": unsupported netpbm header");
  }
  in.get();
  img.channels = magic == "P5" ? 1 : 3;
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height * img.channels));
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  return img;
}

}  // namespace ideal::cli
