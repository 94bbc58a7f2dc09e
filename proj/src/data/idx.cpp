#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>

#include "ideal/data.hpp"

namespace ideal {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxFormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& packed, const std::string& source) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IdxFormatError(source + ": inflateInit failed");
  zs.next_in = const_cast<Bytef*>(packed.data());
  zs.avail_in = static_cast<uInt>(packed.size());
  std::vector<unsigned char> out;
  std::vector<unsigned char> chunk(1 << 16);
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IdxFormatError(source + ": corrupt gzip stream");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw IdxFormatError(source + ": truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<unsigned char> read_maybe_gzip(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes, path.string());
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t offset, const std::string& source) {
  if (b.size() < offset + 4) throw IdxFormatError(source + ": truncated header");
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::filesystem::path with_optional_gz(const std::filesystem::path& base) {
  if (std::filesystem::exists(base)) return base;
  auto gz = base;
  gz += ".gz";
  if (std::filesystem::exists(gz)) return gz;
  throw IdxFormatError("missing dataset file '" + base.string() + "' (or .gz)");
}

}  // namespace

ImageShape LabeledDataset::image_shape() const {
  return {images.dim(1), images.dim(2), images.dim(3)};
}

Tensor LabeledDataset::batch(std::int64_t begin, std::int64_t end) const {
  if (begin < 0 || end > size() || begin > end) throw std::out_of_range("LabeledDataset::batch: bad range");
  const auto per = static_cast<std::size_t>(images.dim(1) * images.dim(2) * images.dim(3));
  const auto src = images.data();
  std::vector<float> out(src.begin() + static_cast<std::ptrdiff_t>(begin * static_cast<std::int64_t>(per)),
                         src.begin() + static_cast<std::ptrdiff_t>(end * static_cast<std::int64_t>(per)));
  return Tensor({end - begin, images.dim(1), images.dim(2), images.dim(3)}, std::move(out));
}

Tensor LabeledDataset::gather(std::span<const std::int64_t> indices) const {
  const auto per = static_cast<std::size_t>(images.dim(1) * images.dim(2) * images.dim(3));
  const auto src = images.data();
  std::vector<float> out(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= size()) throw std::out_of_range("LabeledDataset::gather: bad index");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(indices[i]) * per), per,
                out.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor({static_cast<std::int64_t>(indices.size()), images.dim(1), images.dim(2), images.dim(3)},
                std::move(out));
}

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        Split split, std::int64_t num_classes) {
  const auto img = read_maybe_gzip(images_path);
  const auto lab = read_maybe_gzip(labels_path);
  const auto img_src = images_path.string();
  const auto lab_src = labels_path.string();

  if (be32(img, 0, img_src) != kImageMagic) throw IdxFormatError(img_src + ": bad image magic");
  if (be32(lab, 0, lab_src) != kLabelMagic) throw IdxFormatError(lab_src + ": bad label magic");
  const std::uint64_t n = be32(img, 4, img_src);
  const std::uint64_t rows = be32(img, 8, img_src);
  const std::uint64_t cols = be32(img, 12, img_src);
  const std::uint64_t n_labels = be32(lab, 4, lab_src);
  if (n != n_labels) {
    throw IdxFormatError("image count " + std::to_string(n) + " does not match label count " +
                         std::to_string(n_labels));
  }
  if (img.size() - 16 < n * rows * cols) throw IdxFormatError(img_src + ": truncated payload");
  if (lab.size() - 8 < n) throw IdxFormatError(lab_src + ": truncated payload");
  if (num_classes < 0) throw std::invalid_argument("load_idx: negative class count");

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  std::vector<float> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(img[16 + i]) / 127.5F - 1.0F;
  ds.images = Tensor({static_cast<std::int64_t>(n), 1, static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)},
                     std::move(pixels));
  ds.labels.resize(n);
  if (num_classes == 0) {
    const auto top = n == 0 ? 0 : *std::max_element(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(n));
    ds.num_classes = static_cast<std::int64_t>(top) + 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::int64_t>(lab[8 + i]);
    if (label >= ds.num_classes) {
      throw IdxFormatError(lab_src + ": label " + std::to_string(label) + " at index " + std::to_string(i) +
                           " exceeds class count " + std::to_string(ds.num_classes));
    }
    ds.labels[i] = label;
  }
  return ds;
}

LabeledDataset load_idx_dir(const std::filesystem::path& dir, Split split, std::int64_t num_classes) {
  const std::string prefix = split == Split::kTrain ? "train" : "t10k";
  return load_idx(with_optional_gz(dir / (prefix + "-images-idx3-ubyte")),
                  with_optional_gz(dir / (prefix + "-labels-idx1-ubyte")), split, num_classes);
}

}  // namespace ideal
