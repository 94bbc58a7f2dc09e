#include "ideal/weights_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>

namespace ideal {

namespace {

constexpr std::array<char, 4> kMagic{'I', 'D', 'L', 'W'};

class Writer {
 public:
  void u16(std::uint16_t v) {
    bytes_.push_back(static_cast<char>(v & 0xFF));
    bytes_.push_back(static_cast<char>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const char> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  [[nodiscard]] const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint16_t u16() {
    need(2, "u16");
    const auto v = static_cast<std::uint16_t>(byte(0) | (byte(1) << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(static_cast<std::size_t>(i))) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const auto len = u32();
    need(len, "string");
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const char> raw(std::size_t n) {
    need(n, "magic");
    std::span<const char> s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool at_end() const { return pos_ == bytes_.size(); }
  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  [[nodiscard]] std::uint32_t byte(std::size_t offset) const {
    return static_cast<unsigned char>(bytes_[pos_ + offset]);
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw WeightFormatError(source_ + ": truncated file while reading " + what + " at byte " +
                              std::to_string(pos_));
    }
  }

  std::vector<char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void apply_tensors(const std::vector<NamedTensor>& targets, const WeightFile& file,
                   const std::filesystem::path& path) {
  for (const auto& target : targets) {
    const NamedTensor* match = nullptr;
    for (const auto& t : file.tensors) {
      if (t.name == target.name) match = &t;
    }
    if (match == nullptr) {
      throw WeightFormatError(path.string() + ": missing tensor '" + target.name + "'");
    }
    if (match->value.shape() != target.value.shape()) {
      throw ArchMismatchError(path.string() + ": tensor '" + target.name + "' has shape " +
                              to_string(match->value.shape()) + ", network expects " +
                              to_string(target.value.shape()));
    }
    Tensor handle = target.value;
    auto dst = handle.data();
    auto src = match->value.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace

void write_weight_file(const std::filesystem::path& path, const WeightFile& file) {
  Writer w;
  w.raw(kMagic);
  w.u16(kWeightFormatVersion);
  w.str(file.arch_id);
  w.u32(static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& t : file.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.value.data()) w.f32(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

WeightFile read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());
  const auto magic = r.raw(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw WeightFormatError(path.string() + ": missing IDLW magic");
  }
  const auto version = r.u16();
  if (version != kWeightFormatVersion) {
    throw WeightFormatError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  WeightFile file;
  file.arch_id = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    const auto rank = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
    const auto numel = shape_numel(shape);
    if (numel > r.remaining() / sizeof(float)) {
      throw WeightFormatError(path.string() + ": truncated payload for tensor '" + name + "'");
    }
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32();
    file.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!r.at_end()) throw WeightFormatError(path.string() + ": trailing bytes after last tensor");
  return file;
}

void save_weights(const Classifier& net, const std::filesystem::path& path) {
  write_weight_file(path, WeightFile{net.descriptor(), net.parameters()});
}

Classifier load_classifier(const std::filesystem::path& path) {
  const auto file = read_weight_file(path);
  if (!file.arch_id.starts_with("classifier:")) {
    throw ArchMismatchError(path.string() + ": arch id '" + file.arch_id + "' is not a classifier");
  }
  auto net = Classifier::from_descriptor(file.arch_id);
  apply_tensors(net.parameters(), file, path);
  return net;
}

void load_weights(Classifier& net, const std::filesystem::path& path) {
  const auto file = read_weight_file(path);
  if (file.arch_id != net.descriptor()) {
    throw ArchMismatchError(path.string() + ": arch id '" + file.arch_id + "' does not match '" +
                            net.descriptor() + "'");
  }
  apply_tensors(net.parameters(), file, path);
}

void save_weights(const GeneratorNet& net, const std::filesystem::path& path) {
  auto tensors = net.parameters();
  for (auto& s : net.batch_statistics()) tensors.push_back(std::move(s));
  write_weight_file(path, WeightFile{net.descriptor(), std::move(tensors)});
}

GeneratorNet load_generator(const std::filesystem::path& path) {
  const auto file = read_weight_file(path);
  if (!file.arch_id.starts_with("generator:")) {
    throw ArchMismatchError(path.string() + ": arch id '" + file.arch_id + "' is not a generator");
  }
  SeededRng scratch(0, "load");
  GeneratorNet net(GeneratorNet::config_from_descriptor(file.arch_id), scratch);
  apply_tensors(net.parameters(), file, path);
  net.set_batch_statistics(file.tensors);
  return net;
}

}  // namespace ideal
