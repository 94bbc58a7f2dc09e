#include "ideal/wire.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <json.hpp>

#include "ideal/oracle.hpp"

namespace ideal::wire {

namespace {

using nlohmann::json;

json parse(std::string_view body) {
  auto doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) throw ProtocolError("body is not a JSON object");
  return doc;
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFU) << 24) | ((v & 0xFF00U) << 8) | ((v >> 8) & 0xFF00U) | (v >> 24);
  }
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  // EVP_EncodeBlock takes an int length; chunk by a multiple of 3.
  constexpr std::size_t kChunk = 3 * (1U << 20);
  std::size_t written = 0;
  for (std::size_t pos = 0; pos < bytes.size(); pos += kChunk) {
    const auto n = std::min(kChunk, bytes.size() - pos);
    written += static_cast<std::size_t>(EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data() + written),
                                                        bytes.data() + pos, static_cast<int>(n)));
  }
  out.resize(written);
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<unsigned char> out(text.size() / 4 * 3);
  constexpr std::size_t kChunk = 4 * (1U << 20);
  std::size_t written = 0;
  for (std::size_t pos = 0; pos < text.size(); pos += kChunk) {
    const auto n = std::min(kChunk, text.size() - pos);
    const int got = EVP_DecodeBlock(out.data() + written, reinterpret_cast<const unsigned char*>(text.data() + pos),
                                    static_cast<int>(n));
    if (got < 0) throw ProtocolError("invalid base64 payload");
    written += static_cast<std::size_t>(got);
  }
  // EVP_DecodeBlock emits the padding positions as zero bytes.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(written - pad);
  return out;
}

std::string encode_images(const Tensor& images) {
  const auto values = images.data();
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto v = to_le(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(bytes.data() + 4 * i, &v, 4);
  }
  json doc;
  doc["shape"] = images.shape();
  doc["data_b64"] = base64_encode(bytes);
  return doc.dump();
}

Tensor decode_images(std::string_view body) {
  const auto doc = parse(body);
  if (!doc.contains("shape") || !doc["shape"].is_array() || doc["shape"].size() != 4) {
    throw ProtocolError("'shape' must be an array of 4 integers");
  }
  Shape shape;
  std::uint64_t numel = 1;
  for (const auto& d : doc["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 1 || d.get<std::int64_t>() > (1 << 20)) {
      throw ProtocolError("'shape' entries must be positive integers");
    }
    shape.push_back(d.get<std::int64_t>());
    numel *= static_cast<std::uint64_t>(shape.back());
    if (numel > (std::uint64_t{1} << 31)) throw ProtocolError("payload too large");
  }
  if (!doc.contains("data_b64") || !doc["data_b64"].is_string()) {
    throw ProtocolError("'data_b64' must be a string");
  }
  const auto bytes = base64_decode(doc["data_b64"].get_ref<const std::string&>());
  if (bytes.size() != numel * 4) {
    throw ProtocolError("payload has " + std::to_string(bytes.size()) + " bytes, shape needs " +
                        std::to_string(numel * 4));
  }
  std::vector<float> values(numel);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t v = 0;
    std::memcpy(&v, bytes.data() + 4 * i, 4);
    values[i] = std::bit_cast<float>(to_le(v));
  }
  return Tensor(std::move(shape), std::move(values));
}

std::string encode_predict_response(const PredictResponse& response) {
  json doc;
  doc["labels"] = response.labels;
  doc["remaining_budget"] = response.remaining_budget;
  return doc.dump();
}

PredictResponse decode_predict_response(std::string_view body) {
  const auto doc = parse(body);
  if (!doc.contains("labels") || !doc["labels"].is_array() || !doc.contains("remaining_budget") ||
      !doc["remaining_budget"].is_number_unsigned()) {
    throw ProtocolError("prediction response lacks 'labels' or 'remaining_budget'");
  }
  PredictResponse out;
  out.remaining_budget = doc["remaining_budget"].get<std::uint64_t>();
  for (const auto& l : doc["labels"]) {
    if (!l.is_number_integer() || l.get<std::int64_t>() < 0) throw ProtocolError("labels must be class indices");
    out.labels.push_back(l.get<std::int64_t>());
  }
  return out;
}

std::string encode_budget(std::uint64_t remaining) {
  json doc;
  doc["remaining_budget"] = remaining;
  return doc.dump();
}

std::uint64_t decode_budget(std::string_view body) {
  const auto doc = parse(body);
  if (!doc.contains("remaining_budget") || !doc["remaining_budget"].is_number_unsigned()) {
    throw ProtocolError("budget response lacks 'remaining_budget'");
  }
  return doc["remaining_budget"].get<std::uint64_t>();
}

std::string encode_error(std::string_view code) {
  json doc;
  doc["error"] = code;
  return doc.dump();
}

std::string decode_error(std::string_view body) {
  auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("error") || !doc["error"].is_string()) return "";
  return doc["error"].get<std::string>();
}

}  // namespace ideal::wire
