#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ideal/tensor.hpp"

// JSON bodies shared by the prediction service and its HTTP client.
//   POST /v1/predict  {"shape":[B,C,H,W],"data_b64":"..."}
//                  -> {"labels":[...],"remaining_budget":n}
//   GET  /v1/budget -> {"remaining_budget":n}
//   errors         -> {"error":"budget_exhausted"|"bad_request"|"unauthorized"|...}
// Image data is base64 of little-endian float32 values, already in [-1, 1].
namespace ideal::wire {

inline constexpr std::int64_t kMaxBatch = 1024;

std::string base64_encode(std::span<const unsigned char> bytes);
/// Throws ProtocolError on malformed input.
std::vector<unsigned char> base64_decode(std::string_view text);

std::string encode_images(const Tensor& images);
/// Throws ProtocolError for malformed JSON, a non-4D or non-positive shape,
/// or a payload whose length does not match the shape.
Tensor decode_images(std::string_view body);

struct PredictResponse {
  std::vector<std::int64_t> labels;
  std::uint64_t remaining_budget = 0;
};

std::string encode_predict_response(const PredictResponse& response);
PredictResponse decode_predict_response(std::string_view body);

std::string encode_budget(std::uint64_t remaining);
std::uint64_t decode_budget(std::string_view body);

std::string encode_error(std::string_view code);
/// Error code from an error body, or "" if the body is not one.
std::string decode_error(std::string_view body);

}  // namespace ideal::wire
