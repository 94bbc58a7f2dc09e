#include <httplib.h>

#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include "ideal/oracle.hpp"
#include "ideal/wire.hpp"

namespace ideal {

namespace {

std::string random_token() {
  std::random_device rd;
  std::ostringstream out;
  out << std::hex << rd() << rd() << rd() << rd();
  return out.str();
}

class HttpOracle final : public HardLabelOracle {
 public:
  HttpOracle(const std::string& url, std::string api_key, HttpOracleOptions options)
      : client_(url), url_(url), api_key_(std::move(api_key)), options_(options), token_(random_token()) {
    if (!client_.is_valid()) throw TransportError("oracle: invalid endpoint url '" + url + "'");
    client_.set_connection_timeout(options_.timeout);
    client_.set_read_timeout(options_.timeout);
    client_.set_write_timeout(options_.timeout);
    const auto res = send(0, [&] { return client_.Get("/v1/budget", headers("")); });
    remaining_ = wire::decode_budget(res.body);
  }

  std::vector<std::int64_t> query(const Tensor& images) override {
    if (images.rank() != 4 || images.dim(0) < 1) {
      throw ShapeError("oracle: expected a non-empty (B, C, H, W) batch, got " + to_string(images.shape()));
    }
    const auto body = wire::encode_images(images);
    const auto request_id = token_ + "-" + std::to_string(next_request_++);
    const auto n = static_cast<std::uint64_t>(images.dim(0));
    const auto res = send(n, [&] { return client_.Post("/v1/predict", headers(request_id), body, "application/json"); });
    auto reply = wire::decode_predict_response(res.body);
    if (reply.labels.size() != static_cast<std::size_t>(images.dim(0))) {
      throw ProtocolError("oracle: server returned " + std::to_string(reply.labels.size()) + " labels for " +
                          std::to_string(images.dim(0)) + " images");
    }
    remaining_ = reply.remaining_budget;
    used_ += reply.labels.size();
    return std::move(reply.labels);
  }

  [[nodiscard]] std::uint64_t remaining() const override { return remaining_; }
  [[nodiscard]] std::uint64_t used() const override { return used_; }

 private:
  [[nodiscard]] httplib::Headers headers(const std::string& request_id) const {
    httplib::Headers h{{"X-Api-Key", api_key_}};
    if (!request_id.empty()) h.emplace("X-Request-Id", request_id);
    return h;
  }

  // Retries connection failures and 5xx responses with exponential backoff.
  // The request id is reused across attempts so the server charges once.
  template <typename Call>
  httplib::Response send(std::uint64_t requested, Call call) {
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      auto result = call();
      if (!result) {
        last_error = httplib::to_string(result.error());
        continue;
      }
      const auto& res = *result;
      if (res.status >= 500) {
        last_error = "HTTP " + std::to_string(res.status);
        continue;
      }
      if (res.status == 200) return res;
      const auto code = wire::decode_error(res.body);
      if (res.status == 429 || code == "budget_exhausted") throw BudgetExhausted(requested, remaining_);
      if (res.status == 401 || code == "unauthorized") throw AuthorizationError("oracle: api key rejected by " + url_);
      throw ProtocolError("oracle: HTTP " + std::to_string(res.status) + (code.empty() ? "" : " (" + code + ")"));
    }
    throw TransportError("oracle: " + url_ + " unreachable after " + std::to_string(options_.max_retries + 1) +
                         " attempts: " + last_error);
  }

  httplib::Client client_;
  std::string url_;
  std::string api_key_;
  HttpOracleOptions options_;
  std::string token_;
  std::uint64_t next_request_ = 0;
  std::uint64_t remaining_ = 0;
  std::uint64_t used_ = 0;
};

}  // namespace

std::unique_ptr<HardLabelOracle> make_http_oracle(const std::string& endpoint_url, const std::string& api_key,
                                                  HttpOracleOptions options) {
  return std::make_unique<HttpOracle>(endpoint_url, api_key, options);
}

}  // namespace ideal
