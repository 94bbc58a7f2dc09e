#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>

#include "ideal/service.hpp"
#include "ideal/weights_io.hpp"
#include "usage_log.hpp"

namespace ideal {

namespace {

constexpr std::size_t kMaxRequestIdLength = 128;

bool valid_request_id(std::string_view id) {
  return id.size() <= kMaxRequestIdLength && std::all_of(id.begin(), id.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
         });
}

OracleService::Reply error(int status, std::string_view code) { return {status, wire::encode_error(code)}; }

}  // namespace

void parse_bind_address(std::string_view text, ServiceConfig& config) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("bind address must be HOST:PORT");
  const auto port_text = text.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw std::invalid_argument("bad port in bind address '" + std::string(text) + "'");
  }
  config.host = colon == 0 ? "0.0.0.0" : std::string(text.substr(0, colon));
  config.port = port;
}

OracleService::OracleService(ServiceConfig config) : OracleService(load_classifier(config.weights_path), config) {}

OracleService::OracleService(Classifier teacher, ServiceConfig config)
    : teacher_(std::move(teacher)), config_(std::move(config)), expected_(teacher_.input_shape()) {
  if (config_.expected_input) {
    if (!(*config_.expected_input == teacher_.input_shape())) {
      throw std::invalid_argument("service: expected input " + to_string(*config_.expected_input) +
                                  " does not match the teacher's " + to_string(teacher_.input_shape()));
    }
  }
  if (config_.max_batch < 1) throw std::invalid_argument("service: max_batch must be positive");
  std::map<std::string, std::uint64_t> replayed_use;
  if (config_.usage_log) {
    log_ = std::make_unique<UsageLog>(*config_.usage_log);
    for (const auto& e : log_->replay()) {
      replayed_use[e.key_digest] += e.count;
      if (e.request_id != "-") charges_[{e.key_digest, e.request_id}] = {e.body_digest};
    }
  }
  for (const auto& [key, budget] : config_.budgets) {
    const auto digest = sha256_hex(key);
    const auto used = replayed_use.contains(digest) ? replayed_use[digest] : 0;
    if (used > budget) {
      throw std::invalid_argument("service: usage log shows " + std::to_string(used) +
                                  " queries for a key whose budget is " + std::to_string(budget));
    }
    ledgers_.emplace(key, std::make_unique<QueryLedger>(budget, used));
  }
}

OracleService::~OracleService() { stop(); }

OracleService::Reply OracleService::handle_predict(const std::string& api_key, const std::string& request_id,
                                                   std::string_view body) {
  const auto ledger_it = ledgers_.find(api_key);
  if (ledger_it == ledgers_.end()) return error(401, "unauthorized");
  if (!valid_request_id(request_id)) return error(400, "bad_request");

  Tensor images;
  try {
    images = wire::decode_images(body);
  } catch (const ProtocolError&) {
    return error(400, "bad_request");
  }
  if (images.dim(1) != expected_.channels || images.dim(2) != expected_.height || images.dim(3) != expected_.width) {
    return error(400, "bad_request");
  }
  if (images.dim(0) > config_.max_batch) return error(413, "payload_too_large");

  const auto n = static_cast<std::uint64_t>(images.dim(0));
  const auto key_digest = sha256_hex(api_key);
  const auto body_digest = sha256_hex(body);
  bool charged = false;
  {
    std::lock_guard lock(mutex_);
    const auto seen = request_id.empty() ? charges_.end() : charges_.find({key_digest, request_id});
    if (seen != charges_.end()) {
      if (seen->second.body_digest != body_digest) return error(400, "bad_request");
    } else {
      try {
        ledger_it->second->charge(n);
      } catch (const BudgetExhausted&) {
        return error(429, "budget_exhausted");
      }
      charged = true;
      if (!request_id.empty()) charges_[{key_digest, request_id}] = {body_digest};
    }
  }
  // Labels are a pure function of the images, so a deduplicated retry simply
  // recomputes them.
  std::vector<std::int64_t> labels;
  try {
    labels = hard_labels(teacher_, images);
  } catch (...) {
    if (charged) {
      std::lock_guard lock(mutex_);
      ledger_it->second->refund(n);
      charges_.erase({key_digest, request_id});
    }
    throw;
  }
  // Logged once labels exist: a crash before this point never answered the
  // client, so nothing is owed.
  if (charged && log_) {
    std::lock_guard lock(mutex_);
    log_->append({key_digest, n, request_id.empty() ? "-" : request_id, body_digest});
  }
  return {200, wire::encode_predict_response({std::move(labels), ledger_it->second->remaining()})};
}

OracleService::Reply OracleService::handle_budget(const std::string& api_key) const {
  const auto it = ledgers_.find(api_key);
  if (it == ledgers_.end()) return error(401, "unauthorized");
  return {200, wire::encode_budget(it->second->remaining())};
}

std::uint64_t OracleService::used(const std::string& api_key) const { return ledgers_.at(api_key)->used(); }

std::uint64_t OracleService::remaining(const std::string& api_key) const {
  return ledgers_.at(api_key)->remaining();
}

int OracleService::start() {
  if (server_) throw std::logic_error("service already started");
  server_ = std::make_unique<httplib::Server>();
  auto& srv = *server_;
  srv.set_payload_max_length(std::size_t{256} << 20);
  srv.Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = handle_predict(req.get_header_value("X-Api-Key"), req.get_header_value("X-Request-Id"),
                                      req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.Get("/v1/budget", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = handle_budget(req.get_header_value("X-Api-Key"));
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content(wire::encode_error("internal"), "application/json");
  });
  if (config_.port == 0) {
    bound_port_ = srv.bind_to_any_port(config_.host);
  } else {
    bound_port_ = srv.bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (bound_port_ <= 0) {
    server_.reset();
    throw std::runtime_error("service: cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound_port_;
}

void OracleService::wait() {
  if (thread_.joinable()) thread_.join();
}

void OracleService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

std::string OracleService::url() const {
  const auto host = config_.host == "0.0.0.0" ? std::string("127.0.0.1") : config_.host;
  return "http://" + host + ":" + std::to_string(bound_port_);
}

}  // namespace ideal
