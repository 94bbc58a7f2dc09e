#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "ideal/models.hpp"
#include "ideal/oracle.hpp"
#include "ideal/wire.hpp"

namespace httplib {
class Server;
}

namespace ideal {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::filesystem::path weights_path;
  std::map<std::string, std::uint64_t> budgets;  // api key -> Q
  /// Defaults to the teacher's input shape.
  std::optional<ImageShape> expected_input;
  std::optional<std::filesystem::path> usage_log;
  std::int64_t max_batch = wire::kMaxBatch;
};

/// Parses "HOST:PORT" (or ":PORT") into the config's host and port.
void parse_bind_address(std::string_view text, ServiceConfig& config);

class UsageLog;

/// Metered hard-label prediction service.
///
/// Each api key has its own ledger. A charge is keyed by (api key, request
/// id) together with a digest of the request body: repeating the same request
/// id with the same body returns the labels again without charging, reusing
/// it with a different body is rejected. Charges are appended to the usage
/// log (api keys stored as SHA-256 digests) and replayed at startup.
class OracleService {
 public:
  struct Reply {
    int status;
    std::string body;
  };

  /// Loads the teacher from config.weights_path.
  explicit OracleService(ServiceConfig config);
  OracleService(Classifier teacher, ServiceConfig config);
  ~OracleService();
  OracleService(const OracleService&) = delete;
  OracleService& operator=(const OracleService&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();
  [[nodiscard]] std::string url() const;

  Reply handle_predict(const std::string& api_key, const std::string& request_id, std::string_view body);
  Reply handle_budget(const std::string& api_key) const;

  [[nodiscard]] std::uint64_t used(const std::string& api_key) const;
  [[nodiscard]] std::uint64_t remaining(const std::string& api_key) const;

 private:
  struct ChargeRecord {
    std::string body_digest;
  };

  Classifier teacher_;
  ServiceConfig config_;
  ImageShape expected_;
  std::map<std::string, std::unique_ptr<QueryLedger>> ledgers_;
  std::map<std::pair<std::string, std::string>, ChargeRecord> charges_;
  std::unique_ptr<UsageLog> log_;
  mutable std::mutex mutex_;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int bound_port_ = 0;
};

}  // namespace ideal
