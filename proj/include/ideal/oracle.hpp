#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "ideal/models.hpp"
#include "ideal/tensor.hpp"

namespace ideal {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The request would take the ledger past its budget. Nothing was charged.
class BudgetExhausted : public OracleError {
 public:
  BudgetExhausted(std::uint64_t requested, std::uint64_t remaining);
  [[nodiscard]] std::uint64_t requested() const { return requested_; }
  [[nodiscard]] std::uint64_t remaining() const { return remaining_; }

 private:
  std::uint64_t requested_;
  std::uint64_t remaining_;
};

/// Connection failures and server-side faults that survived the retries.
class TransportError : public OracleError {
 public:
  using OracleError::OracleError;
};

class AuthorizationError : public OracleError {
 public:
  using OracleError::OracleError;
};

/// Malformed request or response payloads.
class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

/// Query budget with a monotone usage counter. Thread-safe; every charge is
/// all-or-nothing.
class QueryLedger {
 public:
  explicit QueryLedger(std::uint64_t budget, std::uint64_t used = 0);

  /// Charges `n` if it fits, otherwise throws BudgetExhausted and leaves the
  /// ledger unchanged. Returns the remaining budget after the charge.
  std::uint64_t charge(std::uint64_t n);
  /// Returns a prior charge (used only when an already-charged request fails
  /// before producing labels).
  void refund(std::uint64_t n);

  [[nodiscard]] std::uint64_t budget() const { return budget_; }
  [[nodiscard]] std::uint64_t used() const;
  [[nodiscard]] std::uint64_t remaining() const;

 private:
  const std::uint64_t budget_;
  mutable std::mutex mutex_;
  std::uint64_t used_;
};

/// Hard-label black box: images in, top-1 class indices out. There is
/// deliberately no way to obtain scores through this interface.
class HardLabelOracle {
 public:
  virtual ~HardLabelOracle() = default;

  /// images: (B, channels, H, W). Charges exactly B queries on success.
  virtual std::vector<std::int64_t> query(const Tensor& images) = 0;
  [[nodiscard]] virtual std::uint64_t remaining() const = 0;
  /// Queries charged through this handle.
  [[nodiscard]] virtual std::uint64_t used() const = 0;
};

/// Per-row argmax of teacher.predict, ties to the lowest index. Records no tape.
std::vector<std::int64_t> hard_labels(const Classifier& teacher, const Tensor& images);

class LocalOracle final : public HardLabelOracle {
 public:
  LocalOracle(Classifier teacher, std::uint64_t budget);

  std::vector<std::int64_t> query(const Tensor& images) override;
  [[nodiscard]] std::uint64_t remaining() const override { return ledger_.remaining(); }
  [[nodiscard]] std::uint64_t used() const override { return ledger_.used(); }

 private:
  Classifier teacher_;
  QueryLedger ledger_;
};

struct HttpOracleOptions {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::seconds timeout{60};
};

std::unique_ptr<HardLabelOracle> make_local_oracle(const std::filesystem::path& teacher_weights,
                                                   std::uint64_t budget);
/// `endpoint_url` like "http://127.0.0.1:8080". The server's ledger is
/// authoritative; the client reads the remaining budget at construction and
/// mirrors it from each response.
std::unique_ptr<HardLabelOracle> make_http_oracle(const std::string& endpoint_url, const std::string& api_key,
                                                  HttpOracleOptions options = {});

}  // namespace ideal
