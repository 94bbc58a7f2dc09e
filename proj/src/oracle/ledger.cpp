#include "ideal/oracle.hpp"

namespace ideal {

BudgetExhausted::BudgetExhausted(std::uint64_t requested, std::uint64_t remaining)
    : OracleError("query budget exhausted: requested " + std::to_string(requested) + ", remaining " +
                  std::to_string(remaining)),
      requested_(requested),
      remaining_(remaining) {}

QueryLedger::QueryLedger(std::uint64_t budget, std::uint64_t used) : budget_(budget), used_(used) {
  if (used > budget) {
    throw std::invalid_argument("QueryLedger: used " + std::to_string(used) + " exceeds budget " +
                                std::to_string(budget));
  }
}

std::uint64_t QueryLedger::charge(std::uint64_t n) {
  std::lock_guard lock(mutex_);
  const auto left = budget_ - used_;
  if (n > left) throw BudgetExhausted(n, left);
  used_ += n;
  return budget_ - used_;
}

void QueryLedger::refund(std::uint64_t n) {
  std::lock_guard lock(mutex_);
  if (n > used_) throw std::logic_error("QueryLedger::refund: more than was charged");
  used_ -= n;
}

std::uint64_t QueryLedger::used() const {
  std::lock_guard lock(mutex_);
  return used_;
}

std::uint64_t QueryLedger::remaining() const {
  std::lock_guard lock(mutex_);
  return budget_ - used_;
}

}  // namespace ideal
