#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace ideal {

std::string sha256_hex(std::string_view bytes);

/// Append-only record of charges, one tab-separated line each:
///   charge <sha256(api key)> <count> <request id> <sha256(body)>
class UsageLog {
 public:
  struct Entry {
    std::string key_digest;
    std::uint64_t count;
    std::string request_id;
    std::string body_digest;
  };

  explicit UsageLog(std::filesystem::path path);

  /// Entries written so far (by this or earlier processes).
  [[nodiscard]] std::vector<Entry> replay() const;
  void append(const Entry& entry);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace ideal
