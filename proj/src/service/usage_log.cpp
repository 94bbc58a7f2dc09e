#include "usage_log.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ideal {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kDigits[md[i] >> 4]);
    hex.push_back(kDigits[md[i] & 0xF]);
  }
  return hex;
}

UsageLog::UsageLog(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open usage log '" + path_.string() + "'");
}

std::vector<UsageLog::Entry> UsageLog::replay() const {
  std::ifstream in(path_);
  std::vector<Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    Entry e;
    if (!(fields >> tag >> e.key_digest >> e.count >> e.request_id >> e.body_digest) || tag != "charge") {
      // A crash mid-write can only damage the final line.
      if (in.peek() == EOF) break;
      throw std::runtime_error(path_.string() + ":" + std::to_string(lineno) + ": malformed usage log line");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void UsageLog::append(const Entry& entry) {
  out_ << "charge\t" << entry.key_digest << '\t' << entry.count << '\t' << entry.request_id << '\t'
       << entry.body_digest << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("failed writing usage log '" + path_.string() + "'");
}

}  // namespace ideal
