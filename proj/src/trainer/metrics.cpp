#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ideal/trainer.hpp"

namespace ideal {

namespace {

std::string format(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string metrics_csv_header() { return "epoch,l_ce,l_info,l_gen,l_md,queries_used,test_acc,seconds"; }

std::string metrics_csv_row(const EpochRecord& r) {
  std::string row = std::to_string(r.epoch);
  row += "," + format("%.9g", r.l_ce);
  row += "," + format("%.9g", r.l_info);
  row += "," + format("%.9g", r.l_gen);
  row += "," + format("%.9g", r.l_md);
  row += "," + std::to_string(r.queries_used);
  row += "," + (r.test_acc ? format("%.6f", *r.test_acc) : std::string());
  row += "," + format("%.3f", r.seconds);
  return row;
}

MetricsCsvWriter::MetricsCsvWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open metrics file '" + path + "'");
  out_ << metrics_csv_header() << '\n' << std::flush;
}

void MetricsCsvWriter::append(const EpochRecord& record) {
  out_ << metrics_csv_row(record) << '\n' << std::flush;
  if (!out_) throw std::runtime_error("failed writing metrics file '" + path_ + "'");
}

RunMetrics read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw std::runtime_error(path + ": unexpected metrics header");
  }
  RunMetrics out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 7 && !line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw std::runtime_error(path + ": malformed metrics row '" + line + "'");
    EpochRecord r;
    r.epoch = std::stoll(cells[0]);
    r.l_ce = std::stod(cells[1]);
    r.l_info = std::stod(cells[2]);
    r.l_gen = std::stod(cells[3]);
    r.l_md = std::stod(cells[4]);
    r.queries_used = std::stoull(cells[5]);
    if (!cells[6].empty()) r.test_acc = std::stod(cells[6]);
    r.seconds = cells[7].empty() ? 0.0 : std::stod(cells[7]);
    out.push_back(r);
  }
  return out;
}

}  // namespace ideal
