#pragma once

#include "rkopt/error.hpp"
#include "rkopt/harness/text.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rkopt::harness {

inline constexpr std::string_view kMetricsSchemaLine = "# rkopt-metrics v1";
inline constexpr std::string_view kMetricsHeader =
    "step,wall_ms,train_loss,test_loss,train_acc,test_acc,lr_effective,grad_norm,grad_evals_cum";

/// One telemetry row.
struct MetricsRecord {
  std::uint64_t step = 0;
  double wall_ms = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double lr_effective = 0.0;
  double grad_norm = 0.0;
  std::uint64_t grad_evals_cum = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline void write_metrics_header(std::ostream& out) {
  out << kMetricsSchemaLine << '\n' << kMetricsHeader << '\n';
}

inline std::string format_metrics_row(const MetricsRecord& r) {
  using text::format_double;
  return std::to_string(r.step) + ',' + format_double(r.wall_ms) + ',' + format_double(r.train_loss) + ',' +
         format_double(r.test_loss) + ',' + format_double(r.train_acc) + ',' + format_double(r.test_acc) + ',' +
         format_double(r.lr_effective) + ',' + format_double(r.grad_norm) + ',' + std::to_string(r.grad_evals_cum);
}

inline MetricsRecord parse_metrics_row(std::string_view line) {
  const auto f = text::split(line, ',');
  if (f.size() != 9) throw ParseError(ParseErrorKind::truncated, "metrics row needs 9 columns: " + std::string(line));
  MetricsRecord r;
  try {
    r.step = text::parse_uint(f[0], "step");
    r.wall_ms = text::parse_double(f[1], "wall_ms");
    r.train_loss = text::parse_double(f[2], "train_loss");
    r.test_loss = text::parse_double(f[3], "test_loss");
    r.train_acc = text::parse_double(f[4], "train_acc");
    r.test_acc = text::parse_double(f[5], "test_acc");
    r.lr_effective = text::parse_double(f[6], "lr_effective");
    r.grad_norm = text::parse_double(f[7], "grad_norm");
    r.grad_evals_cum = text::parse_uint(f[8], "grad_evals_cum");
  } catch (const ConfigError& e) {
    throw ParseError(ParseErrorKind::truncated, e.what());
  }
  return r;
}

inline std::vector<MetricsRecord> read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kMetricsSchemaLine) {
    throw ParseError(ParseErrorKind::bad_magic, "missing '# rkopt-metrics v1' schema line");
  }
  if (!std::getline(in, line) || text::trim(line) != kMetricsHeader) {
    throw ParseError(ParseErrorKind::bad_magic, "unexpected metrics header");
  }
  std::vector<MetricsRecord> rows;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

inline std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  return read_metrics(in);
}

}  // namespace rkopt::harness
