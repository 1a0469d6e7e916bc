#pragma once

// Metrics CSV. Column order is kMetricsColumns; reals use 17 significant
// digits, integers are exact, undefined values are empty fields, failure is 0/1.

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cohortsim/diagnostics.hpp"
#include "cohortsim/errors.hpp"
#include "cohortsim/text_format.hpp"

namespace cohortsim {

inline std::string metrics_header() {
  std::string h;
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) {
    if (i) h += ',';
    h += kMetricsColumns[i];
  }
  return h;
}

inline void write_metrics_csv(std::ostream& os, std::span<const RoundMetrics> rows) {
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  os << metrics_header() << '\n';
  for (const auto& m : rows) {
    os << m.round << ',' << m.cohort_size << ',' << opt(m.train_loss) << ',' << opt(m.train_acc) << ','
       << opt(m.test_loss) << ',' << opt(m.test_acc) << ',' << opt(m.pg_norm) << ',' << opt(m.pg_norm_predicted) << ','
       << opt(m.cosine_avg) << ',' << opt(m.clip_fraction) << ',' << opt(m.clip_level) << ','
       << format_double(m.lr_server) << ',' << m.examples_round << ',' << m.examples_cum << ','
       << format_double(m.runtime_round) << ',' << format_double(m.runtime_cum) << ',' << (m.failure ? 1 : 0) << '\n';
  }
}

inline std::string metrics_csv_string(std::span<const RoundMetrics> rows) {
  std::ostringstream os;
  write_metrics_csv(os, rows);
  return os.str();
}

inline std::vector<RoundMetrics> read_metrics_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != metrics_header())
    throw DatasetFormatError(1, "metrics CSV header does not match the expected columns");
  std::vector<RoundMetrics> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != kMetricsColumns.size())
      throw DatasetFormatError(lineno, "expected " + std::to_string(kMetricsColumns.size()) + " fields");
    const auto real = [&](std::size_t i) {
      auto v = parse_double(f[i]);
      if (!v) throw DatasetFormatError(lineno, "bad value in column " + std::string(kMetricsColumns[i]));
      return *v;
    };
    const auto opt = [&](std::size_t i) -> std::optional<double> {
      if (f[i].empty()) return std::nullopt;
      return real(i);
    };
    const auto integer = [&](std::size_t i) {
      auto v = parse_int<std::int64_t>(f[i]);
      if (!v) throw DatasetFormatError(lineno, "bad integer in column " + std::string(kMetricsColumns[i]));
      return *v;
    };
    RoundMetrics m;
    m.round = integer(0);
    m.cohort_size = static_cast<std::size_t>(integer(1));
    m.train_loss = opt(2);
    m.train_acc = opt(3);
    m.test_loss = opt(4);
    m.test_acc = opt(5);
    m.pg_norm = opt(6);
    m.pg_norm_predicted = opt(7);
    m.cosine_avg = opt(8);
    m.clip_fraction = opt(9);
    m.clip_level = opt(10);
    m.lr_server = real(11);
    m.examples_round = static_cast<std::uint64_t>(integer(12));
    m.examples_cum = static_cast<std::uint64_t>(integer(13));
    m.runtime_round = real(14);
    m.runtime_cum = real(15);
    m.failure = integer(16) != 0;
    rows.push_back(m);
  }
  return rows;
}

inline std::vector<RoundMetrics> load_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open metrics file '" + path + "'");
  return read_metrics_csv(is);
}

inline void save_metrics_csv(const std::string& path, std::span<const RoundMetrics> rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_metrics_csv(os, rows);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace cohortsim
