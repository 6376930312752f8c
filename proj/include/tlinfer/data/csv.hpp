#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tlinfer/data/dataset.hpp"
#include "tlinfer/stl/trace.hpp"

namespace tlinfer::data {

/// Malformed CSV input; the message names the line or trace at fault.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line, const char* what) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(v)) {
    throw CsvError("line " + std::to_string(line) + ": invalid " + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline std::string shortest(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct Row {
  double time;
  std::vector<double> values;
  double label;
};

}  // namespace detail

/// Parses CSV text with header `trace_id,time,<features...>,label`.
///
/// Rows are grouped by trace id in order of first appearance and sorted by
/// time. Timestamps must be uniformly spaced within each trace and are then
/// discarded. Labels must be constant per trace; the dataset is binary when
/// every label is +1 or -1, continuous otherwise.
inline Dataset parse_csv(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (in.eof() && line.find_first_not_of(" \t\r") == std::string::npos) {
    throw CsvError(source + ": empty file");
  }
  const auto header = detail::split_fields(line);
  if (header.size() < 4 || header.front() != "trace_id" || header[1] != "time") {
    throw CsvError(source + ": header must start with 'trace_id,time'");
  }
  if (header.back() != "label") throw CsvError(source + ": missing label column");
  Dataset ds;
  for (std::size_t k = 2; k + 1 < header.size(); ++k) {
    if (header[k].empty()) throw CsvError(source + ": empty feature name in header");
    ds.feature_names.emplace_back(header[k]);
  }
  const std::size_t d = ds.feature_names.size();

  std::vector<std::string> order;
  std::map<std::string, std::vector<detail::Row>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != header.size()) {
      throw CsvError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                     " fields, found " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw CsvError("line " + std::to_string(lineno) + ": empty trace_id");
    detail::Row r;
    r.time = detail::parse_double(f[1], lineno, "time");
    for (std::size_t k = 0; k < d; ++k) r.values.push_back(detail::parse_double(f[2 + k], lineno, "value"));
    r.label = detail::parse_double(f.back(), lineno, "label");
    std::string id(f[0]);
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(std::move(r));
  }
  if (order.empty()) throw CsvError(source + ": no data rows");

  bool binary = true;
  for (const auto& id : order) {
    auto& rs = rows[id];
    std::stable_sort(rs.begin(), rs.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    if (rs.size() >= 2) {
      const double step = rs[1].time - rs[0].time;
      for (std::size_t i = 1; i < rs.size(); ++i) {
        const double gap = rs[i].time - rs[i - 1].time;
        if (!(step > 0.0) || std::abs(gap - step) > 1e-9 * std::max(1.0, std::abs(step))) {
          throw CsvError("trace '" + id + "': non-uniform timestamps");
        }
      }
    }
    std::vector<double> values;
    for (const auto& r : rs) {
      if (r.label != rs.front().label) throw CsvError("trace '" + id + "': label changes within the trace");
      values.insert(values.end(), r.values.begin(), r.values.end());
    }
    const double label = rs.front().label;
    binary = binary && (label == 1.0 || label == -1.0);
    ds.traces.emplace_back(id, d, std::move(values), label);
  }
  ds.label_kind = binary ? LabelKind::Binary : LabelKind::Continuous;
  ds.provenance = source;
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot read '" + path + "'");
  return parse_csv(in, path);
}

/// Writes one row per (trace, step) with integer times 0, 1, 2, ...
inline void write_csv(std::ostream& out, const Dataset& ds) {
  out << "trace_id,time";
  for (const auto& n : ds.feature_names) out << ',' << n;
  out << ",label\n";
  for (const auto& tr : ds.traces) {
    const std::string label = detail::shortest(tr.label());
    for (std::size_t t = 0; t < tr.length(); ++t) {
      out << tr.id() << ',' << t;
      for (std::size_t k = 0; k < tr.dim(); ++k) out << ',' << detail::shortest(tr.at(t, k));
      out << ',' << label << '\n';
    }
  }
}

inline std::string to_csv(const Dataset& ds) {
  std::ostringstream s;
  write_csv(s, ds);
  return s.str();
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  write_csv(out, ds);
  if (!out) throw CsvError("write failed for '" + path + "'");
}

}  // namespace tlinfer::data
