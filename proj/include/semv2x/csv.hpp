#pragma once

#include <cstdio>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semv2x {

/// printf("%.*g") with `digits` significant digits.
inline std::string fmt_sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// Minimal CSV writer; fields are written verbatim (callers never emit
/// commas or quotes inside a field).
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { line(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::logic_error("csv row has wrong column count");
    line(fields);
  }

  std::string str() const { return out_.str(); }

 private:
  void line(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream out_;
};

/// Splits CSV text into rows of fields (no quoting support).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace semv2x
