#ifndef DTUQ_APP_IO_HPP
#define DTUQ_APP_IO_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dtuq/error.hpp"
#include "dtuq/format.hpp"
#include "dtuq/model.hpp"

namespace dtuq::app {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

// Locale-independent; accepts an optional leading '+'.
inline std::optional<double> parse_real(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/**
 * Reads one numeric column of a CSV file. A first row that does not parse
 * as numbers is taken as a header; `column` then selects by name, otherwise
 * the first column is used. Blank lines are skipped.
 */
inline std::vector<double> read_numeric_column(const std::filesystem::path& path, const std::optional<std::string>& column = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  std::size_t col = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = detail::trim(line);
    if (row.empty()) continue;
    const auto cells = detail::split_commas(row);
    if (first) {
      first = false;
      if (!detail::parse_real(cells.front())) {
        if (column) {
          auto it = std::find(cells.begin(), cells.end(), std::string_view(*column));
          if (it == cells.end()) throw ConfigError(path.string() + ": no column named '" + *column + "' in header");
          col = static_cast<std::size_t>(it - cells.begin());
        }
        continue;
      }
      if (column) throw ConfigError(path.string() + ": column '" + *column + "' requested but the file has no header");
    }
    if (col >= cells.size())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": row has " + std::to_string(cells.size()) +
                        " fields, expected at least " + std::to_string(col + 1));
    const auto v = detail::parse_real(cells[col]);
    if (!v) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": malformed number '" + std::string(cells[col]) + "'");
    if (!std::isfinite(*v)) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
    values.push_back(*v);
  }
  return values;
}

inline ObservationSample ingest_csv(const std::filesystem::path& path, const std::optional<std::string>& column = {}) {
  return ObservationSample(read_numeric_column(path, column));
}

/// Comma-separated table with a mandatory header; reals at 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvTable& add(double v) { return add_text(format_real(v)); }
  CsvTable& add(std::size_t v) { return add_text(std::to_string(v)); }
  CsvTable& add(int v) { return add_text(std::to_string(v)); }
  CsvTable& add(bool v) { return add_text(v ? "1" : "0"); }
  CsvTable& add(const std::string& v) { return add_text(v); }
  CsvTable& add(const char* v) { return add_text(v); }

  void write(std::ostream& out) const {
    write_line(out, header_);
    for (const auto& r : rows_) write_line(out, r);
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

 private:
  CsvTable& add_text(std::string cell) {
    if (rows_.empty()) rows_.emplace_back();
    if (rows_.back().size() >= header_.size()) throw std::logic_error("csv row wider than header");
    rows_.back().push_back(std::move(cell));
    return *this;
  }

  static std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string q = "\"";
    for (char c : cell) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << quote(cells[i]);
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes text to `path` ("-" means stdout), binary mode so lines end in LF.
inline void write_text(const std::string& path, const std::string& content, std::ostream& stdout_stream) {
  if (path == "-") {
    stdout_stream << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file '" + path + "' for writing");
  out << content;
  if (!out) throw ConfigError("failed writing output file '" + path + "'");
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_IO_HPP
