#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bsnlr/io.hpp"

namespace bsnlr::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Comma-separated fields; a field wrapped in double quotes may contain commas
// and "" for a literal quote.
std::vector<std::string> split_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"' && trim(field).empty()) {
      quoted = true;
      was_quoted = true;
      field.clear();
    } else if (c == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw IoError("line " + std::to_string(lineno) + ": unterminated quoted field");
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("column '" + std::string(name) + "' not found in CSV header");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows.at(row).at(col);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw IoError("data row " + std::to_string(row + 1) + ", column '" + header.at(col) + "': '" + s +
                  "' is not a number");
  return v;
}

std::vector<double> CsvTable::numeric_column(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<double> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = number(r, c);
  return out;
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    auto fields = split_line(line, lineno);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw IoError("CSV input has no header row");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv(in);
}

model::Dataset dataset_from_csv(const CsvTable& table, const std::string& response,
                                const std::vector<std::string>& covariates, bool log_response) {
  model::Dataset d;
  const auto n = static_cast<Eigen::Index>(table.rows_count());
  const auto yv = table.numeric_column(response);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = yv[static_cast<std::size_t>(i)];
    if (log_response) {
      if (!(v > 0.0))
        throw IoError("data row " + std::to_string(i + 1) + ": response must be positive for --log-response");
      v = std::log(v);
    }
    d.y(i) = v;
  }
  d.x.resize(n, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto col = table.numeric_column(covariates[j]);
    for (Eigen::Index i = 0; i < n; ++i) d.x(i, static_cast<Eigen::Index>(j)) = col[static_cast<std::size_t>(i)];
  }
  d.names = covariates;
  d.validate();
  return d;
}

}  // namespace bsnlr::io
