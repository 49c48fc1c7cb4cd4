#pragma once

// CSV tables, flat key = value study configs and report serialisation.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bsnlr/mc.hpp"
#include "bsnlr/model.hpp"

namespace bsnlr::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header row required. Blank lines and lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t rows_count() const { return rows.size(); }
  /// Throws IoError naming the column when it is absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  /// Numeric value; throws IoError with line context when not a number.
  double number(std::size_t row, std::size_t col) const;
  std::vector<double> numeric_column(std::string_view name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Builds a dataset from `table`: y from `response` (log-transformed when
/// `log_response`), x from `covariates` in the given order.
model::Dataset dataset_from_csv(const CsvTable& table, const std::string& response,
                                const std::vector<std::string>& covariates, bool log_response);

/// Values accepted in a study config: `key = 1.5`, `key = "text"`,
/// `key = true`, `key = [1, 2]`, `key = ["a", "b"]`. `[section]` headers
/// prefix the following keys with "section.". '#' starts a comment.
using ConfigValue = std::variant<double, std::string, bool, std::vector<double>, std::vector<std::string>>;
using ConfigMap = std::map<std::string, ConfigValue>;

ConfigMap parse_config(std::string_view text);

/// Study from a parsed config. Keys: model + params + covariates, or
/// builtin (+ dims); beta; alpha; n; reps; seed; max_iter; label.
mc::SimConfig sim_config_from(const ConfigMap& cfg);

inline constexpr const char* kSimSchema = "bsnlr.simreport/1";
inline constexpr const char* kFitSchema = "bsnlr.fit/1";

nlohmann::json to_json(const mc::SimReport& report);
/// One row per (alpha, n, parameter, estimator); '#' header lines echo the
/// configuration.
void write_csv(std::ostream& out, const std::vector<mc::SimReport>& reports);

}  // namespace bsnlr::io
