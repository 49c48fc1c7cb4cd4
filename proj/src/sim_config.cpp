// Flat TOML subset: scalars, strings, booleans and one-line arrays of numbers
// or strings. No inline tables, dates or multi-line values.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "bsnlr/io.hpp"

namespace bsnlr::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t lineno, const std::string& what) {
  throw IoError("config line " + std::to_string(lineno) + ": " + what);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::string clean;
  for (char c : s)
    if (c != '_') clean += c;
  if (clean.empty()) return false;
  const auto [ptr, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), out);
  return ec == std::errc() && ptr == clean.data() + clean.size();
}

bool parse_string(std::string_view s, std::string& out, std::size_t lineno) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return false;
  out.clear();
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\') {
      if (i + 2 >= s.size()) fail(lineno, "dangling escape");
      const char c = s[++i];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(lineno, std::string("unsupported escape \\") + c);
      }
    } else if (s[i] == '"') {
      fail(lineno, "unexpected quote in string");
    } else {
      out += s[i];
    }
  }
  return true;
}

std::vector<std::string_view> split_array(std::string_view body) {
  std::vector<std::string_view> items;
  bool in_str = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '"' && (i == 0 || body[i - 1] != '\\')) in_str = !in_str;
    if (body[i] == ',' && !in_str) {
      items.push_back(trim(body.substr(start, i - start)));
      start = i + 1;
    }
  }
  const auto last = trim(body.substr(start));
  if (!last.empty()) items.push_back(last);  // trailing comma allowed
  return items;
}

ConfigValue parse_value(std::string_view raw, std::size_t lineno) {
  const auto v = trim(raw);
  if (v.empty()) fail(lineno, "missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  std::string str;
  if (v.front() == '"') {
    if (!parse_string(v, str, lineno)) fail(lineno, "bad string value");
    return str;
  }
  if (v.front() == '[') {
    if (v.back() != ']') fail(lineno, "unterminated array");
    const auto items = split_array(v.substr(1, v.size() - 2));
    if (items.empty()) return std::vector<double>{};
    if (items.front().front() == '"') {
      std::vector<std::string> out;
      for (auto it : items) {
        if (!parse_string(it, str, lineno)) fail(lineno, "mixed or malformed string array");
        out.push_back(str);
      }
      return out;
    }
    std::vector<double> out;
    for (auto it : items) {
      double d = 0.0;
      if (!parse_number(it, d)) fail(lineno, "bad array element '" + std::string(it) + "'");
      out.push_back(d);
    }
    return out;
  }
  double d = 0.0;
  if (!parse_number(v, d)) fail(lineno, "cannot parse value '" + std::string(v) + "'");
  return d;
}

template <class T>
const T* get(const ConfigMap& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return nullptr;
  const T* v = std::get_if<T>(&it->second);
  if (!v) throw IoError("config key '" + key + "' has the wrong type");
  return v;
}

double need_number(const ConfigMap& cfg, const std::string& key) {
  const double* v = get<double>(cfg, key);
  if (!v) throw IoError("config key '" + key + "' is required");
  return *v;
}

long long as_integer(double v, const std::string& key) {
  if (!std::isfinite(v) || v != std::floor(v) || std::fabs(v) > 9.0e15)
    throw IoError("config key '" + key + "' must be an integer");
  return static_cast<long long>(v);
}

std::vector<std::string> string_list(const ConfigMap& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return {};
  if (const auto* v = std::get_if<std::vector<std::string>>(&it->second)) return *v;
  if (const auto* v = std::get_if<std::string>(&it->second)) {
    // "a,b,c" is accepted too.
    std::vector<std::string> out;
    std::string_view s = *v;
    while (!s.empty()) {
      const auto comma = s.find(',');
      const auto item = trim(s.substr(0, comma));
      if (!item.empty()) out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
    }
    return out;
  }
  // An empty array parses as a number list.
  if (const auto* v = std::get_if<std::vector<double>>(&it->second); v && v->empty()) return {};
  throw IoError("config key '" + key + "' must be a list of names");
}

}  // namespace

ConfigMap parse_config(std::string_view text) {
  ConfigMap out;
  std::string section;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) fail(lineno, "bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(lineno, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(lineno, "empty key");
    for (char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
        fail(lineno, "bad key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (out.count(full)) fail(lineno, "duplicate key '" + full + "'");
    out.emplace(full, parse_value(line.substr(eq + 1), lineno));
  }
  return out;
}

mc::SimConfig sim_config_from(const ConfigMap& cfg) {
  static const char* const known[] = {"model", "params", "covariates", "builtin", "dims", "beta", "alpha",
                                      "n", "reps", "seed", "max_iter", "label"};
  for (const auto& [k, v] : cfg) {
    bool ok = false;
    for (const char* q : known) ok = ok || k == q;
    if (!ok) throw IoError("unknown config key '" + k + "'");
  }

  const auto* text = get<std::string>(cfg, "model");
  const auto* bname = get<std::string>(cfg, "builtin");
  if (!!text == !!bname) throw IoError("config needs exactly one of 'model' and 'builtin'");

  std::optional<model::MeanModel> m;
  try {
    if (text) {
      m.emplace(*text, string_list(cfg, "params"), string_list(cfg, "covariates"));
    } else {
      int dims = 2;
      if (const auto* d = get<double>(cfg, "dims")) dims = static_cast<int>(as_integer(*d, "dims"));
      m.emplace(model::builtin(model::builtin_from_name(*bname), dims));
    }
  } catch (const model::ParseError& e) {
    throw IoError(std::string("config model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("config model: ") + e.what());
  }

  const auto* beta = get<std::vector<double>>(cfg, "beta");
  if (!beta) throw IoError("config key 'beta' is required");
  const auto* ns = get<std::vector<double>>(cfg, "n");
  if (!ns) throw IoError("config key 'n' is required");

  mc::SimConfig c{*m, Eigen::Map<const Eigen::VectorXd>(beta->data(), static_cast<Eigen::Index>(beta->size())),
                  need_number(cfg, "alpha"), {}, 1000, 1, 200, {}};
  for (double v : *ns) c.n_grid.push_back(static_cast<int>(as_integer(v, "n")));
  if (const auto* v = get<double>(cfg, "reps")) c.reps = static_cast<int>(as_integer(*v, "reps"));
  if (const auto* v = get<double>(cfg, "seed")) {
    const auto s = as_integer(*v, "seed");
    if (s < 0) throw IoError("config key 'seed' must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (const auto* v = get<double>(cfg, "max_iter")) c.max_iter = static_cast<int>(as_integer(*v, "max_iter"));
  if (const auto* v = get<std::string>(cfg, "label")) c.label = *v;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  return c;
}

}  // namespace bsnlr::io
