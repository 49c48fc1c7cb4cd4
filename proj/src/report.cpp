#include <cmath>
#include <iomanip>
#include <ostream>

#include "bsnlr/io.hpp"

namespace bsnlr::io {

namespace {

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

nlohmann::json to_json(const mc::SimReport& report) {
  using nlohmann::json;
  json j;
  j["schema"] = kSimSchema;
  j["label"] = report.label;
  j["model"] = report.model_text;
  j["parameters"] = report.parameters;
  j["truth"] = std::vector<double>(report.truth.data(), report.truth.data() + report.truth.size());
  j["seed"] = report.seed;
  j["reps"] = report.reps;
  j["start_values"] = "true parameters";
  j["sizes"] = json::array();
  for (const auto& s : report.sizes)
    j["sizes"].push_back({{"n", s.n},
                          {"converged", s.converged},
                          {"failed", s.failed},
                          {"bfgs_fallbacks", s.bfgs_fallbacks},
                          {"alpha_tilde_nonpositive", s.alpha_tilde_nonpositive}});
  j["cells"] = json::array();
  for (const auto& c : report.cells)
    j["cells"].push_back({{"n", c.n},
                          {"parameter", c.parameter},
                          {"estimator", mc::estimator_name(c.estimator)},
                          {"truth", c.stats.truth},
                          {"mean", c.stats.mean},
                          {"bias", c.stats.bias},
                          {"relative_bias", number_or_null(c.stats.relative_bias)},
                          {"relative_defined", c.stats.relative_defined},
                          {"rmse", c.stats.rmse}});
  return j;
}

void write_csv(std::ostream& out, const std::vector<mc::SimReport>& reports) {
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(17);
  for (const auto& r : reports) {
    out << "# label: " << r.label << "\n";
    out << "# model: " << r.model_text << "\n";
    out << "# truth:";
    for (std::size_t k = 0; k < r.parameters.size(); ++k)
      out << ' ' << r.parameters[k] << '=' << r.truth(static_cast<Eigen::Index>(k));
    out << "\n# seed: " << r.seed << "\n# reps: " << r.reps << "\n";
    out << "# start values: true parameters\n";
  }
  out << "alpha,n,parameter,estimator,truth,mean,relative_bias,rmse,converged,failed\n";
  for (const auto& r : reports) {
    const double alpha = r.truth(r.truth.size() - 1);
    for (const auto& c : r.cells) {
      const mc::SampleSizeInfo* info = nullptr;
      for (const auto& s : r.sizes)
        if (s.n == c.n) info = &s;
      out << alpha << ',' << c.n << ',' << c.parameter << ',' << mc::estimator_name(c.estimator) << ','
          << c.stats.truth << ',' << c.stats.mean << ',';
      // zero truth: relative bias undefined, mean - truth is still recoverable
      if (c.stats.relative_defined)
        out << c.stats.relative_bias;
      else
        out << "nan";
      out << ',' << c.stats.rmse << ',' << (info ? info->converged : 0) << ',' << (info ? info->failed : 0)
          << "\n";
    }
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

}  // namespace bsnlr::io
