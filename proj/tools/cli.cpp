#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsnlr/bias.hpp"
#include "bsnlr/estimate.hpp"
#include "bsnlr/io.hpp"
#include "bsnlr/mc.hpp"
#include "bsnlr/model.hpp"

namespace bsnlr::cli {

namespace {

using nlohmann::json;

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json nullable(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json nullable(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(nullable(v(i)));
  return a;
}

struct Prepared {
  model::MeanModel model;
  model::Dataset data;
};

// Covariates are the CSV columns the model actually references, in header
// order. Unused columns may hold anything, including text.
Prepared prepare(const FitArgs& a) {
  const auto table = io::read_csv(a.data);
  table.column(a.response);

  std::vector<std::string> candidates;
  for (const auto& h : table.header)
    if (h != a.response && is_identifier(h) && std::find(a.params.begin(), a.params.end(), h) == a.params.end())
      candidates.push_back(h);

  std::optional<model::MeanModel> full;
  try {
    full.emplace(a.model, a.params, candidates);
  } catch (const model::ParseError& e) {
    if (e.kind() == model::ParseError::Kind::UnknownIdentifier) {
      std::size_t end = e.position();
      while (end < a.model.size() && (std::isalnum(static_cast<unsigned char>(a.model[end])) || a.model[end] == '_'))
        ++end;
      const std::string name = a.model.substr(e.position(), end - e.position());
      if (!name.empty() && a.model.find('(', end) != end)
        throw io::IoError("model references '" + name + "', which is neither a parameter nor a column of " + a.data);
    }
    throw io::IoError(std::string("model: ") + e.what());
  }

  std::vector<bool> used(candidates.size(), false);
  for (const auto& node : full->expr().nodes())
    if (node.op == model::Op::Covariate) used[static_cast<std::size_t>(node.index)] = true;
  std::vector<std::string> covariates;
  for (std::size_t k = 0; k < candidates.size(); ++k)
    if (used[k]) covariates.push_back(candidates[k]);

  Prepared p{model::MeanModel(a.model, a.params, covariates), {}};
  p.data = io::dataset_from_csv(table, a.response, covariates, a.log_response);
  return p;
}

estimate::FitConfig fit_config(const FitArgs& a, const model::MeanModel& m) {
  estimate::FitConfig fc;
  fc.max_iter = a.max_iter;
  if (!a.start.empty()) {
    if (a.start.size() != m.p())
      throw io::IoError("--start has " + std::to_string(a.start.size()) + " values for " + std::to_string(m.p()) +
                        " parameters");
    fc.start_beta = Eigen::Map<const Eigen::VectorXd>(a.start.data(), static_cast<Eigen::Index>(a.start.size()));
  } else if (!m.affine()) {
    throw io::IoError("--start is required for models that are nonlinear in the parameters");
  }
  if (a.start_alpha) {
    if (!(*a.start_alpha > 0.0)) throw io::IoError("--start-alpha must be positive");
    fc.start_alpha = *a.start_alpha;
  }
  return fc;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const model::ParseError& e) {
    err << "error: model: " << e.what() << "\n";
  } catch (const model::EvalError& e) {
    err << "error: evaluating the model: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kUsage;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io::IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw io::IoError("write to '" + path + "' failed");
}

}  // namespace

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto prep = prepare(args);
    const auto fc = fit_config(args, prep.model);
    const auto fit = estimate::fit(prep.model, prep.data, fc);

    json j;
    j["schema"] = io::kFitSchema;
    j["model"] = args.model;
    j["params"] = args.params;
    j["covariates"] = prep.model.covariates();
    j["response"] = args.response;
    j["log_response"] = args.log_response;
    j["n"] = prep.data.n();
    j["converged"] = fit.converged;
    j["method"] = fit.method == estimate::Method::Scoring ? "scoring" : "bfgs";
    j["iterations"] = fit.iterations;
    j["message"] = fit.message;
    j["loglik"] = nullable(fit.loglik);
    j["mle"] = {{"beta", to_vector(fit.beta_hat)},
                {"alpha", fit.alpha_hat},
                {"se_beta", nullable(fit.se_beta())},
                {"se_alpha", nullable(fit.se_alpha())}};

    if (fit.converged) {
      const auto br = bias::correct(fit);
      json corrected = {{"beta", to_vector(br.beta_tilde)},
                        {"alpha", br.alpha_tilde},
                        {"alpha_nonpositive", br.alpha_tilde_nonpositive}};
      if (br.alpha_tilde_nonpositive) {
        corrected["se_beta"] = nullptr;
        corrected["se_alpha"] = nullptr;
        err << "warning: corrected alpha is not positive (" << br.alpha_tilde << ")\n";
      } else {
        const auto se = bias::corrected_standard_errors(prep.model, prep.data.x, br);
        corrected["se_beta"] = nullable(se.se_beta);
        corrected["se_alpha"] = nullable(se.se_alpha);
      }
      j["corrected"] = corrected;
      j["bias"] = {{"beta", to_vector(br.b_beta)}, {"alpha", br.b_alpha}};
      j["mu"] = {{"b_mu", to_vector(br.b_mu)}, {"var_mu", to_vector(br.var_mu)}};
    } else {
      j["corrected"] = nullptr;
      j["bias"] = nullptr;
      j["mu"] = nullptr;
    }
    emit(args.out, j.dump(2) + "\n", out);

    if (!fit.converged) {
      err << "error: fit did not converge: " << fit.message << "\n";
      return static_cast<int>(kNotConverged);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_residuals(const FitArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto prep = prepare(args);
    const auto fc = fit_config(args, prep.model);
    const auto fit = estimate::fit(prep.model, prep.data, fc);
    if (!fit.converged) {
      err << "error: fit did not converge: " << fit.message << "\n";
      return static_cast<int>(kNotConverged);
    }
    const auto r = estimate::residuals(fit, prep.data);
    std::ostringstream s;
    s << std::setprecision(17);
    s << "# alpha_hat: " << fit.alpha_hat << "\n";
    s << "index,y,mu_hat,eps_hat,r_hat\n";
    for (Eigen::Index i = 0; i < r.mu_hat.size(); ++i)
      s << i + 1 << ',' << prep.data.y(i) << ',' << r.mu_hat(i) << ',' << r.eps_hat(i) << ',' << r.r_hat(i) << "\n";
    emit(args.out, s.str(), out);
    return static_cast<int>(kOk);
  });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.config.empty() == args.preset.empty()) throw io::IoError("give exactly one of --config and --preset");
    if (args.out_dir.empty()) throw io::IoError("--out-dir is required");
    if (args.reps && *args.reps < 1) throw io::IoError("--reps must be at least 1");

    std::vector<mc::SimConfig> configs;
    if (!args.preset.empty()) {
      try {
        configs = mc::preset(args.preset, args.reps.value_or(10000), args.seed.value_or(1));
      } catch (const std::invalid_argument& e) {
        throw io::IoError(e.what());
      }
    } else {
      std::ifstream f(args.config);
      if (!f) throw io::IoError("cannot open '" + args.config + "'");
      std::stringstream buf;
      buf << f.rdbuf();
      auto c = io::sim_config_from(io::parse_config(buf.str()));
      if (args.reps) c.reps = *args.reps;
      if (args.seed) c.seed = *args.seed;
      if (c.label.empty()) c.label = std::filesystem::path(args.config).stem().string();
      configs.push_back(std::move(c));
    }

    std::vector<mc::SimReport> reports;
    for (const auto& c : configs) {
      reports.push_back(mc::run_simulation(c));
      for (const auto& s : reports.back().sizes)
        if (s.failed > 0)
          err << "note: " << c.label << " n=" << s.n << ": " << s.failed << " replications failed and were dropped\n";
    }

    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) throw io::IoError("cannot create '" + args.out_dir + "': " + ec.message());
    const auto dir = std::filesystem::path(args.out_dir);

    std::ostringstream csv;
    io::write_csv(csv, reports);
    emit((dir / "simreport.csv").string(), csv.str(), out);

    json j;
    j["schema"] = io::kSimSchema;
    j["reports"] = json::array();
    for (const auto& r : reports) j["reports"].push_back(io::to_json(r));
    emit((dir / "simreport.json").string(), j.dump(2) + "\n", out);

    out << "wrote " << (dir / "simreport.csv").string() << " and " << (dir / "simreport.json").string() << "\n";
    return static_cast<int>(kOk);
  });
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Birnbaum-Saunders nonlinear regression with second-order bias correction", "bsnlr"};
  app.require_subcommand(1);

  FitArgs fa;
  FitArgs ra;
  SimulateArgs sa;

  const auto add_fit_flags = [](CLI::App* c, FitArgs& a) {
    c->add_option("--data", a.data, "CSV file with a header row")->required();
    c->add_option("--model", a.model, "mean function, e.g. \"b1 + b2*log(w)\"")->required();
    c->add_option("--params", a.params, "parameter names")->required()->delimiter(',');
    c->add_option("--start", a.start, "starting values for the parameters")->delimiter(',');
    c->add_option("--start-alpha", a.start_alpha, "starting value for alpha");
    c->add_option("--response", a.response, "response column")->capture_default_str();
    c->add_flag("--log-response", a.log_response, "model log(response)");
    c->add_option("--max-iter", a.max_iter, "iteration limit")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* fit = app.add_subcommand("fit", "fit a model and write a JSON report");
  add_fit_flags(fit, fa);
  fit->add_option("--out", fa.out, "report path (default stdout)");

  auto* res = app.add_subcommand("residuals", "fit a model and write the residual table");
  add_fit_flags(res, ra);
  res->add_option("--out", ra.out, "CSV path (default stdout)");

  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo study");
  auto* cfg = sim->add_option("--config", sa.config, "study config file");
  auto* pre = sim->add_option("--preset", sa.preset, "canned study")->check(CLI::IsMember({"table1", "table3"}));
  cfg->excludes(pre);
  sim->add_option("--reps", sa.reps, "replications per sample size")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "random seed");
  sim->add_option("--out-dir", sa.out_dir, "output directory")->required();

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
    if (sim->parsed() && sa.config.empty() && sa.preset.empty())
      throw CLI::RequiredError("one of --config and --preset");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kUsage);
  }

  if (fit->parsed()) return cmd_fit(fa, out, err);
  if (res->parsed()) return cmd_residuals(ra, out, err);
  return cmd_simulate(sa, out, err);
}

}  // namespace bsnlr::cli
