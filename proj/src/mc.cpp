#include "bsnlr/mc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bsnlr/bias.hpp"
#include "bsnlr/estimate.hpp"
#include "bsnlr/rng.hpp"
#include "bsnlr/signorm.hpp"
#include "mc_detail.hpp"

namespace bsnlr::mc {

namespace {
constexpr std::uint64_t kDesignTag = 0x64657369676eULL;  // "design"
constexpr std::uint64_t kReplicateTag = 0x726570ULL;     // "rep"
}  // namespace

void SimConfig::validate() const {
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (!(true_alpha > 0.0)) throw std::invalid_argument("true alpha must be positive");
  if (static_cast<std::size_t>(true_beta.size()) != model.p())
    throw std::invalid_argument("true beta has " + std::to_string(true_beta.size()) + " entries, model has " +
                                std::to_string(model.p()) + " parameters");
  if (n_grid.empty()) throw std::invalid_argument("empty sample-size grid");
  for (int n : n_grid)
    if (n < static_cast<int>(model.p()) + 1)
      throw std::invalid_argument("sample size " + std::to_string(n) + " is below p + 1");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

const char* estimator_name(Estimator e) { return e == Estimator::Mle ? "MLE" : "BCE"; }

std::vector<Summary> summarize(const MatrixXd& estimates, const VectorXd& truth) {
  if (estimates.rows() == 0) throw std::invalid_argument("summarize: no converged replications");
  if (estimates.cols() != truth.size()) throw std::invalid_argument("summarize: column count differs from truth");
  const auto reps = static_cast<double>(estimates.rows());
  std::vector<Summary> out(static_cast<std::size_t>(truth.size()));
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    Summary& s = out[static_cast<std::size_t>(k)];
    s.truth = truth(k);
    s.mean = estimates.col(k).sum() / reps;
    s.bias = s.mean - s.truth;
    s.rmse = std::sqrt((estimates.col(k).array() - s.truth).square().sum() / reps);
    s.relative_defined = s.truth != 0.0;
    s.relative_bias = s.relative_defined ? s.bias / s.truth : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

const Cell& SimReport::cell(int n, const std::string& parameter, Estimator e) const {
  for (const auto& c : cells)
    if (c.n == n && c.parameter == parameter && c.estimator == e) return c;
  throw std::out_of_range("no cell for n=" + std::to_string(n) + " parameter=" + parameter);
}

MatrixXd design(const SimConfig& config, std::size_t n_index) {
  const int n = config.n_grid.at(n_index);
  Stream rng(config.seed, {static_cast<std::uint64_t>(n_index), kDesignTag});
  MatrixXd x(n, static_cast<Eigen::Index>(config.model.m()));
  // Row-major fill so adding a covariate does not reshuffle earlier columns' rows.
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
  return x;
}

bool replicate(const SimConfig& config, std::size_t n_index, int rep, const MatrixXd& x, VectorXd& mle,
               VectorXd& bce, bool& used_fallback, bool& alpha_nonpositive) {
  const int n = config.n_grid.at(n_index);
  Stream rng(config.seed, {static_cast<std::uint64_t>(n_index), kReplicateTag, static_cast<std::uint64_t>(rep)});
  const VectorXd mu = model::eval_mu(config.model, x, config.true_beta);
  const auto eps = signorm::sn_sample(signorm::SinhNormalParams(config.true_alpha, 0.0, 2.0), rng,
                                      static_cast<std::size_t>(n));

  model::Dataset data;
  data.x = x;
  data.names = config.model.covariates();
  data.y = mu + Eigen::Map<const VectorXd>(eps.data(), n);

  estimate::FitConfig fc;
  fc.start_beta = config.true_beta;
  fc.start_alpha = config.true_alpha;
  fc.max_iter = config.max_iter;

  estimate::FitResult fit;
  used_fallback = false;
  try {
    fit = estimate::fit_scoring(config.model, data, fc);
  } catch (const std::exception&) {
    fit.converged = false;
  }
  if (!fit.converged) {
    used_fallback = true;
    try {
      fit = estimate::fit_bfgs(config.model, data, fc);
    } catch (const std::exception&) {
      return false;
    }
    if (!fit.converged) return false;
  }

  bias::BiasReport br;
  try {
    br = bias::correct(fit);
  } catch (const std::exception&) {
    return false;
  }
  const auto p = fit.beta_hat.size();
  mle.resize(p + 1);
  bce.resize(p + 1);
  mle << fit.beta_hat, fit.alpha_hat;
  bce << br.beta_tilde, br.alpha_tilde;
  alpha_nonpositive = br.alpha_tilde_nonpositive;
  return true;
}

namespace detail {

ReplicationBlock empty_block(const SimConfig& config) {
  const auto k = static_cast<Eigen::Index>(config.model.p() + 1);
  ReplicationBlock b;
  b.mle = MatrixXd::Zero(config.reps, k);
  b.bce = MatrixXd::Zero(config.reps, k);
  b.status.assign(static_cast<std::size_t>(config.reps), 0);
  b.alpha_nonpositive.assign(static_cast<std::size_t>(config.reps), 0);
  return b;
}

void run_one(const SimConfig& config, std::size_t n_index, const MatrixXd& x, int rep, ReplicationBlock& out) {
  VectorXd mle, bce;
  bool fallback = false;
  bool nonpos = false;
  bool ok = false;
  try {
    ok = replicate(config, n_index, rep, x, mle, bce, fallback, nonpos);
  } catch (const std::exception&) {
    ok = false;
  }
  const auto r = static_cast<std::size_t>(rep);
  if (!ok) return;
  out.mle.row(rep) = mle.transpose();
  out.bce.row(rep) = bce.transpose();
  out.status[r] = fallback ? 2 : 1;
  out.alpha_nonpositive[r] = nonpos ? 1 : 0;
}

SimReport assemble(const SimConfig& config, const std::vector<ReplicationBlock>& blocks) {
  SimReport rep;
  rep.label = config.label;
  rep.model_text = config.model.text();
  rep.parameters = config.model.params();
  rep.parameters.push_back("alpha");
  rep.truth.resize(config.true_beta.size() + 1);
  rep.truth << config.true_beta, config.true_alpha;
  rep.seed = config.seed;
  rep.reps = config.reps;

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ReplicationBlock& blk = blocks[b];
    SampleSizeInfo info;
    info.n = config.n_grid[b];
    std::vector<Eigen::Index> keep;
    for (std::size_t r = 0; r < blk.status.size(); ++r) {
      if (blk.status[r] == 0) {
        ++info.failed;
        continue;
      }
      ++info.converged;
      if (blk.status[r] == 2) ++info.bfgs_fallbacks;
      if (blk.alpha_nonpositive[r]) ++info.alpha_tilde_nonpositive;
      keep.push_back(static_cast<Eigen::Index>(r));
    }
    rep.sizes.push_back(info);
    if (keep.empty()) continue;

    MatrixXd mle(static_cast<Eigen::Index>(keep.size()), blk.mle.cols());
    MatrixXd bce(mle.rows(), mle.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      mle.row(static_cast<Eigen::Index>(k)) = blk.mle.row(keep[k]);
      bce.row(static_cast<Eigen::Index>(k)) = blk.bce.row(keep[k]);
    }
    const auto sm = summarize(mle, rep.truth);
    const auto sb = summarize(bce, rep.truth);
    for (std::size_t j = 0; j < rep.parameters.size(); ++j) {
      rep.cells.push_back({info.n, rep.parameters[j], Estimator::Mle, sm[j]});
      rep.cells.push_back({info.n, rep.parameters[j], Estimator::Bce, sb[j]});
    }
  }
  return rep;
}

}  // namespace detail

ReplicationBlock run_block(const SimConfig& config, std::size_t n_index, const MatrixXd& x) {
  ReplicationBlock out = detail::empty_block(config);
#pragma omp parallel for schedule(dynamic, 16)
  for (int rep = 0; rep < config.reps; ++rep) detail::run_one(config, n_index, x, rep, out);
  return out;
}

SimReport run_simulation(const SimConfig& config) {
  config.validate();
  std::vector<ReplicationBlock> blocks;
  for (std::size_t k = 0; k < config.n_grid.size(); ++k) blocks.push_back(run_block(config, k, design(config, k)));
  return detail::assemble(config, blocks);
}

std::vector<SimConfig> preset(const std::string& name, int reps, std::uint64_t seed) {
  std::vector<SimConfig> out;
  if (name == "table1") {
    const auto m = model::builtin(model::Builtin::Gallant, 2);
    VectorXd truth(4);
    truth << 4.0, 5.0, 3.0, 1.5;
    for (double alpha : {0.5, 1.5}) {
      SimConfig c{m, truth, alpha, {15, 30, 45}, reps, seed, 200, "table1 alpha=" + std::to_string(alpha).substr(0, 3)};
      out.push_back(std::move(c));
    }
  } else if (name == "table3") {
    VectorXd truth(2);
    truth << 3.0, 0.5;
    out.push_back(SimConfig{model::builtin(model::Builtin::MichaelisMenten), truth, 0.5, {20, 30, 40, 50}, reps, seed,
                            200, "table3"});
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (expected table1 or table3)");
  }
  return out;
}

}  // namespace bsnlr::mc
