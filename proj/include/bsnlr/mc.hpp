#pragma once

// Monte Carlo study of the MLE and its bias-corrected version: covariates
// U(0,1) drawn once per sample size and held fixed, SN(alpha, 0, 2) errors,
// one independent random stream per replication.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsnlr/model.hpp"

namespace bsnlr::mc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SimConfig {
  model::MeanModel model;
  VectorXd true_beta;
  double true_alpha = 0.5;
  std::vector<int> n_grid;
  int reps = 1000;
  std::uint64_t seed = 1;
  int max_iter = 200;
  std::string label;

  /// Throws std::invalid_argument when reps < 1, alpha <= 0, the truth has
  /// the wrong length or some n < p + 1.
  void validate() const;
};

enum class Estimator { Mle, Bce };
const char* estimator_name(Estimator e);

/// Per-parameter summary over converged replications.
struct Summary {
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;           // mean - truth
  double relative_bias = 0.0;  // bias / truth, NaN when truth == 0
  bool relative_defined = true;
  double rmse = 0.0;
};

/// Column k of `estimates` across rows (one row per replication).
/// Throws std::invalid_argument with zero rows.
std::vector<Summary> summarize(const MatrixXd& estimates, const VectorXd& truth);

struct Cell {
  int n = 0;
  std::string parameter;
  Estimator estimator = Estimator::Mle;
  Summary stats;
};

struct SampleSizeInfo {
  int n = 0;
  int converged = 0;
  int failed = 0;          // dropped from the summaries
  int bfgs_fallbacks = 0;  // converged only after scoring failed
  int alpha_tilde_nonpositive = 0;
};

struct SimReport {
  std::string label;
  std::string model_text;
  std::vector<std::string> parameters;  // beta names then "alpha"
  VectorXd truth;                       // (beta, alpha)
  std::uint64_t seed = 0;
  int reps = 0;
  std::vector<SampleSizeInfo> sizes;
  std::vector<Cell> cells;  // n-major, then parameter, then MLE before BCE

  const Cell& cell(int n, const std::string& parameter, Estimator e) const;
};

/// Raw per-replication output of one sample size.
struct ReplicationBlock {
  MatrixXd mle;  // reps x (p+1)
  MatrixXd bce;
  std::vector<unsigned char> status;  // 0 failed, 1 scoring, 2 BFGS fallback
  std::vector<unsigned char> alpha_nonpositive;
};

/// Fixed design for grid index `n_index`: n x m matrix of U(0,1) draws.
MatrixXd design(const SimConfig& config, std::size_t n_index);

/// One replication: simulate, fit from the truth, correct. Returns false
/// when the fit does not converge or the correction throws.
bool replicate(const SimConfig& config, std::size_t n_index, int rep, const MatrixXd& x, VectorXd& mle,
               VectorXd& bce, bool& used_fallback, bool& alpha_nonpositive);

/// OpenMP kernel over replications.
ReplicationBlock run_block(const SimConfig& config, std::size_t n_index, const MatrixXd& x);
/// Serial reference kernel; bitwise identical output to run_block.
ReplicationBlock run_block_serial(const SimConfig& config, std::size_t n_index, const MatrixXd& x);

SimReport run_simulation(const SimConfig& config);
SimReport run_simulation_serial(const SimConfig& config);

/// Canned studies: "table1" (Gallant-type model, alpha 0.5 and 1.5,
/// n = 15, 30, 45) and "table3" (Michaelis-Menten, n = 20, 30, 40, 50).
std::vector<SimConfig> preset(const std::string& name, int reps, std::uint64_t seed);

}  // namespace bsnlr::mc
