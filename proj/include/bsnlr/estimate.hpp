#pragma once

// Maximum likelihood for theta = (beta, alpha) in y_i = f(x_i; beta) + e_i,
// e_i ~ SN(alpha, 0, 2).

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsnlr/model.hpp"

namespace bsnlr::estimate {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using model::Dataset;
using model::DerivativeBundle;
using model::MeanModel;

struct Theta {
  VectorXd beta;
  double alpha = 1.0;
};

/// xi1 = (2/alpha) cosh((y-mu)/2), xi2 = (2/alpha) sinh((y-mu)/2),
/// s = xi1 xi2 - xi2 / xi1.
struct XiTerms {
  VectorXd xi1;
  VectorXd xi2;
  VectorXd s;
};

XiTerms xi_terms(const VectorXd& y, const VectorXd& mu, double alpha);

/// sum log xi1 - 0.5 sum xi2^2 (additive constants dropped).
double loglik(const VectorXd& y, const VectorXd& mu, double alpha);
double loglik(const Theta& theta, const MeanModel& model, const Dataset& data);

struct Score {
  VectorXd u_beta;  // 0.5 D' s
  double u_alpha = 0.0;

  double max_abs() const;
};

Score score(const VectorXd& y, const DerivativeBundle& b, double alpha);
Score score(const Theta& theta, const MeanModel& model, const Dataset& data);

/// (p+1) x (p+1) second-derivative matrix of the log-likelihood, beta block
/// first and alpha last.
MatrixXd observed_hessian(const VectorXd& y, const DerivativeBundle& b, double alpha);
MatrixXd observed_hessian(const Theta& theta, const MeanModel& model, const Dataset& data);

/// Block-diagonal expected information: K_beta = psi1(alpha) D'D / 4 and
/// kappa_alpha = 2n / alpha^2. No beta-alpha cross block exists.
struct FisherInfo {
  MatrixXd k_beta;
  double kappa_alpha = 0.0;
  model::RankReport rank;
};

FisherInfo fisher_info(double alpha, const DerivativeBundle& b);

/// alpha0 = sqrt((4/n) sum sinh^2((y_i - mu_i)/2)), the root of U_alpha = 0
/// at mu(beta0). Without beta0, models affine in beta get an OLS start;
/// other models throw std::invalid_argument. Zero residuals throw
/// std::domain_error.
Theta init_theta(const MeanModel& model, const Dataset& data, const std::optional<VectorXd>& beta0 = std::nullopt);

struct FitConfig {
  std::optional<VectorXd> start_beta;
  std::optional<double> start_alpha;  // defaults to the init_theta root
  int max_iter = 200;
  double score_tol = 1e-6;    // max-norm of (U_beta, U_alpha)
  double loglik_tol = 1e-10;  // |l_new - l_old| / (1 + |l_old|)
  int max_halvings = 20;
};

enum class Method { Scoring, Bfgs };

struct FitResult {
  VectorXd beta_hat;
  double alpha_hat = 0.0;
  double loglik = 0.0;
  MatrixXd cov_beta;  // K_beta^{-1} at theta_hat
  double var_alpha = 0.0;  // alpha_hat^2 / (2n)
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  DerivativeBundle bundle;  // at beta_hat
  Method method = Method::Scoring;
  std::string message;
  std::vector<double> loglik_trace;  // accepted iterates, start first
  std::size_t n = 0;

  VectorXd se_beta() const { return cov_beta.diagonal().cwiseSqrt(); }
  double se_alpha() const { return std::sqrt(var_alpha); }
};

/// Fisher scoring: beta += (D'D)^{-1} D' (2 s / psi1(alpha)),
/// alpha <- alpha (1 + mean(xi2^2)) / 2, with beta-step halving on a
/// log-likelihood decrease. Throws on rank-deficient D at the start;
/// otherwise non-convergence is reported through `converged`.
FitResult fit_scoring(const MeanModel& model, const Dataset& data, const FitConfig& config = {});

/// BFGS on (beta, log alpha) with analytic gradient.
FitResult fit_bfgs(const MeanModel& model, const Dataset& data, const FitConfig& config = {});

/// Scoring, falling back to BFGS from the same start when scoring fails.
FitResult fit(const MeanModel& model, const Dataset& data, const FitConfig& config = {});

struct Residuals {
  VectorXd mu_hat;
  VectorXd eps_hat;  // y - mu_hat
  VectorXd r_hat;    // 2 sinh(eps_hat / 2) / alpha_hat, ~N(0,1) under the model
};

Residuals residuals(const FitResult& fit, const Dataset& data);

}  // namespace bsnlr::estimate
