#pragma once

// Order 1/n bias of the maximum likelihood estimates and the corrected
// estimates theta_tilde = theta_hat - B(theta_hat).

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "bsnlr/estimate.hpp"
#include "bsnlr/model.hpp"

namespace bsnlr::bias {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using model::DerivativeBundle;

/// Joint cumulants of log-likelihood derivatives for the beta block plus the
/// alpha entries. Three-index arrays are stored flat with index r + p*(s + p*t).
/// The beta-alpha mixed cumulants kappa_{r,alpha}, kappa_{r alpha alpha},
/// kappa_{r alpha}^{(alpha)} and kappa_{r alpha}^{(s)} are identically zero and
/// not stored.
struct CumulantSet {
  std::size_t p = 0;
  MatrixXd kappa_rs;              // E(U_rs) = -psi1/4 D'D
  std::vector<double> kappa_rst;  // E(U_rst)
  std::vector<double> kappa_rs_t; // d kappa_rs / d beta_t
  MatrixXd kappa_rs_alpha;        // E(U_rs alpha) = (2 + alpha^2)/alpha^3 D'D
  double kappa_aa = 0.0;          // -2n / alpha^2
  double kappa_aaa = 0.0;         // 10n / alpha^3
  double kappa_aa_a = 0.0;        // 4n / alpha^3

  double rst(std::size_t r, std::size_t s, std::size_t t) const { return kappa_rst[r + p * (s + p * t)]; }
  double rs_t(std::size_t r, std::size_t s, std::size_t t) const { return kappa_rs_t[r + p * (s + p * t)]; }
};

CumulantSet cumulants(double alpha, const DerivativeBundle& b);

/// B(beta_hat) = (D'D)^{-1} D' d with d = -(2/psi1) G vec((D'D)^{-1}),
/// solved as the least-squares regression of d on D. Exactly zero when G = 0.
/// Throws std::runtime_error if D is rank deficient.
VectorXd bias_beta(double alpha, const DerivativeBundle& b);

/// B(alpha_hat) = -(1/n) { p (2 + alpha^2) / (alpha psi1(alpha)) + alpha/4 }.
double bias_alpha(std::size_t p, std::size_t n, double alpha);

struct BiasReport {
  VectorXd b_beta;
  double b_alpha = 0.0;
  VectorXd beta_tilde;
  double alpha_tilde = 0.0;
  VectorXd b_mu;    // B(mu_hat_i)
  VectorXd var_mu;  // Var(mu_hat_i)
  bool alpha_tilde_nonpositive = false;  // reported, never clamped
};

/// Plug-in correction at theta_hat. Requires a converged fit.
BiasReport correct(const estimate::FitResult& fit);

/// B(mu_hat_i) = d_i' B(beta_hat) + tr(M_i Cov(beta_hat)) / 2.
VectorXd bias_mu(const estimate::FitResult& fit, const VectorXd& b_beta);
VectorXd bias_mu(const estimate::FitResult& fit);
/// Var(mu_hat_i) = tr(d_i d_i' Cov(beta_hat)).
VectorXd var_mu(const estimate::FitResult& fit);

/// Standard errors from the expected information re-evaluated at the
/// corrected estimates.
struct CorrectedErrors {
  VectorXd se_beta;
  double se_alpha = 0.0;
};
CorrectedErrors corrected_standard_errors(const model::MeanModel& model, const MatrixXd& x,
                                          const BiasReport& report);

/// Single-parameter form -(2/psi1) kappa2 / kappa1^2 with
/// kappa1 = sum (df/dbeta)^2 and kappa2 = sum (df/dbeta)(d2f/dbeta2).
/// Throws std::invalid_argument when p != 1 and std::domain_error when kappa1 = 0.
double bias_single_param(const model::MeanModel& model, double beta, double alpha, const MatrixXd& x);

/// Partially nonlinear mu = Z lambda + eta g(gamma), beta = (lambda, eta, gamma):
///   B = -[ Cov(eta, gamma)/eta * tau_p + eta/2 * Var(gamma) * delta_p ],
/// delta_p the OLS coefficients of g''(gamma) on D and Cov = (4/psi1)(D'D)^{-1}.
struct PartiallyNonlinearBias {
  VectorXd total;
  VectorXd tau_term;    // -(1/eta) Cov(eta, gamma) tau_p
  VectorXd delta_term;  // -(eta/2) Var(gamma) delta_p
};

/// Checks that the second derivatives have the partially nonlinear pattern
/// (only the (eta, gamma) and (gamma, gamma) entries nonzero); throws
/// std::invalid_argument otherwise and std::domain_error for eta = 0.
PartiallyNonlinearBias bias_partially_nonlinear(const model::MeanModel& model, const VectorXd& beta, double alpha,
                                                const MatrixXd& x);

}  // namespace bsnlr::bias
