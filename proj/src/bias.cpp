#include "bsnlr/bias.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bsnlr/signorm.hpp"

namespace bsnlr::bias {

namespace {

// (D'D)^{-1} = P R^{-1} R^{-T} P' from a pivoted QR of D; avoids squaring
// the condition number of D.
MatrixXd normal_inverse(const Eigen::ColPivHouseholderQR<MatrixXd>& qr) {
  const auto p = qr.cols();
  const MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
  const auto& perm = qr.colsPermutation();
  return perm * (r_inv * r_inv.transpose()) * perm.transpose();
}

}  // namespace

CumulantSet cumulants(double alpha, const DerivativeBundle& b) {
  if (!(alpha > 0.0)) throw std::domain_error("cumulants: alpha must be positive");
  const std::size_t p = b.p();
  const auto n = static_cast<double>(b.n());
  const double q = -signorm::psi1(alpha) / 4.0;
  const double a3 = alpha * alpha * alpha;

  CumulantSet c;
  c.p = p;
  const MatrixXd dtd = b.d.transpose() * b.d;
  c.kappa_rs = q * dtd;
  c.kappa_rs_alpha = (2.0 + alpha * alpha) / a3 * dtd;
  c.kappa_aa = -2.0 * n / (alpha * alpha);
  c.kappa_aaa = 10.0 * n / a3;
  c.kappa_aa_a = 4.0 * n / a3;

  // sum_i g_irs d_it, indexed [r + p (s + p t)]
  const MatrixXd gd = b.g.transpose() * b.d;
  const auto gdt = [&](std::size_t r, std::size_t s, std::size_t t) {
    return gd(static_cast<Eigen::Index>(r + p * s), static_cast<Eigen::Index>(t));
  };
  c.kappa_rst.assign(p * p * p, 0.0);
  c.kappa_rs_t.assign(p * p * p, 0.0);
  for (std::size_t t = 0; t < p; ++t)
    for (std::size_t s = 0; s < p; ++s)
      for (std::size_t r = 0; r < p; ++r) {
        const std::size_t k = r + p * (s + p * t);
        c.kappa_rst[k] = q * (gdt(r, s, t) + gdt(r, t, s) + gdt(s, t, r));
        c.kappa_rs_t[k] = q * (gdt(r, t, s) + gdt(s, t, r));
      }
  return c;
}

VectorXd bias_beta(double alpha, const DerivativeBundle& b) {
  const auto p = static_cast<Eigen::Index>(b.p());
  if (model::check_rank(b.d).deficient) throw std::runtime_error("bias_beta: D'D is singular");
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(b.d);
  const MatrixXd dtd_inv = normal_inverse(qr);
  const VectorXd d = -(2.0 / signorm::psi1(alpha)) * (b.g * model::vec(dtd_inv));
  return qr.solve(d);
}

double bias_alpha(std::size_t p, std::size_t n, double alpha) {
  if (p == 0 || n == 0) throw std::domain_error("bias_alpha: p and n must be positive");
  if (!(alpha > 0.0)) throw std::domain_error("bias_alpha: alpha must be positive");
  const double term = static_cast<double>(p) * (2.0 + alpha * alpha) / (alpha * signorm::psi1(alpha));
  return -(term + alpha / 4.0) / static_cast<double>(n);
}

VectorXd bias_mu(const estimate::FitResult& fit, const VectorXd& b_beta) {
  const VectorXd cov = model::vec(fit.cov_beta);
  return fit.bundle.d * b_beta + 0.5 * (fit.bundle.g * cov);
}

VectorXd bias_mu(const estimate::FitResult& fit) { return bias_mu(fit, bias_beta(fit.alpha_hat, fit.bundle)); }

VectorXd var_mu(const estimate::FitResult& fit) {
  return (fit.bundle.d * fit.cov_beta).cwiseProduct(fit.bundle.d).rowwise().sum();
}

BiasReport correct(const estimate::FitResult& fit) {
  if (!fit.converged) throw std::invalid_argument("correct: the fit did not converge");
  BiasReport r;
  r.b_beta = bias_beta(fit.alpha_hat, fit.bundle);
  r.b_alpha = bias_alpha(fit.bundle.p(), fit.bundle.n(), fit.alpha_hat);
  r.beta_tilde = fit.beta_hat - r.b_beta;
  r.alpha_tilde = fit.alpha_hat - r.b_alpha;
  r.alpha_tilde_nonpositive = !(r.alpha_tilde > 0.0);
  r.b_mu = bias_mu(fit, r.b_beta);
  r.var_mu = var_mu(fit);
  return r;
}

CorrectedErrors corrected_standard_errors(const model::MeanModel& model, const MatrixXd& x,
                                          const BiasReport& report) {
  CorrectedErrors e;
  const auto p = report.beta_tilde.size();
  if (report.alpha_tilde_nonpositive) {
    e.se_beta = VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    e.se_alpha = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  const auto b = model::eval_bundle(model, x, report.beta_tilde);
  const auto info = estimate::fisher_info(report.alpha_tilde, b);
  e.se_beta = info.k_beta.ldlt().solve(MatrixXd::Identity(p, p)).diagonal().cwiseSqrt();
  e.se_alpha = std::sqrt(1.0 / info.kappa_alpha);
  return e;
}

double bias_single_param(const model::MeanModel& model, double beta, double alpha, const MatrixXd& x) {
  if (model.p() != 1) throw std::invalid_argument("bias_single_param: model must have exactly one parameter");
  const auto b = model::eval_bundle(model, x, VectorXd::Constant(1, beta));
  const double kappa1 = b.d.col(0).squaredNorm();
  const double kappa2 = b.d.col(0).dot(b.g.col(0));
  if (kappa1 == 0.0) throw std::domain_error("bias_single_param: degenerate design (kappa1 = 0)");
  return -(2.0 / signorm::psi1(alpha)) * kappa2 / (kappa1 * kappa1);
}

PartiallyNonlinearBias bias_partially_nonlinear(const model::MeanModel& model, const VectorXd& beta, double alpha,
                                                const MatrixXd& x) {
  const auto p = static_cast<Eigen::Index>(model.p());
  if (p < 2) throw std::invalid_argument("partially nonlinear model needs (lambda..., eta, gamma)");
  const Eigen::Index ie = p - 2;
  const Eigen::Index ig = p - 1;
  const double eta = beta(ie);
  if (eta == 0.0) throw std::domain_error("bias_partially_nonlinear: eta = 0");

  const auto b = model::eval_bundle(model, x, beta);
  const double scale = std::max(1.0, b.g.cwiseAbs().maxCoeff());
  for (Eigen::Index s = 0; s < p; ++s)
    for (Eigen::Index r = 0; r < p; ++r) {
      const bool allowed = (r == ig && s == ig) || (r == ie && s == ig) || (r == ig && s == ie);
      if (!allowed && b.g.col(r + p * s).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("model is not of the form Z lambda + eta g(gamma)");
    }
  if (model::check_rank(b.d).deficient) throw std::runtime_error("bias_partially_nonlinear: D'D is singular");

  // G(gamma, gamma) = eta g''(gamma)
  const VectorXd g2 = b.g.col(ig + p * ig) / eta;
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(b.d);
  const VectorXd delta = qr.solve(g2);
  const MatrixXd cov = (4.0 / signorm::psi1(alpha)) * normal_inverse(qr);

  PartiallyNonlinearBias out;
  out.tau_term = VectorXd::Zero(p);
  out.tau_term(ig) = -cov(ie, ig) / eta;
  out.delta_term = -(eta / 2.0) * cov(ig, ig) * delta;
  out.total = out.tau_term + out.delta_term;
  return out;
}

}  // namespace bsnlr::bias
