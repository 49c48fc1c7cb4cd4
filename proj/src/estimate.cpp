#include "bsnlr/estimate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bsnlr/signorm.hpp"
#include "estimate_detail.hpp"

namespace bsnlr::estimate {

namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.0) || std::isinf(alpha)) throw std::domain_error("alpha must be positive and finite");
}

}  // namespace

XiTerms xi_terms(const VectorXd& y, const VectorXd& mu, double alpha) {
  require_alpha(alpha);
  const Eigen::Index n = y.size();
  XiTerms t{VectorXd(n), VectorXd(n), VectorXd(n)};
  const double k = 2.0 / alpha;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double half = 0.5 * (y(i) - mu(i));
    t.xi1(i) = k * std::cosh(half);
    t.xi2(i) = k * std::sinh(half);
    t.s(i) = t.xi1(i) * t.xi2(i) - t.xi2(i) / t.xi1(i);
  }
  return t;
}

double loglik(const VectorXd& y, const VectorXd& mu, double alpha) {
  const XiTerms t = xi_terms(y, mu, alpha);
  return t.xi1.array().log().sum() - 0.5 * t.xi2.squaredNorm();
}

double loglik(const Theta& theta, const MeanModel& model, const Dataset& data) {
  return loglik(data.y, model::eval_mu(model, data.x, theta.beta), theta.alpha);
}

double Score::max_abs() const {
  const double b = u_beta.size() ? u_beta.cwiseAbs().maxCoeff() : 0.0;
  return std::max(b, std::abs(u_alpha));
}

Score score(const VectorXd& y, const DerivativeBundle& b, double alpha) {
  const XiTerms t = xi_terms(y, b.mu, alpha);
  const double n = static_cast<double>(y.size());
  Score s;
  s.u_beta = 0.5 * b.d.transpose() * t.s;
  s.u_alpha = -n / alpha + t.xi2.squaredNorm() / alpha;
  return s;
}

Score score(const Theta& theta, const MeanModel& model, const Dataset& data) {
  return score(data.y, model::eval_bundle(model, data.x, theta.beta), theta.alpha);
}

MatrixXd observed_hessian(const VectorXd& y, const DerivativeBundle& b, double alpha) {
  const XiTerms t = xi_terms(y, b.mu, alpha);
  const Eigen::Index n = y.size();
  const auto p = static_cast<Eigen::Index>(b.p());
  const double a2 = alpha * alpha;

  // weight_i = 2 xi2^2 + 4/alpha^2 - 1 + xi2^2 / xi1^2
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x2 = t.xi2(i) * t.xi2(i);
    w(i) = 2.0 * x2 + 4.0 / a2 - 1.0 + x2 / (t.xi1(i) * t.xi1(i));
  }

  MatrixXd h = MatrixXd::Zero(p + 1, p + 1);
  const VectorXd gs = 0.5 * b.g.transpose() * t.s;  // vec of sum_i g_irs s_i / 2
  h.topLeftCorner(p, p) = Eigen::Map<const MatrixXd>(gs.data(), p, p);
  h.topLeftCorner(p, p).noalias() -= 0.25 * b.d.transpose() * w.asDiagonal() * b.d;
  const VectorXd cross = -(1.0 / alpha) * b.d.transpose() * t.xi1.cwiseProduct(t.xi2);
  h.topRightCorner(p, 1) = cross;
  h.bottomLeftCorner(1, p) = cross.transpose();
  h(p, p) = static_cast<double>(n) / a2 - 3.0 / a2 * t.xi2.squaredNorm();
  return h;
}

MatrixXd observed_hessian(const Theta& theta, const MeanModel& model, const Dataset& data) {
  return observed_hessian(data.y, model::eval_bundle(model, data.x, theta.beta), theta.alpha);
}

FisherInfo fisher_info(double alpha, const DerivativeBundle& b) {
  require_alpha(alpha);
  FisherInfo f;
  f.k_beta = signorm::psi1(alpha) / 4.0 * (b.d.transpose() * b.d);
  f.kappa_alpha = 2.0 * static_cast<double>(b.n()) / (alpha * alpha);
  f.rank = model::check_rank(b.d);
  return f;
}

Theta init_theta(const MeanModel& model, const Dataset& data, const std::optional<VectorXd>& beta0) {
  Theta th;
  if (beta0) {
    th.beta = *beta0;
  } else if (model.affine()) {
    // mu(beta) = mu(0) + D beta exactly, so one least-squares solve gives OLS.
    const auto b = model::eval_bundle(model, data.x, VectorXd::Zero(static_cast<Eigen::Index>(model.p())));
    th.beta = b.d.colPivHouseholderQr().solve(data.y - b.mu);
  } else {
    throw std::invalid_argument("start values are required for a model that is not affine in its parameters");
  }
  const VectorXd mu = model::eval_mu(model, data.x, th.beta);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double sh = std::sinh(0.5 * (data.y(i) - mu(i)));
    acc += sh * sh;
  }
  th.alpha = std::sqrt(4.0 * acc / static_cast<double>(mu.size()));
  if (!(th.alpha > 0.0)) throw std::domain_error("all residuals are zero at the start; alpha would be 0");
  if (!std::isfinite(th.alpha)) throw std::domain_error("start residuals overflow");
  return th;
}

namespace detail {

void check_fit_inputs(const MeanModel& model, const Dataset& data) {
  data.validate();
  if (data.n() < model.p() + 1)
    throw std::invalid_argument("need n >= p + 1 observations (n = " + std::to_string(data.n()) +
                                ", p = " + std::to_string(model.p()) + ")");
  if (static_cast<std::size_t>(data.x.cols()) != model.m())
    throw std::invalid_argument("dataset has " + std::to_string(data.x.cols()) + " covariates, model expects " +
                                std::to_string(model.m()));
}

Theta starting_point(const MeanModel& model, const Dataset& data, const FitConfig& config) {
  Theta th = init_theta(model, data, config.start_beta);
  if (config.start_alpha) {
    require_alpha(*config.start_alpha);
    th.alpha = *config.start_alpha;
  }
  return th;
}

// Fills covariance blocks and the score norm from the expected information.
void finalize(FitResult& r, const VectorXd& y) {
  const FisherInfo info = fisher_info(r.alpha_hat, r.bundle);
  const auto p = info.k_beta.rows();
  r.cov_beta = info.rank.deficient ? MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN())
                                   : MatrixXd(info.k_beta.ldlt().solve(MatrixXd::Identity(p, p)));
  r.var_alpha = 1.0 / info.kappa_alpha;
  r.score_norm = score(y, r.bundle, r.alpha_hat).max_abs();
  r.n = static_cast<std::size_t>(y.size());
}

bool relative_change_small(double l_new, double l_old, double tol) {
  return std::abs(l_new - l_old) <= tol * (1.0 + std::abs(l_old));
}

}  // namespace detail

FitResult fit_scoring(const MeanModel& model, const Dataset& data, const FitConfig& config) {
  detail::check_fit_inputs(model, data);
  Theta th = detail::starting_point(model, data, config);
  const VectorXd& y = data.y;
  const double n = static_cast<double>(data.n());

  FitResult r;
  r.method = Method::Scoring;
  r.bundle = model::eval_bundle(model, data.x, th.beta);
  if (model::check_rank(r.bundle.d).deficient)
    throw std::runtime_error("local design matrix D is rank deficient at the starting value");
  double ll = loglik(y, r.bundle.mu, th.alpha);
  r.loglik_trace.push_back(ll);

  for (int it = 1; it <= config.max_iter; ++it) {
    r.iterations = it;
    const XiTerms xi = xi_terms(y, r.bundle.mu, th.alpha);
    const VectorXd zeta = 2.0 * xi.s / signorm::psi1(th.alpha);
    const VectorXd step = r.bundle.d.colPivHouseholderQr().solve(zeta);
    const double alpha_full = 0.5 * th.alpha * (1.0 + xi.xi2.squaredNorm() / n);

    bool accepted = false;
    double t = 1.0;
    Theta trial;
    double ll_trial = 0.0;
    for (int h = 0; h <= config.max_halvings; ++h, t *= 0.5) {
      trial.beta = th.beta + t * step;
      try {
        const VectorXd mu = model::eval_mu(model, data.x, trial.beta);
        // First attempt is the plain simultaneous update; after a halving the
        // alpha step is recomputed at the shortened beta.
        if (h == 0) {
          trial.alpha = alpha_full;
        } else {
          const VectorXd x2 = xi_terms(y, mu, th.alpha).xi2;
          trial.alpha = 0.5 * th.alpha * (1.0 + x2.squaredNorm() / n);
        }
        if (!(std::isfinite(trial.alpha) && trial.alpha > 0.0)) continue;
        ll_trial = loglik(y, mu, trial.alpha);
      } catch (const model::EvalError&) {
        continue;
      }
      if (std::isfinite(ll_trial) && ll_trial >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      r.message = "step halving exhausted without a log-likelihood increase";
      break;
    }

    const bool small_change = detail::relative_change_small(ll_trial, ll, config.loglik_tol);
    th = trial;
    ll = ll_trial;
    r.loglik_trace.push_back(ll);
    try {
      r.bundle = model::eval_bundle(model, data.x, th.beta);
    } catch (const model::EvalError& e) {
      r.message = e.what();
      break;
    }
    const double sn = score(y, r.bundle, th.alpha).max_abs();
    if (sn <= config.score_tol && small_change) {
      r.converged = true;
      break;
    }
  }

  r.beta_hat = th.beta;
  r.alpha_hat = th.alpha;
  r.loglik = ll;
  detail::finalize(r, y);
  if (!r.converged && r.message.empty()) r.message = "iteration limit reached";
  return r;
}

FitResult fit(const MeanModel& model, const Dataset& data, const FitConfig& config) {
  FitResult r;
  try {
    r = fit_scoring(model, data, config);
    if (r.converged) return r;
  } catch (const model::EvalError&) {
  } catch (const std::runtime_error&) {
  }
  FitResult alt = fit_bfgs(model, data, config);
  if (!alt.converged && r.beta_hat.size() && r.loglik > alt.loglik) return r;
  return alt;
}

Residuals residuals(const FitResult& fit, const Dataset& data) {
  Residuals r;
  r.mu_hat = fit.bundle.mu;
  r.eps_hat = data.y - r.mu_hat;
  r.r_hat = r.eps_hat.unaryExpr([&](double e) { return 2.0 * std::sinh(0.5 * e) / fit.alpha_hat; });
  return r;
}

}  // namespace bsnlr::estimate
