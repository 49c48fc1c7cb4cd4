// BFGS on phi = (beta, log alpha) maximising the log-likelihood.

#include <cmath>
#include <limits>

#include "bsnlr/estimate.hpp"
#include "bsnlr/signorm.hpp"
#include "estimate_detail.hpp"

namespace bsnlr::estimate {

namespace {

struct Objective {
  const MeanModel& model;
  const Dataset& data;

  // Negative log-likelihood; +inf outside the model's domain.
  double value(const VectorXd& phi) const {
    const auto p = phi.size() - 1;
    try {
      const VectorXd mu = model::eval_mu(model, data.x, phi.head(p));
      const double ll = loglik(data.y, mu, std::exp(phi(p)));
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    } catch (const model::EvalError&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  // Gradient of the negative log-likelihood plus the bundle it came from.
  VectorXd gradient(const VectorXd& phi, DerivativeBundle& b) const {
    const auto p = phi.size() - 1;
    const double alpha = std::exp(phi(p));
    b = model::eval_bundle(model, data.x, phi.head(p));
    const Score s = score(data.y, b, alpha);
    VectorXd g(phi.size());
    g.head(p) = -s.u_beta;
    g(p) = -s.u_alpha * alpha;
    return g;
  }
};

}  // namespace

FitResult fit_bfgs(const MeanModel& model, const Dataset& data, const FitConfig& config) {
  detail::check_fit_inputs(model, data);
  const Theta start = detail::starting_point(model, data, config);
  const auto p = start.beta.size();
  const double n = static_cast<double>(data.n());
  const Objective obj{model, data};

  FitResult r;
  r.method = Method::Bfgs;

  VectorXd phi(p + 1);
  phi.head(p) = start.beta;
  phi(p) = std::log(start.alpha);
  double f = obj.value(phi);
  VectorXd g = obj.gradient(phi, r.bundle);
  r.loglik_trace.push_back(-f);

  // Inverse expected information in (beta, log alpha) as the initial metric;
  // the information for log alpha is 2n.
  MatrixXd h0 = MatrixXd::Zero(p + 1, p + 1);
  {
    const FisherInfo info = fisher_info(start.alpha, r.bundle);
    if (info.rank.deficient) {
      h0.topLeftCorner(p, p).setIdentity();
    } else {
      h0.topLeftCorner(p, p) = info.k_beta.ldlt().solve(MatrixXd::Identity(p, p));
    }
    h0(p, p) = 1.0 / (2.0 * n);
  }
  MatrixXd h = h0;

  const auto score_norm = [&](const VectorXd& grad) {
    double m = grad.head(p).size() ? grad.head(p).cwiseAbs().maxCoeff() : 0.0;
    return std::max(m, std::abs(grad(p)) / std::exp(phi(p)));
  };

  for (int it = 1; it <= config.max_iter; ++it) {
    r.iterations = it;
    VectorXd dir = -h * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      h = h0;
      dir = -h * g;
      slope = g.dot(dir);
    }

    // Backtracking Armijo search with a rounding allowance near the optimum.
    double t = 1.0;
    double f_new = f;
    VectorXd phi_new;
    bool accepted = false;
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      phi_new = phi + t * dir;
      f_new = obj.value(phi_new);
      if (f_new <= f + 1e-4 * t * slope + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      r.message = "line search failed";
      break;
    }

    DerivativeBundle b_new;
    VectorXd g_new;
    try {
      g_new = obj.gradient(phi_new, b_new);
    } catch (const model::EvalError& e) {
      r.message = e.what();
      break;
    }
    const VectorXd s = phi_new - phi;
    const VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const VectorXd hy = h * yv;
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      h += (rho * rho * yv.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }

    const bool small_change = detail::relative_change_small(-f_new, -f, config.loglik_tol);
    phi = phi_new;
    f = f_new;
    g = g_new;
    r.bundle = std::move(b_new);
    r.loglik_trace.push_back(-f);
    if (score_norm(g) <= config.score_tol && small_change) {
      r.converged = true;
      break;
    }
  }

  r.beta_hat = phi.head(p);
  r.alpha_hat = std::exp(phi(p));
  r.loglik = -f;
  detail::finalize(r, data.y);
  if (!r.converged && r.message.empty()) r.message = "iteration limit reached";
  return r;
}

}  // namespace bsnlr::estimate
