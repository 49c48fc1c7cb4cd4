#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bsnlr/estimate.hpp"
#include "bsnlr/rng.hpp"
#include "bsnlr/signorm.hpp"
#include "oracle/oracle.hpp"

using namespace bsnlr;
using namespace bsnlr::estimate;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset simulate(const MeanModel& m, const MatrixXd& x, const VectorXd& beta, double alpha, Stream& rng) {
  Dataset d;
  d.x = x;
  d.names = m.covariates();
  const auto e = signorm::sn_sample(signorm::SinhNormalParams(alpha, 0.0, 2.0), rng, static_cast<std::size_t>(x.rows()));
  d.y = model::eval_mu(m, x, beta) + Eigen::Map<const VectorXd>(e.data(), x.rows());
  return d;
}

MatrixXd uniform_design(Eigen::Index n, Eigen::Index m, Stream& rng, double lo = 0.0, double hi = 1.0) {
  MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = lo + (hi - lo) * rng.uniform();
  return x;
}

VectorXd theta_vec(const VectorXd& beta, double alpha) {
  VectorXd t(beta.size() + 1);
  t << beta, alpha;
  return t;
}

VectorXd mm_truth() {
  VectorXd b(2);
  b << 3.0, 0.5;
  return b;
}

}  // namespace

TEST_CASE("xi terms") {
  VectorXd y(3), mu(3);
  y << 1.0, 2.0, 3.0;
  mu = y;
  auto xi = xi_terms(y, mu, 0.7);
  CHECK((xi.xi2.array() == 0.0).all());
  CHECK((xi.xi1.array() == 2 / 0.7).all());
  CHECK((xi.s.array() == 0.0).all());

  VectorXd e(1), z(1);
  e << 1.3;
  z << 0.0;
  xi = xi_terms(e, z, 0.7);
  CHECK(std::fabs(xi.xi1(0) * xi.xi1(0) - xi.xi2(0) * xi.xi2(0) - 4 / 0.49) <= 1e-10 * 4 / 0.49);

  e << 2.0;
  xi = xi_terms(e, z, 0.5);
  CHECK(xi.xi2(0) == doctest::Approx(4.700804774575205827).epsilon(1e-15));
}

TEST_CASE("log-likelihood values") {
  VectorXd y(1), mu(1);
  y << 0.4;
  mu << 0.4;
  CHECK(loglik(y, mu, 2.0) == 0.0);
  y << 1.4;
  CHECK(loglik(y, mu, 1.0) == doctest::Approx(0.2701810527029790556).epsilon(1e-15));

  // unimodal in alpha around the U_alpha root at fixed mu
  Stream rng(2);
  VectorXd r(30), zero = VectorXd::Zero(30);
  for (auto& v : r) v = rng.normal();
  const double root = std::sqrt(4.0 / 30 * r.unaryExpr([](double t) { return std::sinh(t / 2) * std::sinh(t / 2); }).sum());
  const double top = loglik(r, zero, root);
  for (double f : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) CHECK(loglik(r, zero, root * f) < top);
  for (double f : {0.5, 0.9}) CHECK(loglik(r, zero, root * f * f) < loglik(r, zero, root * f));
}

TEST_CASE("score: closed-form examples") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream rng(3);
  Dataset d;
  d.x = uniform_design(12, 1, rng);
  d.names = m.covariates();
  d.y = model::eval_mu(m, d.x, mm_truth());
  const auto u = score(Theta{mm_truth(), 0.8}, m, d);
  CHECK(u.u_beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(u.u_alpha == doctest::Approx(-12 / 0.8));

  d.y.array() += 0.3;
  const double a = std::sqrt(4.0 * std::sinh(0.15) * std::sinh(0.15));
  CHECK(std::fabs(score(Theta{mm_truth(), a}, m, d).u_alpha) < 1e-12);
}

TEST_CASE("score and observed Hessian against finite differences (50 instances)") {
  std::mt19937_64 gen(23);
  Stream rng(23);
  int count = 0;
  for (int k = 0; count < 50; ++k) {
    const auto which = model::all_builtins()[static_cast<std::size_t>(k) % model::all_builtins().size()];
    const int n = 5 + static_cast<int>(gen() % 26);  // 5..30
    const auto inst = oracle::random_instance(which, gen, n);
    if (inst.model.p() > 4) continue;
    ++count;
    const auto d = simulate(inst.model, inst.x, inst.beta, inst.alpha, rng);
    // evaluate away from the truth as well
    VectorXd beta = inst.beta * 1.05;
    const double alpha = inst.alpha * 0.9;
    const auto p = static_cast<Eigen::Index>(inst.model.p());

    const auto ll = [&](const VectorXd& t) { return loglik(Theta{t.head(p), t(p)}, inst.model, d); };
    const auto sc = [&](const VectorXd& t) {
      const auto s = score(Theta{t.head(p), t(p)}, inst.model, d);
      return theta_vec(s.u_beta, s.u_alpha);
    };
    const VectorXd t0 = theta_vec(beta, alpha);
    const VectorXd analytic = sc(t0);
    const VectorXd fd = oracle::fd_gradient(ll, t0);
    CAPTURE(model::builtin_name(which));
    CAPTURE(n);
    for (Eigen::Index r = 0; r <= p; ++r)
      CHECK(std::fabs(analytic(r) - fd(r)) <= 1e-6 * std::max(1.0, std::fabs(analytic(r))));

    const MatrixXd h = observed_hessian(Theta{beta, alpha}, inst.model, d);
    const MatrixXd hfd = oracle::fd_jacobian(sc, t0);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()));
    for (Eigen::Index r = 0; r <= p; ++r)
      for (Eigen::Index s = 0; s <= p; ++s)
        CHECK(std::fabs(h(r, s) - hfd(r, s)) <= 1e-5 * std::max(1.0, std::fabs(h(r, s))));
  }
}

TEST_CASE("observed Hessian at zero residuals") {
  const auto m = model::builtin(model::Builtin::Gallant);
  Stream rng(4);
  Dataset d;
  d.x = uniform_design(10, 3, rng);
  d.names = m.covariates();
  VectorXd b(4);
  b << 4, 5, 3, 1.5;
  d.y = model::eval_mu(m, d.x, b);
  const double a = 0.6;
  const MatrixXd h = observed_hessian(Theta{b, a}, m, d);
  const auto bundle = model::eval_bundle(m, d.x, b);
  const MatrixXd expect = -0.25 * (4 / (a * a) - 1) * bundle.d.transpose() * bundle.d;
  CHECK((h.topLeftCorner(4, 4) - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
  CHECK(h.col(4).head(4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expected information by simulation; beta-alpha orthogonality") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream design_rng(40);
  const MatrixXd x = uniform_design(15, 1, design_rng);
  const double a = 0.5;
  const auto bundle = model::eval_bundle(m, x, mm_truth());
  const MatrixXd k = fisher_info(a, bundle).k_beta;

  const int reps = 2000;
  std::vector<MatrixXd> draws;
  for (int r = 0; r < reps; ++r) {
    Stream rng(41, {static_cast<std::uint64_t>(r)});
    const auto d = simulate(m, x, mm_truth(), a, rng);
    draws.push_back(-observed_hessian(Theta{mm_truth(), a}, m, d));
  }
  MatrixXd mean = MatrixXd::Zero(3, 3), sq = MatrixXd::Zero(3, 3);
  for (const auto& h : draws) {
    mean += h;
    sq += h.cwiseProduct(h);
  }
  mean /= reps;
  const MatrixXd se = ((sq / reps - mean.cwiseProduct(mean)) / reps).cwiseSqrt();
  for (int r = 0; r < 2; ++r) {
    for (int s = 0; s < 2; ++s) CHECK(std::fabs(mean(r, s) - k(r, s)) <= 3 * se(r, s));
    CHECK(std::fabs(mean(r, 2)) <= 3 * se(r, 2));
  }
  CHECK(std::fabs(mean(2, 2) - 2 * 15 / (a * a)) <= 3 * se(2, 2));
}

TEST_CASE("Fisher information") {
  Stream rng(5);
  const auto m = model::builtin(model::Builtin::Gallant);
  const MatrixXd x = uniform_design(15, 3, rng);
  VectorXd b(4);
  b << 4, 5, 3, 1.5;
  const auto bundle = model::eval_bundle(m, x, b);
  for (double a : {0.3, 0.5, 1.5, 4.0}) {
    const auto info = fisher_info(a, bundle);
    const double tr = (bundle.d * info.k_beta.ldlt().solve(bundle.d.transpose())).trace();
    CHECK(std::fabs(tr - 16 / signorm::psi1(a)) <= 1e-10 * 16 / signorm::psi1(a));
    CHECK(fisher_info(2 * a, bundle).kappa_alpha == doctest::Approx(info.kappa_alpha / 4).epsilon(1e-15));
  }
  // orthonormal design
  const auto lin = model::builtin(model::Builtin::Linear, 1);
  MatrixXd xl(4, 1);
  xl << -1, 1, -1, 1;
  const auto bl = model::eval_bundle(lin, xl, VectorXd::Zero(2));
  const auto il = fisher_info(0.7, bl);
  CHECK((il.k_beta - signorm::psi1(0.7) * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("init_theta") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream rng(6);
  Dataset d;
  d.x = uniform_design(9, 1, rng);
  d.names = m.covariates();
  const double c = 2 * std::asinh(0.5);
  d.y = model::eval_mu(m, d.x, mm_truth()).array() + c;
  const auto t = init_theta(m, d, mm_truth());
  CHECK(t.alpha == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(t.beta == mm_truth());

  d.y = model::eval_mu(m, d.x, mm_truth());
  CHECK_THROWS_AS(init_theta(m, d, mm_truth()), std::domain_error);
  CHECK_THROWS_AS(init_theta(m, d), std::invalid_argument);  // nonlinear model without a start

  // affine model: OLS start recovers an exact line
  const auto lin = model::builtin(model::Builtin::Linear, 1);
  Dataset l;
  l.x = uniform_design(6, 1, rng);
  l.names = lin.covariates();
  l.y = 2.0 + 3.0 * l.x.col(0).array();
  l.y(0) += 0.1;
  const auto tl = init_theta(lin, l);
  CHECK(tl.beta.size() == 2);
  CHECK(std::fabs(tl.beta(1) - 3.0) < 0.5);

  // alpha0 close to the truth for n = 200
  int inside = 0;
  const MatrixXd x200 = uniform_design(200, 1, rng);
  for (int s = 0; s < 200; ++s) {
    Stream r(60, {static_cast<std::uint64_t>(s)});
    const auto ds = simulate(m, x200, mm_truth(), 0.5, r);
    const double a0 = init_theta(m, ds, mm_truth()).alpha;
    inside += (a0 > 0.4 && a0 < 0.6) ? 1 : 0;
  }
  CHECK(inside >= 198);
}

TEST_CASE("fit_scoring: first-order conditions and monotone trace") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream design_rng(7);
  const MatrixXd x = uniform_design(40, 1, design_rng);
  for (int s = 0; s < 10; ++s) {
    Stream rng(8, {static_cast<std::uint64_t>(s)});
    const auto d = simulate(m, x, mm_truth(), 0.5, rng);
    FitConfig fc;
    fc.start_beta = mm_truth();
    const auto f = fit_scoring(m, d, fc);
    REQUIRE(f.converged);
    CHECK(f.method == Method::Scoring);
    CHECK(f.alpha_hat > 0.0);
    CHECK(f.score_norm <= 1e-6);
    const auto xi = xi_terms(d.y, f.bundle.mu, f.alpha_hat);
    CHECK(std::fabs(xi.xi2.squaredNorm() / 40 - 1.0) <= 1e-6);
    CHECK((0.5 * f.bundle.d.transpose() * xi.s).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((xi.xi1.array().square() - xi.xi2.array().square() - 4 / (f.alpha_hat * f.alpha_hat)).abs().maxCoeff() <=
          1e-10 * 4 / (f.alpha_hat * f.alpha_hat));
    for (std::size_t k = 1; k < f.loglik_trace.size(); ++k)
      CHECK(f.loglik_trace[k] >= f.loglik_trace[k - 1] - 1e-12 * (1 + std::fabs(f.loglik_trace[k - 1])));
    CHECK(f.var_alpha == doctest::Approx(f.alpha_hat * f.alpha_hat / 80).epsilon(1e-14));
    CHECK((f.se_beta() - f.cov_beta.diagonal().cwiseSqrt()).norm() == 0.0);
  }
}

TEST_CASE("fit_scoring agrees with fit_bfgs; linear model to 1e-8") {
  const auto lin = model::builtin(model::Builtin::Linear, 2);
  Stream rng(9);
  const MatrixXd x = uniform_design(30, 2, rng, 0.0, 10.0);
  VectorXd b(3);
  b << 1.0, -0.5, 0.25;
  FitConfig tight;
  tight.score_tol = 1e-10;
  tight.loglik_tol = 1e-14;
  for (int s = 0; s < 5; ++s) {
    Stream r(10, {static_cast<std::uint64_t>(s)});
    const auto d = simulate(lin, x, b, 0.8, r);
    const auto fs = fit_scoring(lin, d, tight);
    const auto fb = fit_bfgs(lin, d, tight);
    REQUIRE(fs.converged);
    REQUIRE(fb.converged);
    CHECK((fs.beta_hat - fb.beta_hat).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::fabs(fs.alpha_hat - fb.alpha_hat) <= 1e-8);
  }

  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  const MatrixXd xm = uniform_design(30, 1, rng);
  int compared = 0;
  for (int s = 0; compared < 20; ++s) {
    Stream r(11, {static_cast<std::uint64_t>(s)});
    const auto d = simulate(m, xm, mm_truth(), 0.5, r);
    FitConfig fc = tight;
    fc.start_beta = mm_truth();
    const auto fs = fit_scoring(m, d, fc);
    const auto fb = fit_bfgs(m, d, fc);
    if (!fs.converged || !fb.converged) continue;
    ++compared;
    CHECK((fs.beta_hat - fb.beta_hat).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::fabs(fs.alpha_hat - fb.alpha_hat) <= 1e-6);
    CHECK(fb.method == Method::Bfgs);
    CHECK(score(Theta{fb.beta_hat, fb.alpha_hat}, m, d).max_abs() <= 1e-6);
    // the line search tolerates a few ulps of rounding at the optimum
    for (std::size_t k = 1; k < fb.loglik_trace.size(); ++k)
      CHECK(fb.loglik_trace[k] >= fb.loglik_trace[k - 1] - 1e-14 * std::fabs(fb.loglik_trace[k - 1]));
  }
}

TEST_CASE("round trip: refit from a tight optimum stays put") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream rng(15);
  const MatrixXd x = uniform_design(60, 1, rng, 0.05, 2.05);
  const auto d = simulate(m, x, mm_truth(), 0.5, rng);
  FitConfig tight;
  tight.start_beta = mm_truth();
  tight.score_tol = 1e-11;
  tight.loglik_tol = 1e-15;
  const auto a = fit_scoring(m, d, tight);
  REQUIRE(a.converged);
  FitConfig again;
  again.start_beta = a.beta_hat;
  again.start_alpha = a.alpha_hat;
  const auto b = fit_scoring(m, d, again);
  REQUIRE(b.converged);
  CHECK(b.iterations <= 2);
  CHECK((b.beta_hat - a.beta_hat).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::fabs(b.alpha_hat - a.alpha_hat) <= 1e-10);
}

TEST_CASE("fit: failure modes") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream rng(12);
  const MatrixXd x = uniform_design(25, 1, rng);
  const auto d = simulate(m, x, mm_truth(), 0.5, rng);
  FitConfig fc;
  VectorXd far(2);
  far << 10.0, 3.0;
  fc.start_beta = far;
  fc.max_iter = 1;
  const auto f = fit_scoring(m, d, fc);
  CHECK_FALSE(f.converged);
  CHECK_FALSE(f.message.empty());
  CHECK(f.iterations <= 1);

  Dataset flat = d;
  flat.x.setConstant(0.7);
  FitConfig ok;
  ok.start_beta = mm_truth();
  CHECK_THROWS_AS(fit_scoring(m, flat, ok), std::runtime_error);

  Dataset tiny;
  tiny.x = x.topRows(2);
  tiny.y = d.y.head(2);
  tiny.names = d.names;
  CHECK_THROWS_AS(fit_scoring(m, tiny, ok), std::invalid_argument);
  CHECK_THROWS_AS(fit_bfgs(m, tiny, ok), std::invalid_argument);

  // fit() falls back to BFGS but reports which method produced the result
  const auto g = fit(m, d, ok);
  CHECK(g.converged);
}

TEST_CASE("residuals") {
  const auto m = model::builtin(model::Builtin::MichaelisMenten);
  Stream rng(13);
  const MatrixXd x = uniform_design(500, 1, rng);
  const auto d = simulate(m, x, mm_truth(), 0.5, rng);
  FitConfig fc;
  fc.start_beta = mm_truth();
  const auto f = fit_scoring(m, d, fc);
  REQUIRE(f.converged);
  const auto r = residuals(f, d);
  CHECK(r.mu_hat == f.bundle.mu);
  CHECK(r.eps_hat == d.y - f.bundle.mu);
  for (Eigen::Index i = 0; i < 500; ++i) {
    const double want = 2 / f.alpha_hat * std::sinh(r.eps_hat(i) / 2);
    CHECK(std::fabs(r.r_hat(i) - want) <= 1e-15 * std::max(1.0, std::fabs(want)));
  }
  std::vector<double> v(r.r_hat.data(), r.r_hat.data() + r.r_hat.size());
  CHECK(oracle::ks_statistic(v, [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }) <
        oracle::ks_critical_01(500));

  // eps = 0 gives R = 0; R increasing in eps
  Dataset e = d;
  e.y = f.bundle.mu;
  e.y(0) += 0.1;
  e.y(1) -= 0.2;
  const auto re = residuals(f, e);
  CHECK(re.r_hat(2) == 0.0);
  CHECK(re.r_hat(0) > 0.0);
  CHECK(re.r_hat(1) < 0.0);
  CHECK(re.r_hat(1) < re.r_hat(2));
}

TEST_CASE("equivariance: shifting y moves only the intercept") {
  const MeanModel m("b1 + b2*exp(b3/w)", {"b1", "b2", "b3"}, {"w"});
  Stream rng(14);
  const MatrixXd w = uniform_design(46, 1, rng, 10.0, 100.0);
  VectorXd b(3);
  b << 8.9876, -5.1802, -22.5196;
  const auto d = simulate(m, w, b, 0.4, rng);
  FitConfig fc;
  fc.start_beta = b;
  fc.score_tol = 1e-10;
  fc.loglik_tol = 1e-15;
  const auto f0 = fit_scoring(m, d, fc);
  REQUIRE(f0.converged);
  for (double c : {-3.0, 0.5, 7.25}) {
    Dataset s = d;
    s.y.array() += c;
    FitConfig fs = fc;
    fs.start_beta = b;
    fs.start_beta.value()(0) += c;
    const auto f1 = fit_scoring(m, s, fs);
    REQUIRE(f1.converged);
    CHECK(std::fabs(f1.beta_hat(0) - f0.beta_hat(0) - c) <= 1e-8);
    CHECK(std::fabs(f1.beta_hat(1) - f0.beta_hat(1)) <= 1e-8);
    CHECK(std::fabs(f1.beta_hat(2) - f0.beta_hat(2)) <= 1e-8);
    CHECK(std::fabs(f1.alpha_hat - f0.alpha_hat) <= 1e-8);
  }
}
