#include "bsnlr/signorm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace bsnlr::signorm {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kSqrt2 = std::numbers::sqrt2;

// Below this argument erf/erfcx use the power series, above it the
// continued fraction. At 1.5 the series loses at most ~30x in erfcx
// (exp(x^2) erfc(x) cancellation) and the fraction needs ~45 terms.
constexpr double kSeriesSwitch = 1.5;

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n (2x^2)^n x / (2n+1)!!
// All terms positive, so no cancellation inside the sum.
double erf_series(double x) {
  const double two_x2 = 2.0 * x * x;
  double term = x;
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= two_x2 / (2.0 * n + 1.0);
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return 2.0 * kInvSqrtPi * std::exp(-x * x) * sum;
}

// exp(x^2) erfc(x) from the even contraction of Laplace's continued fraction
//   erfcx(x) = (2x/sqrt(pi)) / (2x^2+1 - 1*2/(2x^2+5 - 3*4/(2x^2+9 - ...)))
// evaluated with the modified Lentz algorithm.
double erfcx_cf(double x) {
  constexpr double tiny = 1e-300;
  const double b0 = 2.0 * x * x + 1.0;
  double f = b0;
  double c = f;
  double d = 0.0;
  for (int n = 1; n < 5000; ++n) {
    const double a = -(2.0 * n - 1.0) * (2.0 * n);
    const double b = b0 + 4.0 * n;
    d = b + a * d;
    if (d == 0.0) d = tiny;
    c = b + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 2.0 * x * kInvSqrtPi / f;
}

}  // namespace

double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::abs(x);
  if (ax < kSeriesSwitch) return erf_series(x);
  const double tail = erfcx(ax) * std::exp(-ax * ax);
  return std::copysign(1.0 - tail, x);
}

double erfc(double x) {
  if (std::isnan(x)) return x;
  if (x >= kSeriesSwitch) return erfcx(x) * std::exp(-x * x);
  if (x <= -kSeriesSwitch) return 2.0 - erfcx(-x) * std::exp(-x * x);
  return 1.0 - erf_series(x);
}

double erfcx(double x) {
  if (!(x >= 0.0)) throw std::domain_error("erfcx: argument must be >= 0");
  if (std::isinf(x)) return 0.0;
  if (x < kSeriesSwitch) return std::exp(x * x) * (1.0 - erf_series(x));
  // Past 1e8 the next asymptotic term is below 5e-17 relative.
  if (x > 1e8) return kInvSqrtPi / x;
  return erfcx_cf(x);
}

double norm_cdf(double x) { return 0.5 * erfc(-x / kSqrt2); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_quantile: p must lie in (0, 1)");
  double lo = -40.0;
  double hi = 40.0;
  double q = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double f = norm_cdf(q) - p;
    if (f == 0.0) break;
    if (f < 0.0) lo = q; else hi = q;
    const double dens = std::exp(-0.5 * q * q) * kInvSqrtPi / kSqrt2;
    double next = dens > 0.0 ? q - f / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - q) <= 1e-15 * (1.0 + std::abs(q))) {
      q = next;
      break;
    }
    q = next;
  }
  return q;
}

double psi1(double alpha) {
  if (!(alpha > 0.0) || std::isinf(alpha)) throw std::domain_error("psi1: alpha must be positive and finite");
  const double x = kSqrt2 / alpha;
  return 2.0 + 4.0 / (alpha * alpha) - (std::sqrt(2.0 * std::numbers::pi) / alpha) * erfcx(x);
}

SinhNormalParams::SinhNormalParams(double alpha_, double mu_, double sigma_)
    : alpha(alpha_), mu(mu_), sigma(sigma_) {
  if (!(alpha > 0.0) || !(sigma > 0.0) || !std::isfinite(mu) || std::isinf(alpha) || std::isinf(sigma))
    throw std::invalid_argument("SinhNormalParams: need alpha > 0, sigma > 0 and finite mu");
}

BSParams::BSParams(double alpha_, double eta_) : alpha(alpha_), eta(eta_) {
  if (!(alpha > 0.0) || !(eta > 0.0) || std::isinf(alpha) || std::isinf(eta))
    throw std::invalid_argument("BSParams: need alpha > 0 and eta > 0");
}

double sn_pdf(double y, const SinhNormalParams& p) {
  const double z = (y - p.mu) / p.sigma;
  const double sh = std::sinh(z);
  const double coef = 2.0 / (p.alpha * p.sigma * std::sqrt(2.0 * std::numbers::pi));
  if (std::isinf(sh)) return 0.0;
  return coef * std::cosh(z) * std::exp(-2.0 / (p.alpha * p.alpha) * sh * sh);
}

double sn_cdf(double y, const SinhNormalParams& p) {
  return norm_cdf(2.0 / p.alpha * std::sinh((y - p.mu) / p.sigma));
}

double bs_cdf(double t, const BSParams& p) {
  if (!(t > 0.0)) throw std::domain_error("bs_cdf: t must be positive");
  const double r = std::sqrt(t / p.eta);
  return norm_cdf((r - 1.0 / r) / p.alpha);
}

std::vector<double> sn_sample(const SinhNormalParams& p, Stream& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& y : out) y = p.mu + p.sigma * std::asinh(0.5 * p.alpha * rng.normal());
  return out;
}

}  // namespace bsnlr::signorm
