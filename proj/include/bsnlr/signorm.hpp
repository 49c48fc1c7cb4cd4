#pragma once

// Special functions and the sinh-normal / Birnbaum-Saunders distributions.

#include <cstddef>
#include <vector>

#include "bsnlr/rng.hpp"

namespace bsnlr::signorm {

/// Error function, absolute error below 1e-14 on finite input.
double erf(double x);

/// Complementary error function 1 - erf(x), accurate in both tails.
double erfc(double x);

/// Scaled complementary error function exp(x^2) * erfc(x) for x >= 0.
/// Never overflows; relative error below 1e-13. Throws std::domain_error
/// for x < 0 or NaN.
double erfcx(double x);

/// Standard normal cdf.
double norm_cdf(double x);

/// Standard normal quantile, |Phi(q) - p| <= 1e-12. Requires 0 < p < 1.
double norm_quantile(double p);

/// Information factor psi1(alpha) = 2 + 4/alpha^2 - (sqrt(2 pi)/alpha) erfcx(sqrt(2)/alpha).
/// K_beta = psi1(alpha) D'D / 4. Finite and positive for every alpha > 0.
double psi1(double alpha);

struct SinhNormalParams {
  double alpha;  // shape
  double mu;     // location (log-time units)
  double sigma;  // scale

  /// Throws std::invalid_argument unless alpha > 0 and sigma > 0.
  SinhNormalParams(double alpha, double mu, double sigma);
};

struct BSParams {
  double alpha;  // shape
  double eta;    // scale, equal to the median

  BSParams(double alpha, double eta);
};

double sn_pdf(double y, const SinhNormalParams& p);
double sn_cdf(double y, const SinhNormalParams& p);

/// Birnbaum-Saunders cdf; throws std::domain_error for t <= 0.
double bs_cdf(double t, const BSParams& p);

/// Exact draws Y = mu + sigma * asinh(alpha Z / 2), Z standard normal.
/// Consumes exactly two raw outputs of `rng` per draw.
std::vector<double> sn_sample(const SinhNormalParams& p, Stream& rng, std::size_t n);

}  // namespace bsnlr::signorm
