#pragma once

// Distributions of repeated loss estimates: empirical CDFs with DKW bands,
// log-normal fits, moment conversion and power-law scaling fits.

#include <span>
#include <string>
#include <vector>

namespace mwres {

struct EcdfCurve {
  std::vector<double> sorted_samples;
  std::vector<double> levels;  // k / n
  std::size_t n = 0;

  /// Step-function value at x.
  double operator()(double x) const;
};

struct EcdfBand {
  EcdfCurve curve;
  double alpha = 0.01;
  double epsilon = 0.0;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// sqrt(ln(2/alpha) / 2n).
double dkw_epsilon(std::size_t n, double alpha);

EcdfCurve ecdf(std::span<const double> samples);

/// Throws std::invalid_argument for n < 2, non-finite samples or alpha
/// outside (0, 1).
EcdfBand ecdf_with_dkw(std::span<const double> samples, double alpha = 0.01);

enum class LogNormalMethod { cdf_least_squares, maximum_likelihood };

/// Parameters of ln(ξ / unit). `mu_err` and `sigma_err` account for the
/// correlation between eCDF points; the `_naive` pair treats the points as
/// independent, as a plain curve fit would.
struct LogNormalFit {
  double mu = 0.0;
  double sigma = 0.0;
  double mu_err = 0.0;
  double sigma_err = 0.0;
  double mu_err_naive = 0.0;
  double sigma_err_naive = 0.0;
  double unit = 1e-7;
  double mean_xi = 0.0;  // absolute units
  double var_xi = 0.0;   // absolute units squared
  double residual_rms = 0.0;
  LogNormalMethod method = LogNormalMethod::cdf_least_squares;

  double relative_error() const;
};

/// Throws std::invalid_argument for non-positive samples and
/// NumericalError("lognormal_fit") for a degenerate (zero-width) sample.
LogNormalFit lognormal_fit(const EcdfCurve& curve, double unit = 1e-7,
                           LogNormalMethod method = LogNormalMethod::cdf_least_squares);

double lognormal_cdf(double x, double mu, double sigma);

struct LogNormalMoments {
  double mean = 0.0;
  double variance = 0.0;
};

LogNormalMoments lognormal_moments(double mu, double sigma);

/// sqrt(e^{σ²} − 1).
double lognormal_relative_error(double sigma);

struct PowerLawFit {
  double a = 0.0;
  double alpha = 0.0;
  double a_err = 0.0;
  double alpha_err = 0.0;
  double cov_log_a_alpha = 0.0;
};

/// rms = A n^alpha by ordinary least squares on log-log axes.
PowerLawFit powerlaw_fit(std::span<const double> n_density, std::span<const double> rms);

}  // namespace mwres
