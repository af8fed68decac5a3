#include "mwres/stats.hpp"

#include "mwres/errors.hpp"
#include "mwres/levmar.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mwres {

double EcdfCurve::operator()(double x) const {
  const auto it = std::upper_bound(sorted_samples.begin(), sorted_samples.end(), x);
  return static_cast<double>(it - sorted_samples.begin()) / static_cast<double>(n);
}

double dkw_epsilon(std::size_t n, double alpha) {
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

EcdfCurve ecdf(std::span<const double> samples) {
  EcdfCurve c;
  c.sorted_samples.assign(samples.begin(), samples.end());
  for (double v : c.sorted_samples)
    if (!std::isfinite(v)) throw std::invalid_argument("ecdf: samples must be finite");
  std::sort(c.sorted_samples.begin(), c.sorted_samples.end());
  c.n = c.sorted_samples.size();
  c.levels.resize(c.n);
  for (std::size_t k = 0; k < c.n; ++k)
    c.levels[k] = static_cast<double>(k + 1) / static_cast<double>(c.n);
  return c;
}

EcdfBand ecdf_with_dkw(std::span<const double> samples, double alpha) {
  if (samples.size() < 2) throw std::invalid_argument("ecdf_with_dkw: need at least 2 samples");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ecdf_with_dkw: alpha must lie in (0, 1)");
  EcdfBand band;
  band.curve = ecdf(samples);
  band.alpha = alpha;
  band.epsilon = dkw_epsilon(band.curve.n, alpha);
  band.lower.resize(band.curve.n);
  band.upper.resize(band.curve.n);
  for (std::size_t k = 0; k < band.curve.n; ++k) {
    band.lower[k] = std::clamp(band.curve.levels[k] - band.epsilon, 0.0, 1.0);
    band.upper[k] = std::clamp(band.curve.levels[k] + band.epsilon, 0.0, 1.0);
  }
  return band;
}

double lognormal_cdf(double x, double mu, double sigma) {
  if (!(x > 0.0)) return 0.0;
  return 0.5 * std::erfc(-(std::log(x) - mu) / (sigma * std::numbers::sqrt2));
}

LogNormalMoments lognormal_moments(double mu, double sigma) {
  const double s2 = sigma * sigma;
  return {std::exp(mu + 0.5 * s2), std::expm1(s2) * std::exp(2.0 * mu + s2)};
}

double lognormal_relative_error(double sigma) { return std::sqrt(std::expm1(sigma * sigma)); }

double LogNormalFit::relative_error() const { return lognormal_relative_error(sigma); }

LogNormalFit lognormal_fit(const EcdfCurve& curve, double unit, LogNormalMethod method) {
  const std::size_t n = curve.n;
  if (n < 2) throw std::invalid_argument("lognormal_fit: need at least 2 samples");
  if (!(unit > 0.0)) throw std::invalid_argument("lognormal_fit: unit must be > 0");
  std::vector<double> logs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double v = curve.sorted_samples[k];
    if (!(v > 0.0)) throw std::invalid_argument("lognormal_fit: samples must be > 0");
    logs[k] = std::log(v / unit);
  }
  const double dn = static_cast<double>(n);
  double m = 0.0;
  for (double l : logs) m += l;
  m /= dn;
  double ss = 0.0;
  for (double l : logs) ss += (l - m) * (l - m);
  const double s_mle = std::sqrt(ss / dn);
  if (!(s_mle > 1e-12 * std::max(1.0, std::abs(m))))
    throw NumericalError("lognormal_fit", "degenerate distribution: all samples are equal");

  LogNormalFit fit;
  fit.unit = unit;
  fit.method = method;

  std::vector<double> target(n);
  for (std::size_t k = 0; k < n; ++k) target[k] = (static_cast<double>(k) + 0.5) / dn;
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k)
      r[static_cast<Eigen::Index>(k)] =
          0.5 * std::erfc(-(logs[k] - p[0]) / (p[1] * std::numbers::sqrt2)) - target[k];
    return r;
  };

  if (method == LogNormalMethod::maximum_likelihood) {
    fit.mu = m;
    fit.sigma = s_mle;
    fit.mu_err = fit.mu_err_naive = s_mle / std::sqrt(dn);
    fit.sigma_err = fit.sigma_err_naive = s_mle / std::sqrt(2.0 * dn);
  } else {
    Eigen::VectorXd p0(2);
    p0 << m, s_mle;
    const LeastSquaresResult ls = solve_least_squares(residuals, p0, static_cast<int>(n));
    if (!ls.converged || !(ls.x[1] > 0.0))
      throw NumericalError("lognormal_fit", "CDF least squares did not converge");
    fit.mu = ls.x[0];
    fit.sigma = ls.x[1];
    fit.mu_err_naive = std::sqrt(ls.covariance(0, 0));
    fit.sigma_err_naive = std::sqrt(ls.covariance(1, 1));

    // sandwich estimate with the eCDF covariance (min(Fi, Fj) − Fi Fj) / n
    const Eigen::MatrixXd& j = ls.jacobian;
    Eigen::VectorXd f(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) f[static_cast<Eigen::Index>(k)] = lognormal_cdf(
        std::exp(logs[k]), fit.mu, fit.sigma);
    Eigen::MatrixXd omega(f.size(), f.size());
    for (Eigen::Index a = 0; a < f.size(); ++a)
      for (Eigen::Index b = 0; b < f.size(); ++b)
        omega(a, b) = (std::min(f[a], f[b]) - f[a] * f[b]) / dn;
    const Eigen::Matrix2d h_inv = (j.transpose() * j).inverse();
    const Eigen::Matrix2d cov = h_inv * (j.transpose() * omega * j) * h_inv;
    fit.mu_err = std::sqrt(cov(0, 0));
    fit.sigma_err = std::sqrt(cov(1, 1));
  }

  Eigen::VectorXd p(2);
  p << fit.mu, fit.sigma;
  fit.residual_rms = std::sqrt(residuals(p).squaredNorm() / dn);
  const LogNormalMoments mom = lognormal_moments(fit.mu, fit.sigma);
  fit.mean_xi = mom.mean * unit;
  fit.var_xi = mom.variance * unit * unit;
  return fit;
}

PowerLawFit powerlaw_fit(std::span<const double> n_density, std::span<const double> rms) {
  if (n_density.size() != rms.size())
    throw std::invalid_argument("powerlaw_fit: inputs differ in length");
  const std::size_t m = n_density.size();
  if (m < 3) throw std::invalid_argument("powerlaw_fit: need at least 3 points");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (!(n_density[i] > 0.0) || !(rms[i] > 0.0))
      throw std::invalid_argument("powerlaw_fit: data must be > 0");
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = std::log(n_density[i]);
    y[r] = std::log(rms[i]);
  }
  const Eigen::Matrix2d xtx_inv = (x.transpose() * x).inverse();
  const Eigen::Vector2d beta = xtx_inv * (x.transpose() * y);
  const double rss = (y - x * beta).squaredNorm();
  const Eigen::Matrix2d cov = rss / static_cast<double>(m - 2) * xtx_inv;

  PowerLawFit fit;
  fit.a = std::exp(beta[0]);
  fit.alpha = beta[1];
  fit.a_err = fit.a * std::sqrt(cov(0, 0));
  fit.alpha_err = std::sqrt(cov(1, 1));
  fit.cov_log_a_alpha = cov(0, 1);
  return fit;
}

}  // namespace mwres
