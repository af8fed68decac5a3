#include "mwres/fit.hpp"

#include "mwres/levmar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mwres {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kJ{0.0, 1.0};

std::vector<double> unwrap(std::vector<double> phase) {
  for (std::size_t i = 1; i < phase.size(); ++i) {
    double d = phase[i] - phase[i - 1];
    d -= 2.0 * kPi * std::round(d / (2.0 * kPi));
    phase[i] = phase[i - 1] + d;
  }
  return phase;
}

std::vector<double> unwrapped_arg(std::span<const cplx> z, cplx origin) {
  std::vector<double> a(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::arg(z[i] - origin);
  return unwrap(std::move(a));
}

// Linear interpolation of the abscissa where y crosses `level` between i and i+1.
double crossing(std::span<const double> x, std::span<const double> y, std::size_t i, double level) {
  const double dy = y[i + 1] - y[i];
  if (dy == 0.0) return x[i];
  return x[i] + (level - y[i]) * (x[i + 1] - x[i]) / dy;
}

struct DipEstimate {
  bool found = false;
  double f0 = 0.0;
  double ql = 0.0;
};

// fr from the |S21| minimum, Ql from the full width where the power dip is
// half of its maximum (|S21| at √½ of the dip in power).
DipEstimate estimate_dip(std::span<const double> freqs, std::span<const cplx> s21) {
  const std::size_t n = freqs.size();
  std::vector<double> mag2(n);
  for (std::size_t i = 0; i < n; ++i) mag2[i] = std::norm(s21[i]);
  const double top = *std::max_element(mag2.begin(), mag2.end());
  const auto imin = static_cast<std::size_t>(
      std::distance(mag2.begin(), std::min_element(mag2.begin(), mag2.end())));
  std::vector<double> dip(n);
  for (std::size_t i = 0; i < n; ++i) dip[i] = 1.0 - mag2[i] / top;

  DipEstimate est;
  est.f0 = freqs[imin];
  if (dip[imin] < 1e-6) return est;
  const double half = 0.5 * dip[imin];
  double f_lo = freqs.front();
  double f_hi = freqs.back();
  for (std::size_t i = imin; i > 0; --i)
    if (dip[i - 1] < half) {
      f_lo = crossing(freqs, dip, i - 1, half);
      break;
    }
  for (std::size_t i = imin; i + 1 < n; ++i)
    if (dip[i + 1] < half) {
      f_hi = crossing(freqs, dip, i, half);
      break;
    }
  const double width = std::max(f_hi - f_lo, freqs[1] - freqs[0]);
  est.found = true;
  est.ql = est.f0 / width;
  return est;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

ResonatorDesign SweepFitResult::as_design(int n_quarter) const {
  ResonatorDesign d;
  d.kind = n_quarter == 1 ? ResonatorKind::quarter_wave : ResonatorKind::multi_wave;
  d.n_quarter = n_quarter;
  d.fr = fr;
  d.qc = qc;
  d.qi_hp = qi;
  d.phi = phi;
  d.tau = tau;
  d.z_inf = z_inf;
  return d;
}

CircleFit circle_fit(std::span<const cplx> points) {
  const std::size_t n = points.size();
  if (n < 3) throw NumericalError("circle_fit", "at least 3 points are required");

  cplx mean{0.0, 0.0};
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& p : points) spread = std::max(spread, std::abs(p - mean));
  if (!(spread > 1e-9 * std::max(1.0, std::abs(mean))))
    throw NumericalError("circle_fit", "points are coincident; no resonance circle present");

  // Taubin fit on centred, normalised coordinates (Chernov's Newton variant)
  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (const auto& p : points) {
    const double xi = (p.real() - mean.real()) / spread;
    const double yi = (p.imag() - mean.imag()) / spread;
    const double zi = xi * xi + yi * yi;
    mxy += xi * yi;
    mxx += xi * xi;
    myy += yi * yi;
    mxz += xi * zi;
    myz += yi * zi;
    mzz += zi * zi;
  }
  const double dn = static_cast<double>(n);
  mxx /= dn; myy /= dn; mxy /= dn; mxz /= dn; myz /= dn; mzz /= dn;

  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;
  const double a3 = 4.0 * mz;
  const double a2 = -3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
  const double a22 = a2 + a2;
  const double a33 = a3 + a3 + a3;

  double x = 0.0;
  double y = a0;
  for (int iter = 0; iter < 99; ++iter) {
    const double dy = a1 + x * (a22 + a33 * x);
    const double xnew = x - y / dy;
    if (xnew == x || !std::isfinite(xnew)) break;
    const double ynew = a0 + xnew * (a1 + xnew * (a2 + xnew * a3));
    if (std::abs(ynew) >= std::abs(y)) break;
    x = xnew;
    y = ynew;
  }

  const double det = x * x - x * mz + cov_xy;
  const double xc = (mxz * (myy - x) - myz * mxy) / det / 2.0;
  const double yc = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
  const double r = std::sqrt(xc * xc + yc * yc + mz);
  if (!std::isfinite(xc) || !std::isfinite(yc) || !std::isfinite(r) || r > 1e8)
    throw NumericalError("circle_fit", "points are collinear; circle is undefined");

  CircleFit out;
  out.center = mean + spread * cplx(xc, yc);
  out.radius = spread * r;
  double ss = 0.0;
  for (const auto& p : points) {
    const double d = std::abs(p - out.center) - out.radius;
    ss += d * d;
  }
  out.rms = std::sqrt(ss / dn);
  return out;
}

DelayEstimate estimate_cable_delay(const S21Sweep& sweep) {
  const auto& f = sweep.freqs;
  const auto& s = sweep.samples;
  if (f.size() != s.size() || f.size() < 8)
    throw NumericalError("cable_delay", "sweep needs at least 8 points");
  for (std::size_t i = 1; i < f.size(); ++i)
    if (!(f[i] > f[i - 1]))
      throw NumericalError("cable_delay", "sweep frequencies must be strictly increasing");

  const std::vector<double> phase = unwrapped_arg(s, cplx{0.0, 0.0});
  const DipEstimate dip = estimate_dip(f, s);

  std::vector<std::size_t> wing;
  Eigen::Index n_cols = 2;
  double scale = (f.back() - f.front()) / 2.0;
  if (!dip.found) {
    wing.resize(f.size());
    std::iota(wing.begin(), wing.end(), 0);
  } else {
    scale = dip.f0 / dip.ql;  // one linewidth
    for (std::size_t i = 0; i < f.size(); ++i)
      if (std::abs(f[i] - dip.f0) > 5.0 * scale) wing.push_back(i);
    if (wing.size() * 5 < f.size() || wing.size() < 8)
      throw NumericalError("cable_delay",
                           "insufficient off-resonant points (need >= 20% beyond 5 linewidths); "
                           "widen the sweep span");
    n_cols = 5;
  }

  const double centre = dip.found ? dip.f0 : 0.5 * (f.front() + f.back());
  Eigen::MatrixXd a(static_cast<Eigen::Index>(wing.size()), n_cols);
  Eigen::VectorXd b(static_cast<Eigen::Index>(wing.size()));
  for (std::size_t k = 0; k < wing.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const double u = (f[wing[k]] - centre) / scale;
    a(row, 0) = 1.0;
    a(row, 1) = u;
    if (n_cols > 2) {
      a(row, 2) = 1.0 / u;
      a(row, 3) = 1.0 / (u * u);
      a(row, 4) = 1.0 / (u * u * u);
    }
    b[row] = phase[wing[k]];
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);

  DelayEstimate out;
  out.tau = -coef[1] / scale / (2.0 * kPi);
  out.unwrapped.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    out.unwrapped[i] = std::exp(kJ * (2.0 * kPi * f[i] * out.tau)) * s[i];
  return out;
}

PhaseFit phase_fit(std::span<const cplx> z, cplx center, std::span<const double> freqs) {
  const std::size_t n = z.size();
  if (n != freqs.size() || n < 4) throw NumericalError("phase_fit", "need at least 4 points");
  const std::vector<double> a = unwrapped_arg(z, center);

  PhaseFit init;
  init.orientation = a.front() > a.back() ? 1 : -1;
  const double sgn = init.orientation;
  init.theta = 0.5 * (a.front() + a.back());

  // a(f) − θ runs from +π·sgn to −π·sgn; find the θ and θ ± π/2 crossings
  std::vector<double> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = sgn * (a[i] - init.theta);
  auto find_crossing = [&](double level) -> double {
    for (std::size_t i = 0; i + 1 < n; ++i)
      if ((rel[i] - level) * (rel[i + 1] - level) <= 0.0 && rel[i] != rel[i + 1])
        return crossing(freqs, rel, i, level);
    return std::numeric_limits<double>::quiet_NaN();
  };
  init.fr = find_crossing(0.0);
  if (!std::isfinite(init.fr)) init.fr = 0.5 * (freqs.front() + freqs.back());
  const double f_hi = find_crossing(-kPi / 2.0);
  const double f_lo = find_crossing(kPi / 2.0);
  if (std::isfinite(f_hi) && std::isfinite(f_lo) && f_hi > f_lo)
    init.ql = init.fr / (f_hi - f_lo);
  else
    init.ql = init.fr / (0.1 * (freqs.back() - freqs.front()));

  const double fr0 = init.fr;
  const double ql0 = init.ql;
  const double lw = fr0 / ql0;
  auto model = [&](const Eigen::VectorXd& p, double f) {
    const double fr = fr0 + p[0] * lw;
    const double ql = p[1] * ql0;
    return p[2] - 2.0 * sgn * std::atan(2.0 * ql * (f - fr) / fr);
  };
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = model(p, freqs[i]) - a[i];
    return r;
  };

  Eigen::VectorXd p0(3);
  p0 << 0.0, 1.0, init.theta;
  const LeastSquaresResult ls = solve_least_squares(residuals, p0, static_cast<int>(n));

  PhaseFit out;
  out.orientation = init.orientation;
  out.fr = fr0 + ls.x[0] * lw;
  out.ql = ls.x[1] * ql0;
  out.theta = ls.x[2];
  Eigen::Matrix3d scale = Eigen::Matrix3d::Zero();
  scale(0, 0) = lw;
  scale(1, 1) = ql0;
  scale(2, 2) = 1.0;
  out.covariance = scale * ls.covariance * scale;
  out.rms = std::sqrt(ls.rss / static_cast<double>(n));
  out.iterations = ls.iterations;
  out.converged = ls.converged && out.ql > 0.0 && std::isfinite(out.fr);
  if (!out.converged)
    throw PhaseFitError("no convergence within the iteration bound (status " +
                            std::to_string(ls.status) + ")",
                        out);
  return out;
}

namespace {

// Joint least-squares polish of every model parameter. The delay is
// referenced to the sweep centre so that it decouples from arg z∞.
bool refine_fit(const S21Sweep& sweep, SweepFitResult& fit) {
  const auto& f = sweep.freqs;
  const auto m = f.size();
  const double fc = 0.5 * (f.front() + f.back());
  const double span = f.back() - f.front();
  const double lw = fit.fr / fit.ql;
  const cplx zref = fit.z_inf * std::exp(-kJ * (2.0 * kPi * fc * fit.tau));
  const double zs = std::abs(zref);
  const SweepFitResult base = fit;

  auto unpack = [&](const Eigen::VectorXd& p) {
    SweepFitResult r = base;
    r.fr = base.fr + p[0] * lw;
    r.ql = base.ql * p[1];
    r.qc = base.qc * p[2];
    r.phi = p[3];
    r.tau = base.tau + p[4] / (2.0 * kPi * span);
    return r;
  };
  auto residuals = [&](const Eigen::VectorXd& p) {
    const SweepFitResult r = unpack(p);
    const cplx zp = cplx(p[5], p[6]) * zs;
    const cplx a = (r.ql / r.qc) * std::exp(kJ * r.phi);
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * m));
    for (std::size_t i = 0; i < m; ++i) {
      const double x = (f[i] - r.fr) / r.fr;
      const cplx model = std::exp(-kJ * (2.0 * kPi * (f[i] - fc) * r.tau)) * zp *
                         (1.0 - a / (1.0 + 2.0 * kJ * r.ql * x));
      const cplx d = (model - sweep.samples[i]) / zs;
      out[static_cast<Eigen::Index>(2 * i)] = d.real();
      out[static_cast<Eigen::Index>(2 * i + 1)] = d.imag();
    }
    return out;
  };

  Eigen::VectorXd p0(7);
  p0 << 0.0, 1.0, 1.0, fit.phi, 0.0, zref.real() / zs, zref.imag() / zs;
  const double rss0 = residuals(p0).squaredNorm();
  LeastSquaresResult ls;
  try {
    ls = solve_least_squares(residuals, p0, static_cast<int>(2 * m));
  } catch (const std::exception&) {
    return false;
  }
  if (!ls.converged || !(ls.rss <= rss0)) return false;

  SweepFitResult r = unpack(ls.x);
  if (!(r.ql > 0.0) || !(r.qc > 0.0) || !(std::abs(r.phi) < kPi / 2)) return false;
  const cplx zp = cplx(ls.x[5], ls.x[6]) * zs;
  r.z_inf = zp * std::exp(kJ * (2.0 * kPi * fc * r.tau));
  r.qi = 1.0 / (1.0 / r.ql - std::cos(r.phi) / r.qc);
  if (!(r.qi > 0.0)) return false;

  const Eigen::MatrixXd& c = ls.covariance;
  r.sigmas.fr = std::sqrt(c(0, 0)) * lw;
  r.sigmas.ql = std::sqrt(c(1, 1)) * base.ql;
  r.sigmas.qc = std::sqrt(c(2, 2)) * base.qc;
  r.sigmas.phi = std::sqrt(c(3, 3));
  r.sigmas.tau = std::sqrt(c(4, 4)) / (2.0 * kPi * span);
  {
    // |z∞| = |z'| · zs with z' = p5 + j p6
    Eigen::Vector2d g(ls.x[5], ls.x[6]);
    g /= g.norm();
    r.sigmas.z_inf = std::sqrt(g.dot(c.block<2, 2>(5, 5) * g)) * zs;
  }
  {
    // 1/Qi = 1/Ql − cos φ / Qc
    Eigen::Vector3d g(-1.0 / (r.ql * r.ql) * base.ql, std::cos(r.phi) / (r.qc * r.qc) * base.qc,
                      std::sin(r.phi) / r.qc);
    const double var_inv = g.dot(c.block<3, 3>(1, 1) * g);
    r.sigmas.qi = r.qi * r.qi * std::sqrt(var_inv);
  }
  r.residual_rms = std::sqrt(ls.rss / static_cast<double>(m)) * zs;
  r.refined = true;
  fit = r;
  return true;
}

}  // namespace

SweepFitResult dcm_fit(const S21Sweep& sweep, const DcmOptions& options) {
  const DelayEstimate delay = estimate_cable_delay(sweep);
  const CircleFit circle = circle_fit(delay.unwrapped);
  const PhaseFit phase = phase_fit(delay.unwrapped, circle.center, sweep.freqs);
  if (phase.orientation != 1)
    throw NumericalError("dcm", "phase increases through resonance; data uses the conjugate "
                                "convention (conjugate S21 before fitting)");

  SweepFitResult fit;
  fit.fr = phase.fr;
  fit.ql = phase.ql;
  fit.tau = delay.tau;
  // the off-resonant point lies diametrically opposite the resonance point
  fit.z_inf = circle.center - circle.radius * std::exp(kJ * phase.theta);
  const cplx a = 2.0 * (fit.z_inf - circle.center) / fit.z_inf;  // (Ql/Qc) e^{jφ}
  fit.phi = std::arg(a);
  fit.qc = fit.ql / std::abs(a);
  if (!(std::abs(fit.phi) < kPi / 2))
    throw NumericalError("dcm", "mismatch angle outside (-pi/2, pi/2); sweep is not a notch");
  const double inv_qi = 1.0 / fit.ql - std::cos(fit.phi) / fit.qc;
  if (!(inv_qi > 0.0)) throw NumericalError("dcm", "non-physical internal Q (1/Qi <= 0)");
  fit.qi = 1.0 / inv_qi;

  // stage-wise propagation from the phase-fit covariance and the circle rms
  const double m = static_cast<double>(sweep.freqs.size());
  const double s_r = circle.rms / std::sqrt(m);
  const double s_c = circle.rms * std::sqrt(2.0 / m);
  const double s_theta = std::sqrt(phase.covariance(2, 2));
  fit.sigmas.fr = std::sqrt(phase.covariance(0, 0));
  fit.sigmas.ql = std::sqrt(phase.covariance(1, 1));
  fit.sigmas.z_inf = std::sqrt(s_c * s_c + s_r * s_r + std::pow(circle.radius * s_theta, 2));
  const double rel_qc = std::sqrt(std::pow(fit.sigmas.ql / fit.ql, 2) +
                                  std::pow(fit.sigmas.z_inf / std::abs(fit.z_inf), 2) +
                                  std::pow(s_r / circle.radius, 2));
  fit.sigmas.qc = fit.qc * rel_qc;
  fit.sigmas.phi = std::sqrt(s_theta * s_theta + std::pow(s_c / circle.radius, 2));
  const double var_inv = std::pow(fit.sigmas.ql / (fit.ql * fit.ql), 2) +
                         std::pow(std::cos(fit.phi) * fit.sigmas.qc / (fit.qc * fit.qc), 2) +
                         std::pow(std::sin(fit.phi) * fit.sigmas.phi / fit.qc, 2);
  fit.sigmas.qi = fit.qi * fit.qi * std::sqrt(var_inv);
  {
    double ss = 0.0;
    const ResonatorDesign d = fit.as_design();
    for (std::size_t i = 0; i < sweep.freqs.size(); ++i)
      ss += std::norm(s21_model(d, fit.qi, sweep.freqs[i]) - sweep.samples[i]);
    fit.residual_rms = std::sqrt(ss / m);
  }

  if (options.refine) refine_fit(sweep, fit);
  fit.phi = wrap_angle(fit.phi);
  return fit;
}

std::size_t MappedSeries::n_valid() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

MappedSeries conformal_map_timeseries(const S21Series& series, const SweepFitResult& ref) {
  if (!(series.fs > 0.0)) throw NumericalError("conformal_map", "series sample rate must be > 0");
  const std::size_t n = series.samples.size();
  MappedSeries out;
  out.t.resize(n);
  out.inv_qi.resize(n);
  out.frac_detune.resize(n);
  out.valid.resize(n);
  const cplx unwind = std::exp(kJ * (2.0 * kPi * series.f_probe * ref.tau)) / ref.z_inf;
  const cplx rot = std::exp(kJ * ref.phi);
  const double offset = std::cos(ref.phi) / ref.qc;
  for (std::size_t i = 0; i < n; ++i) {
    out.t[i] = series.time(i);
    const cplx zn = unwind * series.samples[i];
    const cplx d = 1.0 - zn;
    if (!(std::abs(d) >= kConformalFloor) || !std::isfinite(std::abs(d))) {
      out.valid[i] = 0;
      continue;
    }
    const cplx w = rot / (ref.qc * d);
    out.inv_qi[i] = w.real() - offset;
    out.frac_detune[i] = w.imag();
    out.valid[i] = 1;
  }
  return out;
}

LossEstimate extract_tls_loss(const MappedSeries& mapped, double qi_hp) {
  LossEstimate est;
  double sum = 0.0;
  for (std::size_t i = 0; i < mapped.size(); ++i)
    if (mapped.valid[i]) {
      sum += mapped.inv_qi[i];
      ++est.n_valid;
    }
  if (est.n_valid == 0) throw NumericalError("extract_tls_loss", "no valid samples after mapping");
  const double mean = sum / static_cast<double>(est.n_valid);
  double ss = 0.0;
  for (std::size_t i = 0; i < mapped.size(); ++i)
    if (mapped.valid[i]) ss += std::pow(mapped.inv_qi[i] - mean, 2);
  est.mean_inv_qi = mean;
  est.xi = mean - 1.0 / qi_hp;
  est.std_error = est.n_valid > 1
                      ? std::sqrt(ss / static_cast<double>(est.n_valid - 1)) /
                            std::sqrt(static_cast<double>(est.n_valid))
                      : std::numeric_limits<double>::infinity();
  return est;
}

}  // namespace mwres
