#include "mwres/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mwres {

namespace {
constexpr double kPi = std::numbers::pi;

// Flip probability of a symmetric telegraph state over an interval dt.
double flip_probability(double rate, double dt) {
  return 0.5 * (-std::expm1(-2.0 * rate * dt));
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t FluctuatorEnsemble::size() const {
  std::size_t n = 0;
  for (const auto& seg : segments) n += seg.size();
  return n;
}

double FluctuatorEnsemble::deviation() const {
  if (segments.empty()) return 0.0;
  long long up = 0;
  for (const auto& seg : segments)
    for (const auto& f : seg) up += f.up ? 1 : 0;
  const double centred = static_cast<double>(up) - 0.5 * static_cast<double>(size());
  return amplitude * centred / static_cast<double>(segments.size());
}

std::vector<double> FluctuatorEnsemble::advance(std::size_t samples, double dt, Rng& rng) {
  if (segments.empty() || size() == 0) return std::vector<double>(samples, 0.0);
  if (!(dt > 0.0)) throw std::invalid_argument("FluctuatorEnsemble::advance: dt must be > 0");

  // Integer bookkeeping of the number of "up" fluctuators keeps the
  // reconstruction exact regardless of record length.
  std::vector<long long> diff(samples + 1, 0);
  long long up0 = 0;
  for (auto& seg : segments) {
    for (auto& f : seg) {
      if (f.up) ++up0;
      const double p = flip_probability(f.rate, dt);
      if (!(p > 0.0)) continue;
      std::geometric_distribution<long long> wait(p);
      std::size_t m = 0;
      while (true) {
        const long long g = wait(rng) + 1;
        if (static_cast<unsigned long long>(g) > samples - m) break;
        m += static_cast<std::size_t>(g);
        diff[m - 1] += f.up ? -1 : 1;
        f.up = !f.up;
      }
    }
  }

  std::vector<double> out(samples);
  const double half_total = 0.5 * static_cast<double>(size());
  const double scale = amplitude / static_cast<double>(segments.size());
  long long up = up0;
  for (std::size_t i = 0; i < samples; ++i) {
    up += diff[i];
    out[i] = scale * (static_cast<double>(up) - half_total);
  }
  return out;
}

void FluctuatorEnsemble::evolve(double seconds, Rng& rng) {
  if (seconds <= 0.0) return;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& seg : segments)
    for (auto& f : seg)
      if (uni(rng) < flip_probability(f.rate, seconds)) f.up = !f.up;
}

double telegraph_psd(double rate, double nu) {
  const double lambda = 2.0 * rate;
  const double w = 2.0 * kPi * nu;
  return lambda / (lambda * lambda + w * w);
}

double telegraph_band_variance(double rate, double f_lo, double f_hi) {
  const double lambda = 2.0 * rate;
  return (std::atan(2.0 * kPi * f_hi / lambda) - std::atan(2.0 * kPi * f_lo / lambda)) /
         (2.0 * kPi);
}

double loguniform_band_variance(const RateBand& band, double f_lo, double f_hi) {
  // Simpson's rule in log-rate
  const int n = 4000;
  const double a = std::log(band.lo);
  const double b = std::log(band.hi);
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * telegraph_band_variance(std::exp(a + i * h), f_lo, f_hi);
  }
  return s * h / 3.0 / (b - a);
}

FluctuatorEnsemble build_fluctuator_ensemble(const ResonatorDesign& design, const TlsModel& tls,
                                             std::size_t k_per_segment, const RateBand& band,
                                             std::uint64_t seed) {
  if (k_per_segment == 0)
    throw std::invalid_argument("build_fluctuator_ensemble: k_per_segment must be >= 1");
  if (!(band.lo > 0.0) || !(band.hi > band.lo))
    throw std::invalid_argument("build_fluctuator_ensemble: rate band must satisfy 0 < lo < hi");

  FluctuatorEnsemble ens;
  ens.seed = seed;
  const double per_unit =
      loguniform_band_variance(band, kCalibrationBandLo, kCalibrationBandHi);
  ens.amplitude = tls.fluct_amp / std::sqrt(static_cast<double>(k_per_segment) * per_unit);

  Rng rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double log_span = std::log(band.hi / band.lo);
  ens.segments.resize(static_cast<std::size_t>(design.n_quarter));
  for (auto& seg : ens.segments) {
    seg.resize(k_per_segment);
    // stratified log-uniform draw: one rate per equal-width log stratum
    for (std::size_t i = 0; i < k_per_segment; ++i) {
      const double u = (static_cast<double>(i) + uni(rng)) / static_cast<double>(k_per_segment);
      seg[i].rate = band.lo * std::exp(u * log_span);
      seg[i].amplitude = ens.amplitude;
      seg[i].up = uni(rng) < 0.5;
    }
  }
  return ens;
}

std::vector<double> simulate_xi_timeseries(const FluctuatorEnsemble& ensemble,
                                           const ResonatorDesign& design, const TlsModel& tls,
                                           const DrivePoint& drive, double fs, double duration,
                                           std::uint64_t seed) {
  if (!(fs > 0.0)) throw std::invalid_argument("simulate_xi_timeseries: fs must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n < 2) throw std::invalid_argument("simulate_xi_timeseries: duration * fs must be >= 2");

  const double sat = saturation_factor(design.fr, tls, drive.n_density, drive.temperature);
  const double mean = tls.xi0 * sat;
  FluctuatorEnsemble ens = ensemble;
  Rng rng(derive_seed(seed, 1));
  std::vector<double> xi = ens.advance(n, 1.0 / fs, rng);
  for (double& v : xi) v = mean + sat * v;
  return xi;
}

void add_amplifier_noise(std::span<cplx> samples, double sigma, double z_scale, Rng& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> gauss(0.0, sigma * z_scale / std::numbers::sqrt2);
  for (auto& s : samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += cplx(re, im);
  }
}

S21Series simulate_s21_timeseries(const ResonatorDesign& design, std::span<const double> xi_series,
                                  const DrivePoint& drive, const AmplifierModel& amp, double fs,
                                  std::uint64_t seed, std::optional<double> f_probe) {
  const double sigma = amplifier_sigma(amp, drive.pf);
  S21Series out;
  out.fs = fs;
  out.f_probe = f_probe.value_or(design.fr);
  out.samples.resize(xi_series.size());
  for (std::size_t i = 0; i < xi_series.size(); ++i)
    out.samples[i] = s21_model(design, internal_q(design, xi_series[i]), out.f_probe);
  Rng rng(derive_seed(seed, 2));
  add_amplifier_noise(out.samples, sigma, std::abs(design.z_inf), rng);
  SeriesTruth truth;
  truth.xi.assign(xi_series.begin(), xi_series.end());
  truth.drive = drive;
  out.truth = std::move(truth);
  return out;
}

S21Sweep simulate_s21_sweep(const ResonatorDesign& design, const TlsModel& tls,
                            const DrivePoint& drive, const AmplifierModel& amp,
                            std::span<const double> freqs, std::uint64_t seed) {
  for (std::size_t i = 1; i < freqs.size(); ++i)
    if (!(freqs[i] > freqs[i - 1]))
      throw std::invalid_argument("simulate_s21_sweep: frequencies must be strictly increasing");
  const double sigma = amplifier_sigma(amp, drive.pf);
  const double xi = tls_loss_mean(design, tls, drive);
  const double qi = internal_q(design, xi);

  S21Sweep out;
  out.freqs.assign(freqs.begin(), freqs.end());
  out.samples.resize(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) out.samples[i] = s21_model(design, qi, freqs[i]);
  Rng rng(derive_seed(seed, 3));
  add_amplifier_noise(out.samples, sigma, std::abs(design.z_inf), rng);
  out.truth = SweepTruth{drive, xi, qi, loaded_q(qi, design.qc, design.phi)};
  return out;
}

std::vector<double> sweep_grid(double fr, double ql, double span_linewidths, std::size_t points) {
  if (points < 2) throw std::invalid_argument("sweep_grid: need at least 2 points");
  std::vector<double> f(points);
  const double half = span_linewidths * fr / ql;
  for (std::size_t i = 0; i < points; ++i)
    f[i] = fr - half + 2.0 * half * static_cast<double>(i) / static_cast<double>(points - 1);
  return f;
}

MeasurementSession::MeasurementSession(ResonatorDesign design, TlsModel tls, AmplifierModel amp,
                                       const EnsembleSpec& ensemble, std::uint64_t seed)
    : design_(design), tls_(tls), amp_(amp), rng_(derive_seed(seed, 4)) {
  design_.validate();
  tls_.validate();
  amp_.validate();
  ensemble_ = build_fluctuator_ensemble(design_, tls_, ensemble.k_per_segment, ensemble.band, seed);
}

S21Series MeasurementSession::record(const DrivePoint& drive, double fs, double duration,
                                     std::optional<double> f_probe) {
  if (!(fs > 0.0)) throw std::invalid_argument("record: fs must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n < 2) throw std::invalid_argument("record: duration * fs must be >= 2");
  const double sigma = amplifier_sigma(amp_, drive.pf);

  const double sat = saturation_factor(design_.fr, tls_, drive.n_density, drive.temperature);
  const double mean = tls_.xi0 * sat;
  std::vector<double> xi = ensemble_.advance(n, 1.0 / fs, rng_);
  for (double& v : xi) v = mean + sat * v;

  S21Series out;
  out.fs = fs;
  out.f_probe = f_probe.value_or(design_.fr);
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = s21_model(design_, internal_q(design_, xi[i]), out.f_probe);
  add_amplifier_noise(out.samples, sigma, std::abs(design_.z_inf), rng_);
  out.truth = SeriesTruth{std::move(xi), drive, mean};
  clock_ += duration;
  return out;
}

std::vector<S21Series> MeasurementSession::staircase(const StaircaseProtocol& protocol) {
  if (protocol.densities.empty())
    throw std::invalid_argument("staircase: at least one power step is required");
  std::vector<S21Series> out;
  out.reserve(protocol.densities.size());
  for (double n : protocol.densities) {
    const DrivePoint drive = drive_for_density(design_, tls_, n, protocol.temperature);
    out.push_back(record(drive, protocol.fs, protocol.dwell));
  }
  return out;
}

void MeasurementSession::idle(double seconds) {
  ensemble_.evolve(seconds, rng_);
  clock_ += seconds;
}

std::vector<S21Series> run_power_staircase(const ResonatorDesign& design, const TlsModel& tls,
                                           const AmplifierModel& amp,
                                           const StaircaseProtocol& protocol,
                                           const EnsembleSpec& ensemble, std::uint64_t seed) {
  MeasurementSession session(design, tls, amp, ensemble, seed);
  return session.staircase(protocol);
}

}  // namespace mwres
