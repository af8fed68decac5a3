#pragma once

// Monte Carlo generation of TLS loss fluctuations and synthetic S21 data.
//
// Each λ/4 segment of a resonator hosts an independent ensemble of
// random-telegraph fluctuators with log-uniformly distributed switching
// rates. The resonator sees the mean over its segments, so the variance of
// the loss fluctuation falls as 1/N without any explicit scaling.

#include "mwres/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace mwres {

using Rng = std::mt19937_64;

/// Independent stream seed derived from a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct Fluctuator {
  double amplitude = 0.0;  // loss step between the two states
  double rate = 1.0;       // Hz, switching rate out of either state
  bool up = false;
};

struct RateBand {
  double lo = 0.01;   // Hz
  double hi = 250.0;  // Hz
};

/// Reference band over which fluct_amp is defined.
inline constexpr double kCalibrationBandLo = 0.1;
inline constexpr double kCalibrationBandHi = 250.0;

struct FluctuatorEnsemble {
  std::vector<std::vector<Fluctuator>> segments;
  std::uint64_t seed = 0;
  double amplitude = 0.0;  // common amplitude of every fluctuator

  std::size_t n_segments() const { return segments.size(); }
  std::size_t size() const;

  /// Current δξ in unsaturated units: mean over segments of Σ a (s − ½).
  double deviation() const;

  /// Steps the ensemble `samples` times by `dt` and returns δξ after each
  /// step. The state is exact for the sampled Markov chain.
  std::vector<double> advance(std::size_t samples, double dt, Rng& rng);

  /// Lets the ensemble evolve for `seconds` without recording.
  void evolve(double seconds, Rng& rng);
};

/// One-sided PSD of a unit-amplitude symmetric telegraph process
/// (autocovariance ¼ e^{−2γ|t|}); knee at γ/π.
double telegraph_psd(double rate, double nu);

/// Integral of telegraph_psd over [f_lo, f_hi].
double telegraph_band_variance(double rate, double f_lo, double f_hi);

/// Expected band variance of one unit fluctuator with log-uniform rate.
double loguniform_band_variance(const RateBand& band, double f_lo, double f_hi);

FluctuatorEnsemble build_fluctuator_ensemble(const ResonatorDesign& design, const TlsModel& tls,
                                             std::size_t k_per_segment, const RateBand& band,
                                             std::uint64_t seed);

/// ξ(t) = tls_loss_mean + saturation · δξ(t) sampled at fs for `duration`.
std::vector<double> simulate_xi_timeseries(const FluctuatorEnsemble& ensemble,
                                           const ResonatorDesign& design, const TlsModel& tls,
                                           const DrivePoint& drive, double fs, double duration,
                                           std::uint64_t seed);

struct SeriesTruth {
  std::vector<double> xi;
  DrivePoint drive;
  double xi_mean_model = 0.0;  // tls_loss_mean at the drive
};

struct S21Series {
  double f_probe = 0.0;
  double fs = 0.0;
  std::vector<cplx> samples;
  std::optional<SeriesTruth> truth;

  double time(std::size_t i) const { return static_cast<double>(i) / fs; }
  double duration() const { return static_cast<double>(samples.size()) / fs; }
};

struct SweepTruth {
  DrivePoint drive;
  double xi = 0.0;
  double qi = 0.0;
  double ql = 0.0;
};

struct S21Sweep {
  std::vector<double> freqs;
  std::vector<cplx> samples;
  std::optional<SweepTruth> truth;
};

/// Adds complex Gaussian amplifier noise with per-quadrature standard
/// deviation σ |z∞| / √2 so that the normalised samples have E|δz|² = σ².
void add_amplifier_noise(std::span<cplx> samples, double sigma, double z_scale, Rng& rng);

S21Series simulate_s21_timeseries(const ResonatorDesign& design, std::span<const double> xi_series,
                                  const DrivePoint& drive, const AmplifierModel& amp, double fs,
                                  std::uint64_t seed, std::optional<double> f_probe = std::nullopt);

S21Sweep simulate_s21_sweep(const ResonatorDesign& design, const TlsModel& tls,
                            const DrivePoint& drive, const AmplifierModel& amp,
                            std::span<const double> freqs, std::uint64_t seed);

/// Frequency grid centred on fr spanning ±span_linewidths · fr/Ql.
std::vector<double> sweep_grid(double fr, double ql, double span_linewidths, std::size_t points);

struct EnsembleSpec {
  std::size_t k_per_segment = 60;
  RateBand band;
};

struct StaircaseProtocol {
  std::vector<double> densities;  // photons per λ/4 segment, one step each
  double dwell = 10.0;            // s
  double fs = 500.0;              // Hz
  double temperature = 0.01;      // K
};

/// A simulated device on the fridge: one fluctuator ensemble that keeps
/// evolving across every measurement taken through the session.
class MeasurementSession {
 public:
  MeasurementSession(ResonatorDesign design, TlsModel tls, AmplifierModel amp,
                     const EnsembleSpec& ensemble, std::uint64_t seed);

  const ResonatorDesign& design() const { return design_; }
  const TlsModel& tls() const { return tls_; }
  const AmplifierModel& amplifier() const { return amp_; }
  const FluctuatorEnsemble& ensemble() const { return ensemble_; }
  double clock() const { return clock_; }

  /// Fixed-frequency record; the probe defaults to fr.
  S21Series record(const DrivePoint& drive, double fs, double duration,
                   std::optional<double> f_probe = std::nullopt);

  std::vector<S21Series> staircase(const StaircaseProtocol& protocol);

  void idle(double seconds);

 private:
  ResonatorDesign design_;
  TlsModel tls_;
  AmplifierModel amp_;
  FluctuatorEnsemble ensemble_;
  Rng rng_;
  double clock_ = 0.0;
};

std::vector<S21Series> run_power_staircase(const ResonatorDesign& design, const TlsModel& tls,
                                           const AmplifierModel& amp,
                                           const StaircaseProtocol& protocol,
                                           const EnsembleSpec& ensemble, std::uint64_t seed);

}  // namespace mwres
