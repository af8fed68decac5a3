#pragma once

// Resonance extraction: cable-delay removal, algebraic circle fit, phase
// fit, the diameter-correction composition, and the conformal map that turns
// fixed-frequency S21 samples into instantaneous internal loss.

#include "mwres/errors.hpp"
#include "mwres/model.hpp"
#include "mwres/synth.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace mwres {

struct SweepFitSigmas {
  double fr = 0.0;
  double ql = 0.0;
  double qc = 0.0;
  double qi = 0.0;
  double phi = 0.0;
  double tau = 0.0;
  double z_inf = 0.0;  // on |z∞|
};

struct SweepFitResult {
  double fr = 0.0;
  double ql = 0.0;
  double qc = 0.0;
  double qi = 0.0;
  double phi = 0.0;
  double tau = 0.0;
  cplx z_inf{1.0, 0.0};
  SweepFitSigmas sigmas;
  double residual_rms = 0.0;
  bool refined = false;

  /// Design carrying the fitted power-independent parameters.
  ResonatorDesign as_design(int n_quarter = 1) const;
};

struct CircleFit {
  cplx center;
  double radius = 0.0;
  double rms = 0.0;
};

/// Taubin algebraic circle fit. Throws NumericalError("circle_fit") for
/// fewer than three points or collinear/degenerate input.
CircleFit circle_fit(std::span<const cplx> points);

struct DelayEstimate {
  double tau = 0.0;
  std::vector<cplx> unwrapped;  // e^{+j2πfτ} S21
};

/// Cable delay from a linear fit of the off-resonant phase. The resonance
/// tail is absorbed by 1/u, 1/u², 1/u³ regressors (u = detuning in
/// linewidths) so it does not bias the slope.
DelayEstimate estimate_cable_delay(const S21Sweep& sweep);

struct PhaseFit {
  double fr = 0.0;
  double ql = 0.0;
  double theta = 0.0;
  int orientation = 1;  // +1: phase decreases through resonance
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (fr, ql, theta)
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
};

class PhaseFitError : public NumericalError {
 public:
  PhaseFitError(const std::string& message, PhaseFit last)
      : NumericalError("phase_fit", message), last_(last) {}
  const PhaseFit& last_iterate() const { return last_; }

 private:
  PhaseFit last_;
};

/// Fits arg(z − zc) = θ − 2·orientation·atan(2 Ql (f − fr) / fr).
PhaseFit phase_fit(std::span<const cplx> z, cplx center, std::span<const double> freqs);

struct DcmOptions {
  /// Polish the DCM estimate with a joint fit of the full S21 model and take
  /// the 1σ uncertainties from its Jacobian.
  bool refine = true;
};

SweepFitResult dcm_fit(const S21Sweep& sweep, const DcmOptions& options = {});

struct MappedSeries {
  std::vector<double> t;
  std::vector<double> inv_qi;
  std::vector<double> frac_detune;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return t.size(); }
  std::size_t n_valid() const;
};

inline constexpr double kConformalFloor = 1e-9;

MappedSeries conformal_map_timeseries(const S21Series& series, const SweepFitResult& ref);

struct LossEstimate {
  double xi = 0.0;
  double std_error = 0.0;
  double mean_inv_qi = 0.0;
  std::size_t n_valid = 0;
};

LossEstimate extract_tls_loss(const MappedSeries& mapped, double qi_hp);

}  // namespace mwres
