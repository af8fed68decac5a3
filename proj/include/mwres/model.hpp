#pragma once

// Closed-form resonator and TLS physics: saturable loss, standing-wave
// overlap, photon-number conversion, notch S21 response and amplifier noise.

#include <complex>
#include <cstdint>
#include <numbers>
#include <string>

namespace mwres {

using cplx = std::complex<double>;

/// CODATA 2018 exact SI values.
struct PhysicalConstants {
  static constexpr double h = 6.62607015e-34;
  static constexpr double kB = 1.380649e-23;
  static constexpr double hbar = h / (2.0 * std::numbers::pi);
};

enum class ResonatorKind { quarter_wave, multi_wave };

std::string to_string(ResonatorKind kind);
ResonatorKind resonator_kind_from_string(const std::string& s);

/// Electrical description of a single resonance. `n_quarter` counts the
/// quarter-wavelength segments (1 for a quarter-wave resonator).
struct ResonatorDesign {
  ResonatorKind kind = ResonatorKind::quarter_wave;
  int n_quarter = 1;
  double fr = 5.43e9;    // Hz
  double qc = 2.34e6;
  double qi_hp = 3.33e6; // power-independent internal Q
  double phi = 0.0;      // rad, impedance mismatch angle
  double tau = 0.0;      // s, cable delay
  cplx z_inf{1.0, 0.0};

  void validate() const;  // throws std::invalid_argument
};

/// Saturable TLS loss. `nc` is the critical photon density at
/// `nc_ref_temperature`; above that temperature it grows as
/// (T / T_ref)^nc_temp_exponent. The default exponent of zero keeps the
/// critical density temperature independent.
struct TlsModel {
  double xi0 = 1.25e-6;
  double nc = 0.165;
  double fluct_amp = 0.0;  // RMS of quarter-wave δξ over [0.1, 250] Hz, unsaturated
  double nc_temp_exponent = 0.0;
  double nc_ref_temperature = 0.01;  // K

  double critical_density(double temperature) const;
  void validate() const;
};

struct AmplifierModel {
  double tn = 0.3;         // K
  double bandwidth = 10.0; // Hz, noise bandwidth of one sample

  void validate() const;
};

struct DrivePoint {
  double pf = 0.0;          // W on the feedline
  double n_density = 0.0;   // photons per λ/4 segment
  double temperature = 0.01; // K
};

/// tanh(h fr / 2 kB T). Throws std::domain_error for non-positive inputs.
double beta_factor(double fr, double t);

/// β(fr, T) / sqrt(1 + n / nc(T)): the factor multiplying ξ0.
double saturation_factor(double fr, const TlsModel& tls, double n_density, double temperature);

double tls_loss_mean(const ResonatorDesign& design, const TlsModel& tls, const DrivePoint& drive);

/// Standing-wave fluctuation overlap along the resonator, 6 / (N λ).
double rho_z(int n_quarter, double lambda);

/// 1/Ql = 1/Qi + cos(phi)/Qc.
double loaded_q(double qi, double qc, double phi);

/// Internal Q that results when the TLS loss ξ adds to 1/qi_hp.
double internal_q(const ResonatorDesign& design, double xi);

/// Photons per λ/4 segment: 2 Ql² Pf / (ħ ωr² Qc) divided by N.
double photon_density_from_power(const ResonatorDesign& design, double pf, double ql);

/// Feedline power that produces `n_density` at the mean TLS loss of that
/// density. Inverse of photon_density_from_power on the self-consistent Ql.
DrivePoint drive_for_density(const ResonatorDesign& design, const TlsModel& tls, double n_density,
                             double temperature);

/// Self-consistent photon density for a given feedline power (bisection).
DrivePoint drive_for_power(const ResonatorDesign& design, const TlsModel& tls, double pf,
                           double temperature);

/// Notch-type transmission
///   e^{-j2πfτ} z∞ [1 − (Ql/Qc) e^{jφ} / (1 + 2j Ql (f − fr)/fr)].
cplx s21_model(const ResonatorDesign& design, double qi, double f);

/// Circle centre of s21_model at frequency f (centre rotates with the delay).
cplx s21_circle_center(const ResonatorDesign& design, double qi, double f);

/// sqrt(kB Tn B / Pf); throws std::domain_error for Pf <= 0.
double amplifier_sigma(const AmplifierModel& amp, double pf);

}  // namespace mwres
