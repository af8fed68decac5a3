#include "mwres/model.hpp"

#include <cmath>
#include <stdexcept>

namespace mwres {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr cplx kJ{0.0, 1.0};
}  // namespace

std::string to_string(ResonatorKind kind) {
  return kind == ResonatorKind::quarter_wave ? "quarter_wave" : "multi_wave";
}

ResonatorKind resonator_kind_from_string(const std::string& s) {
  if (s == "quarter_wave") return ResonatorKind::quarter_wave;
  if (s == "multi_wave") return ResonatorKind::multi_wave;
  throw std::invalid_argument("unknown resonator kind '" + s + "'");
}

void ResonatorDesign::validate() const {
  if (n_quarter < 1 || n_quarter % 2 == 0)
    throw std::invalid_argument("n_quarter must be an odd integer >= 1");
  if (kind == ResonatorKind::quarter_wave && n_quarter != 1)
    throw std::invalid_argument("quarter_wave design requires n_quarter = 1");
  if (!(fr > 0.0)) throw std::invalid_argument("fr must be > 0");
  if (!(qc > 0.0)) throw std::invalid_argument("qc must be > 0");
  if (!(qi_hp > 0.0)) throw std::invalid_argument("qi_hp must be > 0");
  if (!(std::abs(phi) < kPi / 2)) throw std::invalid_argument("|phi| must be < pi/2");
  if (!std::isfinite(tau)) throw std::invalid_argument("tau must be finite");
  if (!(std::abs(z_inf) > 0.0)) throw std::invalid_argument("|z_inf| must be > 0");
}

double TlsModel::critical_density(double temperature) const {
  if (nc_temp_exponent == 0.0 || temperature <= nc_ref_temperature) return nc;
  return nc * std::pow(temperature / nc_ref_temperature, nc_temp_exponent);
}

void TlsModel::validate() const {
  if (!(xi0 >= 0.0)) throw std::invalid_argument("xi0 must be >= 0");
  if (!(nc > 0.0)) throw std::invalid_argument("nc must be > 0");
  if (!(fluct_amp >= 0.0)) throw std::invalid_argument("fluct_amp must be >= 0");
  if (!(nc_temp_exponent >= 0.0)) throw std::invalid_argument("nc_temp_exponent must be >= 0");
  if (!(nc_ref_temperature > 0.0)) throw std::invalid_argument("nc_ref_temperature must be > 0");
}

void AmplifierModel::validate() const {
  if (!(tn >= 0.0)) throw std::invalid_argument("amplifier tn must be >= 0");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("amplifier bandwidth must be > 0");
}

double beta_factor(double fr, double t) {
  if (!(fr > 0.0)) throw std::domain_error("beta_factor: fr must be > 0");
  if (!(t > 0.0)) throw std::domain_error("beta_factor: temperature must be > 0");
  return std::tanh(PhysicalConstants::h * fr / (2.0 * PhysicalConstants::kB * t));
}

double saturation_factor(double fr, const TlsModel& tls, double n_density, double temperature) {
  if (n_density < 0.0) throw std::domain_error("saturation_factor: negative photon density");
  const double nc = tls.critical_density(temperature);
  return beta_factor(fr, temperature) / std::sqrt(1.0 + n_density / nc);
}

double tls_loss_mean(const ResonatorDesign& design, const TlsModel& tls, const DrivePoint& drive) {
  return tls.xi0 * saturation_factor(design.fr, tls, drive.n_density, drive.temperature);
}

double rho_z(int n_quarter, double lambda) {
  if (n_quarter < 1 || n_quarter % 2 == 0)
    throw std::domain_error("rho_z: n_quarter must be odd and >= 1");
  if (!(lambda > 0.0)) throw std::domain_error("rho_z: lambda must be > 0");
  return 6.0 / (static_cast<double>(n_quarter) * lambda);
}

double loaded_q(double qi, double qc, double phi) {
  return 1.0 / (1.0 / qi + std::cos(phi) / qc);
}

double internal_q(const ResonatorDesign& design, double xi) {
  return 1.0 / (1.0 / design.qi_hp + xi);
}

double photon_density_from_power(const ResonatorDesign& design, double pf, double ql) {
  if (pf < 0.0) throw std::domain_error("photon_density_from_power: negative power");
  const double wr = 2.0 * kPi * design.fr;
  const double n_total = 2.0 * ql * ql * pf / (PhysicalConstants::hbar * wr * wr * design.qc);
  return n_total / static_cast<double>(design.n_quarter);
}

DrivePoint drive_for_density(const ResonatorDesign& design, const TlsModel& tls, double n_density,
                             double temperature) {
  if (n_density < 0.0) throw std::domain_error("drive_for_density: negative photon density");
  DrivePoint d;
  d.n_density = n_density;
  d.temperature = temperature;
  const double ql = loaded_q(internal_q(design, tls_loss_mean(design, tls, d)), design.qc, design.phi);
  // density is linear in pf at fixed Ql
  const double per_watt = photon_density_from_power(design, 1.0, ql);
  d.pf = n_density / per_watt;
  return d;
}

DrivePoint drive_for_power(const ResonatorDesign& design, const TlsModel& tls, double pf,
                           double temperature) {
  if (pf < 0.0) throw std::domain_error("drive_for_power: negative power");
  DrivePoint d;
  d.pf = pf;
  d.temperature = temperature;
  if (pf == 0.0) return d;

  auto residual = [&](double n) {
    DrivePoint probe{pf, n, temperature};
    const double ql =
        loaded_q(internal_q(design, tls_loss_mean(design, tls, probe)), design.qc, design.phi);
    return n - photon_density_from_power(design, pf, ql);
  };
  // the lossless Ql bounds the density from above
  double hi = photon_density_from_power(design, pf, loaded_q(design.qi_hp, design.qc, design.phi));
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  d.n_density = 0.5 * (lo + hi);
  return d;
}

cplx s21_model(const ResonatorDesign& design, double qi, double f) {
  const double ql = loaded_q(qi, design.qc, design.phi);
  const double x = (f - design.fr) / design.fr;
  const cplx bracket =
      1.0 - (ql / design.qc) * std::exp(kJ * design.phi) / (1.0 + 2.0 * kJ * ql * x);
  return std::exp(-kJ * (2.0 * kPi * f * design.tau)) * design.z_inf * bracket;
}

cplx s21_circle_center(const ResonatorDesign& design, double qi, double f) {
  const double ql = loaded_q(qi, design.qc, design.phi);
  return std::exp(-kJ * (2.0 * kPi * f * design.tau)) * design.z_inf *
         (1.0 - 0.5 * (ql / design.qc) * std::exp(kJ * design.phi));
}

double amplifier_sigma(const AmplifierModel& amp, double pf) {
  if (!(pf > 0.0)) throw std::domain_error("amplifier_sigma: feedline power must be > 0");
  return std::sqrt(PhysicalConstants::kB * amp.tn * amp.bandwidth / pf);
}

}  // namespace mwres
