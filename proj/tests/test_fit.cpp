#include "mwres/fit.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace mwres;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

ResonatorDesign skewed_design() {
  ResonatorDesign d;
  d.fr = 5.43e9;
  d.qc = 2.34e6;
  d.phi = 0.3;
  d.tau = 55e-9;
  d.z_inf = cplx(0.6, 0.35);
  return d;
}

S21Sweep noiseless_sweep(const ResonatorDesign& d, double qi, double span = 10.0, std::size_t points = 401) {
  S21Sweep s;
  s.freqs = sweep_grid(d.fr, loaded_q(qi, d.qc, d.phi), span, points);
  for (double f : s.freqs) s.samples.push_back(s21_model(d, qi, f));
  return s;
}

}  // namespace

TEST_CASE("circle fit recovers an exact circle") {
  const cplx c(0.3, -1.2);
  const double r = 0.07;
  std::vector<cplx> pts;
  for (int i = 0; i < 17; ++i) pts.push_back(c + r * std::exp(cplx(0, 0.2 + 0.3 * i)));
  const CircleFit fit = circle_fit(pts);
  CHECK(std::abs(fit.center - c) < 1e-12);
  CHECK(fit.radius == Approx(r).epsilon(1e-10));
  CHECK(fit.rms < 1e-12);
}

TEST_CASE("circle fit rejects degenerate input") {
  CHECK_THROWS_AS(circle_fit(std::vector<cplx>{{0, 0}, {1, 1}}), NumericalError);
  CHECK_THROWS_AS(circle_fit(std::vector<cplx>(5, cplx(0.2, 0.1))), NumericalError);
  std::vector<cplx> line;
  for (int i = 0; i < 9; ++i) line.push_back(cplx(0.1 * i, 0.05 * i));
  CHECK_THROWS_AS(circle_fit(line), NumericalError);
}

TEST_CASE("cable delay is recovered from the off-resonant phase") {
  const ResonatorDesign d = skewed_design();
  const S21Sweep s = noiseless_sweep(d, 3.33e6, 30.0, 801);
  const DelayEstimate est = estimate_cable_delay(s);
  CHECK(est.tau == Approx(d.tau).epsilon(1e-3));
  // a narrow span leaves too little off-resonant phase to fit
  const S21Sweep narrow = noiseless_sweep(d, 3.33e6, 0.5, 401);
  CHECK_THROWS_AS(estimate_cable_delay(narrow), NumericalError);
}

TEST_CASE("phase fit recovers fr and Ql on the centred circle") {
  const ResonatorDesign d = skewed_design();
  const double qi = 3.33e6;
  const double ql = loaded_q(qi, d.qc, d.phi);
  ResonatorDesign plain = d;
  plain.tau = 0.0;
  const S21Sweep s = noiseless_sweep(plain, qi);
  const cplx zc = s21_circle_center(plain, qi, d.fr);
  const PhaseFit p = phase_fit(s.samples, zc, s.freqs);
  CHECK(p.converged);
  CHECK(p.orientation == 1);
  CHECK(p.fr == Approx(d.fr).epsilon(1e-12));
  CHECK(p.ql == Approx(ql).epsilon(1e-8));
}

TEST_CASE("DCM fit round-trips noiseless data") {
  const ResonatorDesign d = skewed_design();
  const double qi = 3.33e6;
  const S21Sweep s = noiseless_sweep(d, qi);
  const SweepFitResult fit = dcm_fit(s);
  CHECK(fit.refined);
  CHECK(fit.fr == Approx(d.fr).epsilon(1e-6));
  CHECK(fit.qi == Approx(qi).epsilon(1e-6));
  CHECK(fit.qc == Approx(d.qc).epsilon(1e-6));
  CHECK(fit.phi == Approx(d.phi).epsilon(1e-6));
  CHECK(fit.tau == Approx(d.tau).epsilon(1e-6));
  CHECK(std::abs(fit.z_inf - d.z_inf) < 1e-6 * std::abs(d.z_inf));
  CHECK(fit.residual_rms < 1e-10);

  // the staged estimate leaves a small delay error that z∞ absorbs as a
  // phase; only their product at fr is identifiable from a narrow sweep
  const SweepFitResult staged = dcm_fit(s, DcmOptions{false});
  CHECK_FALSE(staged.refined);
  CHECK(staged.qi == Approx(qi).epsilon(1e-6));
  CHECK(staged.qc == Approx(d.qc).epsilon(1e-6));
  CHECK(staged.tau == Approx(d.tau).epsilon(1e-4));
  const auto at_fr = [](const SweepFitResult& f, double fr) {
    return std::exp(cplx(0, -2 * kPi * fr * f.tau)) * f.z_inf;
  };
  CHECK(std::abs(at_fr(staged, d.fr) - std::exp(cplx(0, -2 * kPi * d.fr * d.tau)) * d.z_inf) < 1e-6);
}

TEST_CASE("DCM fit rejects conjugated data") {
  const ResonatorDesign d = skewed_design();
  S21Sweep s = noiseless_sweep(d, 3.33e6);
  for (auto& z : s.samples) z = std::conj(z);
  CHECK_THROWS_AS(dcm_fit(s), NumericalError);
}

TEST_CASE("noisy DCM fit uncertainties are of the right size") {
  const ResonatorDesign d = skewed_design();
  TlsModel tls;
  AmplifierModel amp;
  const DrivePoint drive = drive_for_density(d, tls, 1e5, 0.01);
  int within = 0;
  const int trials = 40;
  for (int k = 0; k < trials; ++k) {
    const S21Sweep s = simulate_s21_sweep(d, tls, drive, amp,
                                          sweep_grid(d.fr, 1e6, 10.0, 401), 1000 + k);
    const SweepFitResult fit = dcm_fit(s);
    REQUIRE(fit.sigmas.qi > 0.0);
    if (std::abs(fit.qi - s.truth->qi) <= fit.sigmas.qi) ++within;
  }
  // 68% nominal; binomial 3σ window for 40 trials
  CHECK(within >= 19);
  CHECK(within <= 36);
}

TEST_CASE("conformal map inverts the notch model exactly") {
  const ResonatorDesign d = skewed_design();
  SweepFitResult ref;
  ref.fr = d.fr;
  ref.qc = d.qc;
  ref.phi = d.phi;
  ref.tau = d.tau;
  ref.z_inf = d.z_inf;
  S21Series s;
  s.fs = 100.0;
  s.f_probe = d.fr * (1.0 + 3e-8);
  std::vector<double> qi = {1e6, 2.5e6, 7e5, 4e6};
  for (double q : qi) s.samples.push_back(s21_model(d, q, s.f_probe));
  const MappedSeries m = conformal_map_timeseries(s, ref);
  REQUIRE(m.n_valid() == qi.size());
  for (std::size_t i = 0; i < qi.size(); ++i) {
    CHECK(m.inv_qi[i] == Approx(1.0 / qi[i]).epsilon(1e-10));
    CHECK(m.frac_detune[i] == Approx(2.0 * (s.f_probe - d.fr) / d.fr).epsilon(1e-7));
    CHECK(m.t[i] == Approx(i / 100.0));
  }
  const LossEstimate loss = extract_tls_loss(m, d.qi_hp);
  double mean = 0.0;
  for (double q : qi) mean += 1.0 / q;
  mean /= 4.0;
  CHECK(loss.xi == Approx(mean - 1.0 / d.qi_hp).epsilon(1e-9));
  CHECK(loss.n_valid == 4);
}

TEST_CASE("conformal map flags samples at the off-resonant point") {
  const ResonatorDesign d = skewed_design();
  SweepFitResult ref;
  ref.fr = d.fr;
  ref.qc = d.qc;
  ref.phi = d.phi;
  ref.tau = d.tau;
  ref.z_inf = d.z_inf;
  S21Series s;
  s.fs = 10.0;
  s.f_probe = d.fr;
  s.samples = {std::exp(cplx(0, -2 * kPi * d.fr * d.tau)) * d.z_inf, s21_model(d, 1e6, d.fr)};
  const MappedSeries m = conformal_map_timeseries(s, ref);
  CHECK(m.valid[0] == 0);
  CHECK(m.valid[1] == 1);
  S21Series bad;
  bad.fs = 10.0;
  bad.f_probe = d.fr;
  bad.samples = {s.samples[0]};
  CHECK_THROWS_AS(extract_tls_loss(conformal_map_timeseries(bad, ref), d.qi_hp), NumericalError);
}

TEST_CASE("fitted design reproduces the response") {
  const ResonatorDesign d = skewed_design();
  const SweepFitResult fit = dcm_fit(noiseless_sweep(d, 2e6));
  const ResonatorDesign back = fit.as_design();
  for (double x : {-3e-6, 0.0, 1e-6})
    CHECK(std::abs(s21_model(back, 2e6, d.fr * (1 + x)) - s21_model(d, 2e6, d.fr * (1 + x))) < 1e-5);
}
