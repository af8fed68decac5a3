#include "mwres/noisepsd.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace mwres;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

SweepFitResult exact_ref(const ResonatorDesign& d, double qi) {
  SweepFitResult r;
  r.fr = d.fr;
  r.qc = d.qc;
  r.phi = d.phi;
  r.tau = d.tau;
  r.z_inf = d.z_inf;
  r.qi = qi;
  r.ql = loaded_q(qi, d.qc, d.phi);
  return r;
}

ResonatorDesign tilted() {
  ResonatorDesign d;
  d.phi = -0.2;
  d.tau = 30e-9;
  d.z_inf = cplx(0.8, 0.4);
  return d;
}

std::vector<double> white(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

double band_mean(const PsdEstimate& p, double lo, double hi) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.freqs[i] >= lo && p.freqs[i] <= hi) {
      s += p.values[i];
      ++n;
    }
  return s / n;
}

double sample_variance(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("quadrature directions follow the response derivative at fr") {
  const ResonatorDesign d = tilted();
  const double qi = 1.5e6;
  const SweepFitResult ref = exact_ref(d, qi);
  const QuadratureBasis b = quadrature_basis(ref);
  CHECK(std::abs(b.r_hat) == Approx(1.0));
  CHECK(std::abs((std::conj(b.r_hat) * b.theta_hat).real()) < 1e-14);

  // central finite difference in 1/Qi
  const double h = 1e-10;
  const cplx dz = (s21_model(d, 1.0 / (1.0 / qi + h), d.fr) - s21_model(d, 1.0 / (1.0 / qi - h), d.fr)) /
                  (2.0 * h);
  CHECK(std::abs(dz / std::abs(dz) - b.r_hat) < 1e-6);
  // projected amplitude times √conversion returns δ(1/Qi)
  CHECK(std::abs(dz) * std::sqrt(b.conversion) == Approx(1.0).epsilon(1e-6));

  // a detuning moves the response along theta_hat
  ResonatorDesign shifted = d;
  shifted.fr = d.fr * (1.0 + 1e-10);
  const cplx df = s21_model(shifted, qi, d.fr) - s21_model(d, qi, d.fr);
  CHECK(std::abs((std::conj(b.theta_hat) * df).real()) > 1e3 * std::abs((std::conj(b.r_hat) * df).real()));
}

TEST_CASE("loss fluctuations land in the dissipation quadrature") {
  const ResonatorDesign d = tilted();
  TlsModel tls;
  tls.fluct_amp = 5e-8;
  const DrivePoint drive = drive_for_density(d, tls, 1.0, 0.01);
  const auto ens = build_fluctuator_ensemble(d, tls, 60, RateBand{}, 3);
  const auto xi = simulate_xi_timeseries(ens, d, tls, drive, 500.0, 20.0, 4);
  const S21Series s = simulate_s21_timeseries(d, xi, drive, AmplifierModel{0.0, 10.0}, 500.0, 5);
  const double qi = internal_q(d, tls_loss_mean(d, tls, drive));
  const QuadratureBasis b = quadrature_basis(exact_ref(d, qi));
  const double vr = sample_variance(project(s, b, Quadrature::dissipation));
  const double vt = sample_variance(project(s, b, Quadrature::frequency));
  REQUIRE(vr > 0.0);
  CHECK(vt / vr < 1e-4);
}

TEST_CASE("projection removes the mean") {
  S21Series s;
  s.fs = 1.0;
  s.samples = {{1.0, 2.0}, {3.0, 2.0}, {2.0, 5.0}};
  QuadratureBasis b;  // r_hat = 1, theta_hat = −j
  const auto r = project(s, b, Quadrature::dissipation);
  const auto t = project(s, b, Quadrature::frequency);
  CHECK(r[0] == Approx(-1.0));
  CHECK(r[1] == Approx(1.0));
  CHECK(r[2] == Approx(0.0).margin(1e-15));
  // Re(conj(−j) δz) = −Im δz
  CHECK(t[0] == Approx(1.0));
  CHECK(t[2] == Approx(-2.0));
}

TEST_CASE("white noise PSD level is 2 sigma^2 / fs") {
  const double fs = 500.0;
  const auto x = white(static_cast<std::size_t>(200 * fs), 1.0, 1);
  const PsdEstimate p = welch_psd(x, fs, 1.0);
  CHECK(p.n_averages == 399);
  CHECK(p.freqs.front() == Approx(1.0));
  CHECK(p.freqs.back() == Approx(250.0));
  CHECK(band_mean(p, 1.0, 250.0) == Approx(2.0 / fs).epsilon(0.05));
}

TEST_CASE("sinusoid power and Parseval") {
  const double fs = 500.0;
  const std::size_t n = static_cast<std::size_t>(100 * fs);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * kPi * 37.0 * static_cast<double>(i) / fs);
  const PsdEstimate p = welch_psd(x, fs, 1.0);
  CHECK(integrate_variance(p, 30.0, 45.0) == Approx(0.5).epsilon(0.03));

  const auto w = white(n, 0.3, 8);
  const PsdEstimate q = welch_psd(w, fs, 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sum += q.values[i] * q.resolution[i];
  CHECK(sum == Approx(sample_variance(w)).epsilon(0.02));
}

TEST_CASE("Welch requires one and a half segments") {
  const auto x = white(749, 1.0, 2);
  CHECK_THROWS_AS(welch_psd(x, 500.0, 1.0), NumericalError);
  CHECK_NOTHROW(welch_psd(white(750, 1.0, 2), 500.0, 1.0));
  CHECK_THROWS_AS(welch_psd(x, 0.0, 1.0), NumericalError);
}

TEST_CASE("stitched spectrum has one resolution per band") {
  const double fs = 500.0;
  const auto x = white(static_cast<std::size_t>(1000 * fs), 1.0, 4);
  std::vector<std::string> warnings;
  const PsdEstimate p = stitch_multiresolution(x, fs, &warnings);
  CHECK(warnings.empty());
  CHECK(p.freqs.front() == Approx(0.1));
  CHECK(p.freqs.back() == Approx(250.0));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i > 0) CHECK(p.freqs[i] > p.freqs[i - 1]);
    const double expected = p.freqs[i] < 1.0 - 1e-9 ? 0.1 : (p.freqs[i] <= 10.0 + 1e-9 ? 1.0 : 10.0);
    CHECK(p.resolution[i] == expected);
  }
  // the level is the same in every band
  for (auto [lo, hi] : {std::pair{0.1, 0.95}, {1.0, 10.0}, {20.0, 250.0}})
    CHECK(band_mean(p, lo, hi) == Approx(2.0 / fs).epsilon(0.10));
}

TEST_CASE("short records lose the coarse band with a warning") {
  std::vector<std::string> warnings;
  const PsdEstimate p = stitch_multiresolution(white(12 * 500, 1.0, 5), 500.0, &warnings);
  CHECK(warnings.size() >= 2);
  CHECK(p.freqs.front() == Approx(1.0));
  CHECK_THROWS_AS(stitch_multiresolution(white(10, 1.0, 5), 500.0), NumericalError);
  // at 250 Hz a 0.1 s segment holds 25 samples: no Nyquist bin, top bin 120 Hz
  const PsdEstimate h = stitch_multiresolution(white(100 * 250, 1.0, 6), 250.0);
  CHECK(h.freqs.back() == Approx(120.0));
}

TEST_CASE("band integral of a flat spectrum") {
  PsdEstimate p;
  for (int k = 1; k <= 2500; ++k) {
    p.freqs.push_back(0.1 * k);
    p.values.push_back(3e-4);
    p.resolution.push_back(0.1);
  }
  CHECK(integrate_variance(p) == Approx(3e-4 * 249.9).epsilon(1e-12));
  CHECK(integrate_variance(p, 0.15, 0.35) == Approx(3e-4 * 0.2).epsilon(1e-12));
  CHECK_THROWS_AS(integrate_variance(p, 0.05, 10.0), NumericalError);
  CHECK_THROWS_AS(integrate_variance(p, 1.0, 300.0), NumericalError);
}

TEST_CASE("closed loop: measured loss PSD matches the injected loss PSD") {
  const ResonatorDesign d = tilted();
  TlsModel tls;
  tls.fluct_amp = 3e-8;
  const DrivePoint drive = drive_for_density(d, tls, 1.0, 0.01);
  const auto ens = build_fluctuator_ensemble(d, tls, 60, RateBand{}, 21);
  const auto xi = simulate_xi_timeseries(ens, d, tls, drive, 500.0, 100.0, 22);
  const S21Series s = simulate_s21_timeseries(d, xi, drive, AmplifierModel{0.0, 10.0}, 500.0, 23);
  const double qi = internal_q(d, tls_loss_mean(d, tls, drive));
  const QuadratureBasis b = quadrature_basis(exact_ref(d, qi), loaded_q(qi, d.qc, d.phi));
  const PsdEstimate measured = psd_to_xi(stitch_multiresolution(project(s, b, Quadrature::dissipation), 500.0), b);
  const PsdEstimate truth = stitch_multiresolution(xi, 500.0);
  CHECK(integrate_variance(measured) == Approx(integrate_variance(truth)).epsilon(0.05));
}

TEST_CASE("far off resonance only white amplifier noise remains") {
  const ResonatorDesign d = tilted();
  TlsModel tls;
  tls.fluct_amp = 3e-7;
  const DrivePoint drive = drive_for_density(d, tls, 1.0, 0.01);
  const auto ens = build_fluctuator_ensemble(d, tls, 60, RateBand{}, 31);
  const auto xi = simulate_xi_timeseries(ens, d, tls, drive, 500.0, 400.0, 32);
  const S21Series s = simulate_s21_timeseries(d, xi, drive, AmplifierModel{}, 500.0, 33, d.fr + 2e6);
  const double qi = internal_q(d, tls_loss_mean(d, tls, drive));
  const QuadratureBasis b = quadrature_basis(exact_ref(d, qi));
  const PsdEstimate p = stitch_multiresolution(project(s, b, Quadrature::dissipation), 500.0);
  CHECK(band_mean(p, 0.1, 0.95) / band_mean(p, 20.0, 250.0) == Approx(1.0).epsilon(0.2));
}
