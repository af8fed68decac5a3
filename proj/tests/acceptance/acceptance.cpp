// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "mwres/experiment.hpp"
#include "mwres/fit.hpp"
#include "mwres/model.hpp"
#include "mwres/noisepsd.hpp"
#include "mwres/stats.hpp"
#include "mwres/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace mwres;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double band_mean(const PsdEstimate& p, double lo, double hi, bool hi_open = false) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double f = p.freqs[i];
    if (f >= lo - 1e-9 && (hi_open ? f < hi - 1e-9 : f <= hi + 1e-9)) {
      s += p.values[i];
      ++n;
    }
  }
  return s / n;
}

ResonatorDesign multi_wave(int n, double fr, double qi_hp, double qc) {
  ResonatorDesign d;
  d.kind = n == 1 ? ResonatorKind::quarter_wave : ResonatorKind::multi_wave;
  d.n_quarter = n;
  d.fr = fr;
  d.qi_hp = qi_hp;
  d.qc = qc;
  return d;
}

// 1 ----------------------------------------------------------------------

double rho_quadrature(int n, double lambda, int points) {
  const double length = n * lambda / 4.0;
  const double h = length / points;
  double s2 = 0.0, s4 = 0.0;
  for (int i = 0; i <= points; ++i) {
    const double w = (i == 0 || i == points) ? 0.5 : 1.0;
    const double c = std::cos(2.0 * kPi * i * h / lambda);
    s2 += w * c * c;
    s4 += w * c * c * c * c;
  }
  return s4 * h / (s2 * h * s2 * h);
}

Outcome overlap_law() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_law = 0.0, worst_quad = 0.0;
  const double lambda = 0.0217;
  for (int n = 1; n <= 39; n += 2) {
    const double r = rho_z(n, lambda);
    worst_law = std::max(worst_law, std::abs(r * n * lambda / 6.0 - 1.0));
    worst_quad = std::max(worst_quad, std::abs(r / rho_quadrature(n, lambda, 200000) - 1.0));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_law < 1e-12 && worst_quad < 1e-9 && secs < 1.0,
          fmt("max |rho N lambda / 6 - 1| = %.1e, max quadrature deviation = %.1e, %.3f s", worst_law,
              worst_quad, secs)};
}

// 2 ----------------------------------------------------------------------

Outcome variance_reduction() {
  const int n_mw = 33, seeds = 60;
  TlsModel tls;
  tls.fluct_amp = 1e-7;  // small enough that the response stays linear
  const AmplifierModel quiet{0.0, 10.0};
  ProtocolConfig proto;
  const ResonatorDesign qw = multi_wave(1, 5.43e9, 3.33e6, 2.34e6);
  const ResonatorDesign mw = multi_wave(n_mw, 5.43e9, 3.33e6, 2.34e6);

  double var[2] = {0.0, 0.0}, var_truth[2] = {0.0, 0.0};
  PsdEstimate psd_sum[2];
  for (int s = 0; s < seeds; ++s) {
    for (int arm = 0; arm < 2; ++arm) {
      const ResonatorDesign& d = arm == 0 ? qw : mw;
      const std::uint64_t seed = derive_seed(2000 + s, arm);
      const SweepFitResult ref = characterize(d, tls, quiet, proto, 0.01, derive_seed(seed, 32));
      MeasurementSession session(d, tls, quiet, EnsembleSpec{}, seed);
      const S21Series series = session.record(drive_for_density(d, tls, 1.0, 0.01), 500.0, 100.0);
      const NoiseMeasurement nm = measure_noise(series, ref);
      var[arm] += nm.variance / seeds;
      var_truth[arm] += integrate_variance(stitch_multiresolution(series.truth->xi, 500.0)) / seeds;
      if (psd_sum[arm].size() == 0) {
        psd_sum[arm] = nm.psd_xi;
      } else {
        for (std::size_t i = 0; i < nm.psd_xi.size(); ++i) psd_sum[arm].values[i] += nm.psd_xi.values[i];
      }
    }
  }
  const double ratio = var[0] / var[1];
  const double truth_ratio = var_truth[0] / var_truth[1];
  const double d1 = band_mean(psd_sum[0], 0.1, 1.0, true) / band_mean(psd_sum[1], 0.1, 1.0, true);
  const double d2 = band_mean(psd_sum[0], 1.0, 10.0) / band_mean(psd_sum[1], 1.0, 10.0);
  const bool ok = std::abs(ratio / n_mw - 1.0) <= 0.15 && std::abs(d1 / n_mw - 1.0) <= 0.25 &&
                  std::abs(d2 / n_mw - 1.0) <= 0.25;
  return {ok, fmt("Var ratio %.2f (injected %.2f) over %d seeds; PSD ratio %.2f on [0.1,1) Hz, "
                  "%.2f on [1,10] Hz; target 33 (+/-15%%, +/-25%%)",
                  ratio, truth_ratio, seeds, d1, d2)};
}

// 3 and 4 ----------------------------------------------------------------

struct PairedRun {
  double fluct_amp = 0.0;
  double rel_qw = 0.0;
  double rel_mw = 0.0;
  double a_qw = 0.0;
  double a_mw = 0.0;
  bool ok = false;
  std::string message;
};

const PairedRun& paired_run() {
  static PairedRun run = [] {
    PairedRun out;
    ExperimentConfig cfg;
    cfg.seed = 424242;
    cfg.protocol.paired_n_quarter = 0;
    double amp = cfg.tls.fluct_amp;
    // pilot QW runs: rescale fluct_amp until the QW relative error is 0.25
    for (int it = 0; it < 4; ++it) {
      cfg.tls.fluct_amp = amp;
      const ExperimentResult pilot = run_experiment(cfg);
      if (!pilot.arms[0].lognormal) {
        out.message = "pilot run produced no log-normal fit";
        return out;
      }
      const double rel = pilot.arms[0].lognormal->relative_error();
      std::printf("  pilot %d: fluct_amp %.4g -> QW relative error %.4f\n", it, amp, rel);
      if (std::abs(rel / 0.25 - 1.0) < 0.01) break;
      amp *= 0.25 / rel;
    }
    cfg.tls.fluct_amp = amp;
    cfg.protocol.paired_n_quarter = 33;
    const ExperimentResult res = run_experiment(cfg);
    if (!res.all_stages_ok() || res.arms.size() != 2 || !res.arms[0].lognormal ||
        !res.arms[1].lognormal || !res.arms[0].scaling || !res.arms[1].scaling) {
      out.message = "paired run incomplete";
      return out;
    }
    out.fluct_amp = amp;
    out.rel_qw = res.arms[0].lognormal->relative_error();
    out.rel_mw = res.arms[1].lognormal->relative_error();
    out.a_qw = res.arms[0].scaling->a;
    out.a_mw = res.arms[1].scaling->a;
    out.ok = true;
    return out;
  }();
  return run;
}

Outcome table_statistics() {
  const PairedRun& r = paired_run();
  if (!r.ok) return {false, r.message};
  const double target = 0.25 / std::sqrt(33.0);
  return {std::abs(r.rel_mw / target - 1.0) <= 0.30,
          fmt("fluct_amp %.4g: QW rel err %.4f, N=33 rel err %.4f vs %.4f +/-30%% (published 0.256 -> 0.044)",
              r.fluct_amp, r.rel_qw, r.rel_mw, target)};
}

Outcome scaling_ratio() {
  const PairedRun& r = paired_run();
  if (!r.ok) return {false, r.message};
  const double ratio = r.a_qw / r.a_mw;
  const double root = std::sqrt(33.0);
  return {ratio >= 0.8 * root && ratio <= 1.3 * root,
          fmt("A_QW/A_MW = %.3f, window [%.3f, %.3f] (published 6.2 +/- 0.2)", ratio, 0.8 * root, 1.3 * root)};
}

// 5 ----------------------------------------------------------------------

Outcome plateau() {
  const double h = 6.62607015e-34, kb = 1.380649e-23;
  const double beta_oracle = std::tanh(h * 6.08e9 / (2.0 * kb * 0.2));
  const double beta = beta_factor(6.08e9, 0.2);

  ExperimentConfig cfg;
  cfg.seed = 5150;
  const double xi_1ph = tls_loss_mean(cfg.design, cfg.tls, DrivePoint{0.0, 1.0, 0.01});
  cfg.design = multi_wave(37, 6.08e9, 2.20e6, 5.40e6);
  cfg.tls.nc_temp_exponent = 1.0;
  cfg.protocol.temperatures = {0.2};
  cfg.protocol.repeats = 30;
  const ExperimentResult res = run_experiment(cfg);
  if (res.arms.empty() || res.arms[0].plateaus.empty()) return {false, "no plateau estimate"};
  const PlateauEstimate& pl = res.arms[0].plateaus[0];
  const double rel = pl.xi0 / cfg.tls.xi0 - 1.0;
  const bool ok = std::abs(rel) <= 0.05 && std::abs(beta - beta_oracle) <= 1e-4 &&
                  std::abs(xi_1ph / 4.7e-7 - 1.0) <= 0.01;
  return {ok, fmt("plateau %.4g +/- %.2g vs xi0 %.4g (%+.2f%%, %zu points); beta(6.08 GHz, 0.2 K) = "
                  "%.5f, oracle %.5f; xi(n=1, 10 mK) = %.3g",
                  pl.xi0, pl.sem, cfg.tls.xi0, 100.0 * rel, pl.points, beta, beta_oracle, xi_1ph)};
}

// 6 ----------------------------------------------------------------------

Outcome fit_round_trip() {
  ResonatorDesign d = multi_wave(1, 5.43e9, 3.33e6, 2.34e6);
  d.phi = 0.3;
  d.tau = 55e-9;
  d.z_inf = cplx(0.6, 0.35);
  const double qi = 2.7e6;
  S21Sweep s;
  s.freqs = sweep_grid(d.fr, loaded_q(qi, d.qc, d.phi), 10.0, 401);
  for (double f : s.freqs) s.samples.push_back(s21_model(d, qi, f));
  const SweepFitResult fit = dcm_fit(s);
  const double worst = std::max({std::abs(fit.fr / d.fr - 1), std::abs(fit.qi / qi - 1),
                                 std::abs(fit.qc / d.qc - 1), std::abs(fit.phi / d.phi - 1),
                                 std::abs(fit.tau / d.tau - 1), std::abs(fit.z_inf - d.z_inf) / std::abs(d.z_inf)});

  // conformal map against the generator
  S21Series series;
  series.fs = 500.0;
  series.f_probe = d.fr;
  const std::vector<double> qis = {8e5, 1.3e6, 2.7e6, 3.3e6};
  for (double q : qis) series.samples.push_back(s21_model(d, q, d.fr));
  SweepFitResult exact;
  exact.fr = d.fr;
  exact.qc = d.qc;
  exact.phi = d.phi;
  exact.tau = d.tau;
  exact.z_inf = d.z_inf;
  const MappedSeries m = conformal_map_timeseries(series, exact);
  double worst_map = 0.0;
  for (std::size_t i = 0; i < qis.size(); ++i)
    worst_map = std::max(worst_map, std::abs(m.inv_qi[i] * qis[i] - 1.0));

  // coverage of the 1σ interval on Qi with amplifier noise at one photon
  const ResonatorDesign mw = multi_wave(33, 5.43e9, 3.33e6, 2.34e6);
  TlsModel tls;
  AmplifierModel amp;
  const DrivePoint drive = drive_for_density(mw, tls, 1.0, 0.01);
  const double qi_true = internal_q(mw, tls_loss_mean(mw, tls, drive));
  const auto freqs = sweep_grid(mw.fr, loaded_q(qi_true, mw.qc, mw.phi), 10.0, 401);
  int within = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const SweepFitResult f = dcm_fit(simulate_s21_sweep(mw, tls, drive, amp, freqs, derive_seed(6000, t)));
    if (std::abs(f.qi - qi_true) <= f.sigmas.qi) ++within;
  }
  const double coverage = static_cast<double>(within) / trials;
  const bool ok = worst <= 1e-6 && worst_map <= 1e-10 && coverage >= 0.60 && coverage <= 0.75;
  return {ok, fmt("noiseless max relative error %.1e; conformal map %.1e; Qi 1-sigma coverage %.1f%% "
                  "of %d (window 60-75%%)",
                  worst, worst_map, 100.0 * coverage, trials)};
}

// 7 ----------------------------------------------------------------------

Outcome spectral_estimator() {
  const double fs = 500.0, sigma = 0.7;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(static_cast<std::size_t>(1000 * fs));
  for (double& v : x) v = g(rng);
  const double level = 2.0 * sigma * sigma / fs;

  const PsdEstimate p = welch_psd(x, fs, 1.0);
  const double white = band_mean(p, 1.0, 250.0) / level - 1.0;
  double parseval = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) parseval += p.values[i] * p.resolution[i];
  parseval = parseval / (std_of(x) * std_of(x)) - 1.0;

  const PsdEstimate st = stitch_multiresolution(x, fs);
  const double seam1 = band_mean(st, 0.5, 1.0, true) / band_mean(st, 1.0, 2.0) - 1.0;
  const double seam10 = band_mean(st, 5.0, 10.0) / band_mean(st, 10.0 + 1e-6, 20.0) - 1.0;
  const bool ok = std::abs(white) <= 0.05 && std::abs(parseval) <= 0.02 && std::abs(seam1) <= 0.10 &&
                  std::abs(seam10) <= 0.10;
  return {ok, fmt("white level %+.2f%%, Parseval %+.2f%%, seams %+.2f%% at 1 Hz and %+.2f%% at 10 Hz",
                  100 * white, 100 * parseval, 100 * seam1, 100 * seam10)};
}

// 8 ----------------------------------------------------------------------

Outcome lognormal_machinery() {
  const LogNormalMoments qw = lognormal_moments(1.311, 0.253);
  const LogNormalMoments mw = lognormal_moments(1.3899, 0.0442);
  const double e1 = qw.mean * 1e-7 / 3.83e-7 - 1, v1 = qw.variance * 1e-14 / 0.97e-14 - 1;
  const double e2 = mw.mean * 1e-7 / 4.018e-7 - 1, v2 = mw.variance * 1e-14 / 0.032e-14 - 1;
  const double eps = dkw_epsilon(100, 0.01);
  const bool ok = std::abs(e1) <= 0.01 && std::abs(v1) <= 0.01 && std::abs(e2) <= 0.02 &&
                  std::abs(v2) <= 0.02 && std::abs(eps - 0.1628) < 5e-5;
  return {ok, fmt("E %+.2f%% Var %+.2f%% (1.311, 0.253); E %+.2f%% Var %+.2f%% (1.3899, 0.0442); "
                  "DKW eps %.4f",
                  100 * e1, 100 * v1, 100 * e2, 100 * v2, eps)};
}

// 9 ----------------------------------------------------------------------

Outcome frequency_flatness() {
  struct Harmonic {
    int n;
    double fr, qi, qc;
  };
  const Harmonic harmonics[] = {{27, 4.45e9, 9.46e6, 2.42e6}, {29, 4.77e9, 2.77e6, 2.19e6},
                                {31, 5.10e9, 5.42e6, 2.27e6}, {33, 5.43e9, 3.33e6, 2.34e6},
                                {35, 5.76e9, 1.63e6, 3.31e6}, {37, 6.08e9, 2.20e6, 5.40e6},
                                {39, 6.42e9, 3.89e6, 6.58e6}};
  std::vector<double> xi0, se;
  std::string points;
  for (std::size_t i = 0; i < std::size(harmonics); ++i) {
    const auto& h = harmonics[i];
    ExperimentConfig cfg;
    cfg.seed = derive_seed(9000, i);
    cfg.design = multi_wave(h.n, h.fr, h.qi, h.qc);
    cfg.tls.nc_temp_exponent = 1.0;
    cfg.protocol.temperatures = {0.2};
    cfg.protocol.repeats = 20;
    const ExperimentResult res = run_experiment(cfg);
    if (res.arms.empty() || res.arms[0].plateaus.empty())
      return {false, fmt("no plateau for the %.2f GHz harmonic", h.fr / 1e9)};
    xi0.push_back(res.arms[0].plateaus[0].xi0);
    se.push_back(res.arms[0].plateaus[0].sem);
    points += fmt(" %.2f:%.4g", h.fr / 1e9, xi0.back());
  }
  const double spread = std_of(xi0);
  double rms_se = 0.0;
  for (double v : se) rms_se += v * v / static_cast<double>(se.size());
  rms_se = std::sqrt(rms_se);
  return {spread < 2.0 * rms_se,
          fmt("spread %.3g vs 2 x rms standard error %.3g; xi0 by GHz:%s", spread, 2.0 * rms_se,
              points.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "standing-wave overlap law", overlap_law},
      {2, "variance reduction by N", variance_reduction},
      {3, "relative error reduction in the loss distribution", table_statistics},
      {4, "scaling-law amplitude ratio", scaling_ratio},
      {5, "saturation plateau and thermal factor", plateau},
      {6, "fit round trip and coverage", fit_round_trip},
      {7, "spectral estimator", spectral_estimator},
      {8, "log-normal moments and DKW band", lognormal_machinery},
      {9, "frequency independence across harmonics", frequency_flatness},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
