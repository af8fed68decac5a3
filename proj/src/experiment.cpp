#include "mwres/experiment.hpp"

#include "mwres/errors.hpp"
#include "mwres/io.hpp"
#include "mwres/svg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace mwres {

namespace fs = std::filesystem;

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string arm_dir_name(int n_quarter) { return "arm_N" + std::to_string(n_quarter); }

class StageRunner {
 public:
  explicit StageRunner(std::vector<StageStatus>& log) : log_(log) {}

  template <typename Fn>
  bool run(const std::string& name, Fn&& fn) {
    StageStatus st;
    st.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(st.outputs);
    } catch (const std::exception& e) {
      st.ok = false;
      st.message = e.what();
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_.push_back(std::move(st));
    return log_.back().ok;
  }

 private:
  std::vector<StageStatus>& log_;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sem_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

ResonatorDesign arm_design(const ResonatorDesign& base, int n_quarter) {
  ResonatorDesign d = base;
  d.n_quarter = n_quarter;
  d.kind = n_quarter == 1 ? ResonatorKind::quarter_wave : ResonatorKind::multi_wave;
  return d;
}

nlohmann::json fit_json(const SweepFitResult& f) {
  return {{"fr_hz", f.fr},       {"ql", f.ql},          {"qc", f.qc},
          {"qi", f.qi},          {"phi_rad", f.phi},    {"tau_s", f.tau},
          {"sigma_qi", f.sigmas.qi}, {"sigma_fr_hz", f.sigmas.fr}, {"refined", f.refined}};
}

void run_arm(const ExperimentConfig& cfg, const ResonatorDesign& design, std::uint64_t seed,
             const std::string& dir, ArmResult& arm, std::vector<StageStatus>& log) {
  StageRunner stages(log);
  const auto& p = cfg.protocol;
  const std::string tag = "[N=" + std::to_string(design.n_quarter) + "]";
  arm.design = design;
  arm.temperatures = p.temperatures;
  arm.fits.assign(p.temperatures.size(), std::nullopt);
  arm.qi_truth.assign(p.temperatures.size(), 0.0);
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  const bool write = !dir.empty();

  // 1. high-power characterisation, one sweep per temperature
  for (std::size_t ti = 0; ti < p.temperatures.size(); ++ti) {
    const double temp = p.temperatures[ti];
    stages.run("sweep_fit" + tag + "[T=" + format_double(temp) + "]", [&](auto& outputs) {
      S21Sweep sweep;
      arm.fits[ti] = characterize(design, cfg.tls, cfg.amp, p, temp, derive_seed(seed, 32 + ti), &sweep);
      arm.qi_truth[ti] = sweep.truth->qi;
      if (write) {
        const std::string sw = "sweep_T" + std::to_string(ti) + ".csv";
        const std::string fi = "fit_T" + std::to_string(ti) + ".csv";
        write_sweep_csv(path(sw), sweep);
        write_key_values(path(fi), fit_to_key_values(*arm.fits[ti]));
        outputs.push_back(sw);
        outputs.push_back(fi);
      }
    });
  }

  // 2. repeated staircases on one continuously evolving device
  MeasurementSession session(design, cfg.tls, cfg.amp, cfg.ensemble, seed);
  const std::size_t nd = p.densities.size();
  arm.xi_samples.assign(p.temperatures.size() * nd, {});
  stages.run("staircase" + tag, [&](auto& outputs) {
    for (std::size_t r = 0; r < p.repeats; ++r) {
      for (std::size_t ti = 0; ti < p.temperatures.size(); ++ti) {
        if (!arm.fits[ti]) continue;
        StaircaseProtocol sp{p.densities, p.dwell, p.fs, p.temperatures[ti]};
        const auto records = session.staircase(sp);
        for (std::size_t k = 0; k < nd; ++k)
          arm.xi_samples[ti * nd + k].push_back(measure_loss(records[k], *arm.fits[ti]).xi);
      }
      session.idle(p.repeat_spacing);
    }
    for (std::size_t ti = 0; ti < p.temperatures.size(); ++ti) {
      if (!arm.fits[ti]) continue;
      const double temp = p.temperatures[ti];
      const double beta = beta_factor(arm.fits[ti]->fr, temp);
      PlateauEstimate plateau{temp, 0.0, 0.0, 0};
      std::vector<double> per_repeat;
      for (std::size_t k = 0; k < nd; ++k) {
        const auto& xs = arm.xi_samples[ti * nd + k];
        XiPoint pt;
        pt.temperature = temp;
        pt.density = p.densities[k];
        pt.xi = mean_of(xs);
        pt.sem = sem_of(xs);
        pt.beta = beta;
        pt.xi_corrected = pt.xi / beta;
        pt.sem_corrected = pt.sem / beta;
        pt.xi_model = tls_loss_mean(design, cfg.tls, DrivePoint{0.0, pt.density, temp});
        pt.repeats = xs.size();
        arm.curve.push_back(pt);
        if (pt.density < 0.1) {
          plateau.xi0 += pt.xi_corrected;
          ++plateau.points;
          per_repeat.resize(xs.size(), 0.0);
          for (std::size_t r = 0; r < xs.size(); ++r) per_repeat[r] += xs[r] / beta;
        }
      }
      if (plateau.points > 0) {
        plateau.xi0 /= static_cast<double>(plateau.points);
        for (double& v : per_repeat) v /= static_cast<double>(plateau.points);
        plateau.sem = sem_of(per_repeat);
        arm.plateaus.push_back(plateau);
      }
    }
    if (arm.fits[0]) arm.xi_one_photon = arm.curve[nearest_log_index(p.densities, 1.0)].xi;
    if (write) {
      CsvTable curve;
      curve.header = {"temperature_k", "n_density", "xi", "xi_sem", "beta", "xi_corrected",
                      "xi_corrected_sem", "xi_model"};
      for (const auto& pt : arm.curve)
        curve.rows.push_back({pt.temperature, pt.density, pt.xi, pt.sem, pt.beta, pt.xi_corrected,
                              pt.sem_corrected, pt.xi_model});
      write_csv(path("xi_curve.csv"), curve);
      CsvTable samples;
      samples.header = {"repeat", "temperature_k", "n_density", "xi"};
      for (std::size_t ti = 0; ti < p.temperatures.size(); ++ti)
        for (std::size_t k = 0; k < nd; ++k) {
          const auto& xs = arm.xi_samples[ti * nd + k];
          for (std::size_t r = 0; r < xs.size(); ++r)
            samples.rows.push_back({static_cast<double>(r), p.temperatures[ti], p.densities[k], xs[r]});
        }
      write_csv(path("xi_samples.csv"), samples);
      outputs.push_back("xi_curve.csv");
      outputs.push_back("xi_samples.csv");
    }
  });

  // 3. long records for spectra at the first temperature
  if (p.psd_duration > 0.0 && !p.psd_densities.empty() && arm.fits[0]) {
    stages.run("psd" + tag, [&](auto& outputs) {
      for (std::size_t k = 0; k < p.psd_densities.size(); ++k) {
        const DrivePoint drive =
            drive_for_density(design, cfg.tls, p.psd_densities[k], p.temperatures[0]);
        const S21Series rec = session.record(drive, p.fs, p.psd_duration);
        arm.noise.push_back(measure_noise(rec, *arm.fits[0]));
        arm.noise.back().density = p.psd_densities[k];
        if (write) {
          const std::string name = "psd_" + std::to_string(k) + ".csv";
          write_psd_csv(path(name), arm.noise.back().psd_xi);
          outputs.push_back(name);
        }
        session.idle(p.repeat_spacing);
      }
      if (write) {
        CsvTable t;
        t.header = {"n_density", "operating_ql", "variance_raw", "variance_floor", "variance", "rms"};
        for (const auto& m : arm.noise)
          t.rows.push_back({m.density, m.operating_ql, m.variance_raw, m.variance_floor, m.variance, m.rms});
        write_csv(path("noise.csv"), t);
        outputs.push_back("noise.csv");
      }
    });
    if (arm.noise.size() >= 3) {
      stages.run("scaling" + tag, [&](auto& outputs) {
        std::vector<double> n, rms;
        for (const auto& m : arm.noise)
          if (m.rms > 0.0) {
            n.push_back(m.density);
            rms.push_back(m.rms);
          }
        arm.scaling = powerlaw_fit(n, rms);
        if (write) {
          write_key_values(path("scaling.csv"),
                           {{"a", format_double(arm.scaling->a)},
                            {"alpha", format_double(arm.scaling->alpha)},
                            {"a_err", format_double(arm.scaling->a_err)},
                            {"alpha_err", format_double(arm.scaling->alpha_err)}});
          outputs.push_back("scaling.csv");
        }
      });
    }
  }

  // 4. distribution of repeated estimates at the step nearest ecdf_density
  if (arm.fits[0]) {
    const std::size_t k = nearest_log_index(p.densities, p.ecdf_density);
    arm.ecdf_density = p.densities[k];
    stages.run("ecdf" + tag, [&](auto& outputs) {
      const auto& xs = arm.xi_samples[k];
      arm.ecdf = ecdf_with_dkw(xs, p.dkw_alpha);
      arm.lognormal = lognormal_fit(arm.ecdf->curve);
      if (write) {
        CsvTable t;
        t.meta["n_density"] = format_double(arm.ecdf_density);
        t.meta["dkw_epsilon"] = format_double(arm.ecdf->epsilon);
        t.header = {"xi", "level", "lower", "upper"};
        for (std::size_t i = 0; i < arm.ecdf->curve.n; ++i)
          t.rows.push_back({arm.ecdf->curve.sorted_samples[i], arm.ecdf->curve.levels[i],
                            arm.ecdf->lower[i], arm.ecdf->upper[i]});
        write_csv(path("ecdf.csv"), t);
        const auto& ln = *arm.lognormal;
        write_key_values(path("lognormal.csv"),
                         {{"unit", format_double(ln.unit)},
                          {"mu", format_double(ln.mu)},
                          {"sigma", format_double(ln.sigma)},
                          {"mu_err", format_double(ln.mu_err)},
                          {"sigma_err", format_double(ln.sigma_err)},
                          {"mu_err_naive", format_double(ln.mu_err_naive)},
                          {"sigma_err_naive", format_double(ln.sigma_err_naive)},
                          {"mean_xi", format_double(ln.mean_xi)},
                          {"var_xi", format_double(ln.var_xi)},
                          {"rel_err", format_double(ln.relative_error())}});
        outputs.push_back("ecdf.csv");
        outputs.push_back("lognormal.csv");
      }
    });
  }
}

void write_figures(const ExperimentResult& res, const std::string& dir) {
  Plot xi_plot{"Loss vs photon density", "n per quarter wave", "xi / beta", true, true, {}};
  Plot psd_plot{"Loss PSD", "frequency (Hz)", "S_xi (1/Hz)", true, true, {}};
  Plot rms_plot{"RMS loss fluctuation", "n per quarter wave", "rms xi", true, true, {}};
  Plot ecdf_plot{"Empirical CDF of repeated loss", "xi", "F(xi)", false, false, {}};
  int color = 0;
  for (const auto& arm : res.arms) {
    const std::string n = "N=" + std::to_string(arm.design.n_quarter);
    for (double temp : arm.temperatures) {
      PlotSeries s{n + " T=" + format_double(temp) + " K", {}, {}, {}, true, true, false,
                   kPalette[color++ % 6]};
      for (const auto& pt : arm.curve)
        if (pt.temperature == temp) {
          s.x.push_back(pt.density);
          s.y.push_back(pt.xi_corrected);
          s.yerr.push_back(pt.sem_corrected);
        }
      xi_plot.series.push_back(std::move(s));
    }
    if (!arm.noise.empty()) {
      const auto& m = arm.noise.front();
      psd_plot.series.push_back({n + " n=" + format_double(m.density), m.psd_xi.freqs,
                                 m.psd_xi.values, {}, false, true, false, kPalette[color % 6]});
      psd_plot.series.push_back({n + " floor", m.psd_floor.freqs, m.psd_floor.values, {}, false,
                                 true, false, kPalette[(color + 3) % 6]});
      PlotSeries r{n, {}, {}, {}, true, false, false, kPalette[color % 6]};
      for (const auto& q : arm.noise) {
        r.x.push_back(q.density);
        r.y.push_back(q.rms);
      }
      rms_plot.series.push_back(std::move(r));
      ++color;
    }
    if (arm.ecdf) {
      const auto& c = arm.ecdf->curve;
      ecdf_plot.series.push_back(
          {n, c.sorted_samples, c.levels, {}, false, false, true, kPalette[color % 6]});
      ecdf_plot.series.push_back(
          {"", c.sorted_samples, arm.ecdf->lower, {}, false, false, true, "#aaaaaa"});
      ecdf_plot.series.push_back(
          {"", c.sorted_samples, arm.ecdf->upper, {}, false, false, true, "#aaaaaa"});
      ++color;
    }
  }
  write_svg((fs::path(dir) / "fig_xi_vs_n.svg").string(), xi_plot);
  if (!psd_plot.series.empty()) write_svg((fs::path(dir) / "fig_psd.svg").string(), psd_plot);
  if (!rms_plot.series.empty()) write_svg((fs::path(dir) / "fig_rms_scaling.svg").string(), rms_plot);
  if (!ecdf_plot.series.empty()) write_svg((fs::path(dir) / "fig_ecdf.svg").string(), ecdf_plot);
}

nlohmann::json build_manifest(const ExperimentResult& res, double total_seconds) {
  using nlohmann::json;
  const auto& cfg = res.config;
  json m;
  m["tool"] = "mwres";
  m["version"] = "1.0.0";
  m["config_hash"] = config_hash(cfg);
  m["config_file"] = "config.ini";
  m["seed"] = cfg.seed;
  m["total_seconds"] = total_seconds;
  m["stages"] = json::array();
  for (const auto& st : res.stages)
    m["stages"].push_back({{"name", st.name},
                           {"status", st.ok ? "ok" : "failed"},
                           {"message", st.message},
                           {"seconds", st.seconds},
                           {"outputs", st.outputs}});
  m["truth"] = {{"xi0", cfg.tls.xi0},
                {"nc", cfg.tls.nc},
                {"fluct_amp", cfg.tls.fluct_amp},
                {"qi_hp", cfg.design.qi_hp},
                {"qc", cfg.design.qc},
                {"fr_hz", cfg.design.fr}};
  m["arms"] = json::array();
  for (const auto& arm : res.arms) {
    json a;
    a["n_quarter"] = arm.design.n_quarter;
    a["dir"] = arm_dir_name(arm.design.n_quarter);
    a["fits"] = json::array();
    for (std::size_t ti = 0; ti < arm.temperatures.size(); ++ti) {
      if (!arm.fits[ti]) continue;
      json f = fit_json(*arm.fits[ti]);
      f["temperature_k"] = arm.temperatures[ti];
      f["qi_truth"] = arm.qi_truth[ti];
      a["fits"].push_back(f);
    }
    a["plateaus"] = json::array();
    for (const auto& pl : arm.plateaus)
      a["plateaus"].push_back({{"temperature_k", pl.temperature}, {"xi0", pl.xi0}, {"sem", pl.sem}, {"points", pl.points}});
    if (arm.xi_one_photon) a["xi_one_photon"] = *arm.xi_one_photon;
    if (!arm.curve.empty()) a["xi_lowest_density_corrected"] = arm.curve.front().xi_corrected;
    a["noise"] = json::array();
    for (const auto& q : arm.noise)
      a["noise"].push_back({{"n_density", q.density}, {"variance", q.variance}, {"rms", q.rms},
                            {"variance_floor", q.variance_floor}});
    if (arm.scaling)
      a["scaling"] = {{"a", arm.scaling->a}, {"alpha", arm.scaling->alpha},
                      {"a_err", arm.scaling->a_err}, {"alpha_err", arm.scaling->alpha_err}};
    if (arm.lognormal) {
      const auto& ln = *arm.lognormal;
      a["lognormal"] = {{"n_density", arm.ecdf_density}, {"samples", arm.ecdf->curve.n},
                        {"mu", ln.mu}, {"sigma", ln.sigma}, {"mu_err", ln.mu_err},
                        {"sigma_err", ln.sigma_err}, {"mean_xi", ln.mean_xi},
                        {"var_xi", ln.var_xi}, {"rel_err", ln.relative_error()}};
    }
    m["arms"].push_back(a);
  }

  if (res.arms.size() == 2) {
    const auto& qw = res.arms[0];
    const auto& mw = res.arms[1];
    json pair;
    pair["n_ratio"] = static_cast<double>(mw.design.n_quarter) / qw.design.n_quarter;
    // geometric mean over the common spectra of the band-variance ratio
    double log_sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < std::min(qw.noise.size(), mw.noise.size()); ++k)
      if (qw.noise[k].variance > 0.0 && mw.noise[k].variance > 0.0) {
        log_sum += std::log(qw.noise[k].variance / mw.noise[k].variance);
        ++count;
      }
    if (count > 0) pair["var_ratio"] = std::exp(log_sum / count);
    if (qw.scaling && mw.scaling) pair["a_ratio"] = qw.scaling->a / mw.scaling->a;
    if (qw.lognormal && mw.lognormal)
      pair["rel_err_ratio"] = qw.lognormal->relative_error() / mw.lognormal->relative_error();
    m["paired"] = pair;
  }
  return m;
}

}  // namespace

SweepFitResult characterize(const ResonatorDesign& design, const TlsModel& tls,
                            const AmplifierModel& amp, const ProtocolConfig& protocol,
                            double temperature, std::uint64_t seed, S21Sweep* sweep_out) {
  const DrivePoint drive = drive_for_density(design, tls, protocol.sweep_density, temperature);
  const double qi = internal_q(design, tls_loss_mean(design, tls, drive));
  const auto freqs = sweep_grid(design.fr, loaded_q(qi, design.qc, design.phi),
                                protocol.sweep_span_linewidths, protocol.sweep_points);
  S21Sweep sweep = simulate_s21_sweep(design, tls, drive, amp, freqs, seed);
  SweepFitResult fit = dcm_fit(sweep);
  if (sweep_out) *sweep_out = std::move(sweep);
  return fit;
}

LossEstimate measure_loss(const S21Series& series, const SweepFitResult& ref) {
  return extract_tls_loss(conformal_map_timeseries(series, ref), ref.qi);
}

NoiseMeasurement measure_noise(const S21Series& series, const SweepFitResult& ref) {
  NoiseMeasurement out;
  const LossEstimate loss = measure_loss(series, ref);
  out.operating_ql = 1.0 / (loss.mean_inv_qi + std::cos(ref.phi) / ref.qc);
  const QuadratureBasis basis = quadrature_basis(ref, out.operating_ql);
  const auto r = project(series, basis, Quadrature::dissipation);
  const auto th = project(series, basis, Quadrature::frequency);
  out.psd_xi = psd_to_xi(stitch_multiresolution(r, series.fs, &out.warnings), basis);
  out.psd_floor = psd_to_xi(stitch_multiresolution(th, series.fs), basis);
  // an odd 0.1 s segment has no Nyquist bin, so the grid may stop short of fs/2
  const double f_hi = std::min({250.0, out.psd_xi.freqs.back(), out.psd_floor.freqs.back()});
  out.variance_raw = integrate_variance(out.psd_xi, 0.1, f_hi);
  out.variance_floor = integrate_variance(out.psd_floor, 0.1, f_hi);
  out.variance = out.variance_raw - out.variance_floor;
  out.rms = std::sqrt(std::max(out.variance, 0.0));
  return out;
}

std::size_t nearest_log_index(const std::vector<double>& values, double target) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const double lt = std::log(std::max(target, 1e-300));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = std::abs(std::log(std::max(values[i], 1e-300)) - lt);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

bool ExperimentResult::all_stages_ok() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageStatus& s) { return s.ok; });
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = config;
  const bool write = !options.out_dir.empty();
  if (write) {
    fs::create_directories(options.out_dir);
    std::ofstream(fs::path(options.out_dir) / "config.ini") << serialize_config(config);
  }

  std::vector<int> arms{config.design.n_quarter};
  if (config.protocol.paired_n_quarter > 0) arms.push_back(config.protocol.paired_n_quarter);
  res.arms.resize(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    std::string dir;
    if (write) {
      dir = (fs::path(options.out_dir) / arm_dir_name(arms[i])).string();
      fs::create_directories(dir);
    }
    run_arm(config, arm_design(config.design, arms[i]), derive_seed(config.seed, 16 + i), dir,
            res.arms[i], res.stages);
  }

  if (write) {
    StageRunner stages(res.stages);
    stages.run("summary", [&](auto& outputs) {
      CsvTable t;
      t.header = {"fr", "N", "E", "Var", "rel_err"};
      for (const auto& arm : res.arms)
        if (arm.lognormal && arm.fits[0])
          t.rows.push_back({arm.fits[0]->fr, static_cast<double>(arm.design.n_quarter),
                            arm.lognormal->mean_xi, arm.lognormal->var_xi,
                            arm.lognormal->relative_error()});
      write_csv((fs::path(options.out_dir) / "summary.csv").string(), t);
      outputs.push_back("summary.csv");
    });
    if (options.figures)
      stages.run("figures", [&](auto& outputs) {
        write_figures(res, options.out_dir);
        outputs.push_back("fig_xi_vs_n.svg");
      });
  }

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.manifest = build_manifest(res, total);
  if (write) std::ofstream(fs::path(options.out_dir) / "manifest.json") << res.manifest.dump(2) << "\n";
  return res;
}

}  // namespace mwres
