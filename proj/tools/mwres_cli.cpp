// mwres: synthesize resonator data, fit it, and run the full noise and
// statistics pipeline from the command line.

#include "mwres/config.hpp"
#include "mwres/errors.hpp"
#include "mwres/experiment.hpp"
#include "mwres/io.hpp"
#include "mwres/report.hpp"
#include "mwres/svg.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace mwres;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string format;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

bool want_svg(const Common& c) { return c.format == "svg"; }

void print_key_values(const KeyValues& kv) {
  for (const auto& [k, v] : kv) std::cout << k << " = " << v << "\n";
}

int cmd_synth_sweep(const Common& c, std::optional<double> density) {
  const ExperimentConfig cfg = load(c);
  ProtocolConfig p = cfg.protocol;
  if (density) p.sweep_density = *density;
  const double temp = p.temperatures.front();
  const DrivePoint drive = drive_for_density(cfg.design, cfg.tls, p.sweep_density, temp);
  const double qi = internal_q(cfg.design, tls_loss_mean(cfg.design, cfg.tls, drive));
  const auto freqs = sweep_grid(cfg.design.fr, loaded_q(qi, cfg.design.qc, cfg.design.phi),
                                p.sweep_span_linewidths, p.sweep_points);
  const S21Sweep sweep =
      simulate_s21_sweep(cfg.design, cfg.tls, drive, cfg.amp, freqs, derive_seed(cfg.seed, 3));
  write_sweep_csv(out_path(c, "sweep.csv"), sweep);
  write_key_values(out_path(c, "sweep_truth.csv"),
                   {{"n_density", format_double(drive.n_density)},
                    {"pf_w", format_double(drive.pf)},
                    {"temperature_k", format_double(temp)},
                    {"xi", format_double(sweep.truth->xi)},
                    {"qi", format_double(sweep.truth->qi)},
                    {"ql", format_double(sweep.truth->ql)}});
  if (want_svg(c)) {
    PlotSeries s{"S21", {}, {}, {}, true, false, false, "#1f77b4"};
    for (const auto& z : sweep.samples) {
      s.x.push_back(z.real());
      s.y.push_back(z.imag());
    }
    write_svg(out_path(c, "sweep.svg"), Plot{"Sweep in the complex plane", "Re S21", "Im S21", false, false, {s}});
  }
  return 0;
}

int cmd_synth_series(const Common& c, std::optional<double> density, std::optional<double> duration) {
  const ExperimentConfig cfg = load(c);
  const double n = density.value_or(1.0);
  const double dur = duration.value_or(cfg.protocol.dwell);
  MeasurementSession session(cfg.design, cfg.tls, cfg.amp, cfg.ensemble, cfg.seed);
  const DrivePoint drive =
      drive_for_density(cfg.design, cfg.tls, n, cfg.protocol.temperatures.front());
  const S21Series series = session.record(drive, cfg.protocol.fs, dur);
  write_series_csv(out_path(c, "series.csv"), series);
  write_truth_csv(out_path(c, "truth.csv"), series);
  if (want_svg(c)) {
    PlotSeries s{"xi_true", {}, series.truth->xi, {}, false, true, false, "#1f77b4"};
    for (std::size_t i = 0; i < series.samples.size(); ++i) s.x.push_back(series.time(i));
    write_svg(out_path(c, "truth.svg"), Plot{"Injected loss", "t (s)", "xi", false, false, {s}});
  }
  return 0;
}

int cmd_fit_sweep(const Common& c, const std::string& input) {
  const S21Sweep sweep = read_sweep_csv(input);
  const SweepFitResult fit = dcm_fit(sweep);
  const KeyValues kv = fit_to_key_values(fit);
  write_key_values(out_path(c, "fit.csv"), kv);
  print_key_values(kv);
  if (want_svg(c)) {
    PlotSeries data{"data", {}, {}, {}, true, false, false, "#1f77b4"};
    PlotSeries model{"fit", {}, {}, {}, false, true, false, "#d62728"};
    const ResonatorDesign d = fit.as_design();
    for (std::size_t i = 0; i < sweep.freqs.size(); ++i) {
      data.x.push_back(sweep.samples[i].real());
      data.y.push_back(sweep.samples[i].imag());
      const cplx z = s21_model(d, fit.qi, sweep.freqs[i]);
      model.x.push_back(z.real());
      model.y.push_back(z.imag());
    }
    write_svg(out_path(c, "fit.svg"), Plot{"Sweep fit", "Re S21", "Im S21", false, false, {data, model}});
  }
  return 0;
}

int cmd_map_series(const Common& c, const std::string& series_path, const std::string& fit_path) {
  const S21Series series = read_series_csv(series_path);
  const SweepFitResult fit = fit_from_key_values(read_key_values(fit_path));
  const MappedSeries mapped = conformal_map_timeseries(series, fit);
  const LossEstimate loss = extract_tls_loss(mapped, fit.qi);
  CsvTable t;
  t.header = {"t_s", "inv_qi", "frac_detune", "valid"};
  for (std::size_t i = 0; i < mapped.size(); ++i)
    t.rows.push_back({mapped.t[i], mapped.valid[i] ? mapped.inv_qi[i] : 0.0,
                      mapped.valid[i] ? mapped.frac_detune[i] : 0.0,
                      static_cast<double>(mapped.valid[i])});
  write_csv(out_path(c, "mapped.csv"), t);
  const KeyValues kv = {{"xi", format_double(loss.xi)},
                        {"xi_sem", format_double(loss.std_error)},
                        {"mean_inv_qi", format_double(loss.mean_inv_qi)},
                        {"n_valid", std::to_string(loss.n_valid)},
                        {"n_samples", std::to_string(mapped.size())}};
  write_key_values(out_path(c, "loss.csv"), kv);
  print_key_values(kv);
  if (want_svg(c)) {
    PlotSeries s{"1/Qi", mapped.t, mapped.inv_qi, {}, false, true, false, "#1f77b4"};
    write_svg(out_path(c, "mapped.svg"), Plot{"Mapped loss", "t (s)", "1/Qi", false, false, {s}});
  }
  return 0;
}

int cmd_psd(const Common& c, const std::string& series_path, const std::string& fit_path) {
  const S21Series series = read_series_csv(series_path);
  const SweepFitResult fit = fit_from_key_values(read_key_values(fit_path));
  const NoiseMeasurement m = measure_noise(series, fit);
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  write_psd_csv(out_path(c, "psd.csv"), m.psd_xi);
  write_psd_csv(out_path(c, "psd_floor.csv"), m.psd_floor);
  const KeyValues kv = {{"operating_ql", format_double(m.operating_ql)},
                        {"variance_raw", format_double(m.variance_raw)},
                        {"variance_floor", format_double(m.variance_floor)},
                        {"variance", format_double(m.variance)},
                        {"rms", format_double(m.rms)}};
  write_key_values(out_path(c, "noise.csv"), kv);
  print_key_values(kv);
  if (want_svg(c)) {
    PlotSeries s{"dissipation", m.psd_xi.freqs, m.psd_xi.values, {}, false, true, false, "#1f77b4"};
    PlotSeries f{"frequency", m.psd_floor.freqs, m.psd_floor.values, {}, false, true, false, "#d62728"};
    write_svg(out_path(c, "psd.svg"), Plot{"Loss PSD", "frequency (Hz)", "S_xi (1/Hz)", true, true, {s, f}});
  }
  return 0;
}

int cmd_ecdf(const Common& c, const std::string& input, const std::string& column, double alpha) {
  const CsvTable t = read_csv(input);
  const auto values = t.values(column);
  const EcdfBand band = ecdf_with_dkw(values, alpha);
  const LogNormalFit ln = lognormal_fit(band.curve);
  CsvTable out;
  out.meta["dkw_epsilon"] = format_double(band.epsilon);
  out.header = {"xi", "level", "lower", "upper"};
  for (std::size_t i = 0; i < band.curve.n; ++i)
    out.rows.push_back({band.curve.sorted_samples[i], band.curve.levels[i], band.lower[i], band.upper[i]});
  write_csv(out_path(c, "ecdf.csv"), out);
  const KeyValues kv = {{"n", std::to_string(band.curve.n)},
                        {"dkw_epsilon", format_double(band.epsilon)},
                        {"mu", format_double(ln.mu)},
                        {"sigma", format_double(ln.sigma)},
                        {"mu_err", format_double(ln.mu_err)},
                        {"sigma_err", format_double(ln.sigma_err)},
                        {"mean_xi", format_double(ln.mean_xi)},
                        {"var_xi", format_double(ln.var_xi)},
                        {"rel_err", format_double(ln.relative_error())}};
  write_key_values(out_path(c, "lognormal.csv"), kv);
  print_key_values(kv);
  if (want_svg(c)) {
    const auto& x = band.curve.sorted_samples;
    write_svg(out_path(c, "ecdf.svg"),
              Plot{"Empirical CDF", column, "F", false, false,
                   {{"eCDF", x, band.curve.levels, {}, false, false, true, "#1f77b4"},
                    {"", x, band.lower, {}, false, false, true, "#aaaaaa"},
                    {"", x, band.upper, {}, false, false, true, "#aaaaaa"}}});
  }
  return 0;
}

int cmd_experiment(const Common& c) {
  const ExperimentConfig cfg = load(c);
  ExperimentOptions opt;
  opt.out_dir = c.out;
  opt.figures = c.format != "csv";
  const ExperimentResult res = run_experiment(cfg, opt);
  for (const auto& st : res.stages)
    std::cout << (st.ok ? "ok     " : "FAILED ") << st.name << "  " << st.seconds << " s"
              << (st.ok ? "" : "  " + st.message) << "\n";
  std::cout << "manifest: " << (fs::path(c.out) / "manifest.json").string() << "\n";
  return res.all_stages_ok() ? 0 : kExitNumerical;
}

int cmd_report(const Common& c, std::string input) {
  if (input.empty()) input = c.out;
  fs::path p(input);
  if (fs::is_directory(p)) p /= "manifest.json";
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open manifest '" + p.string() + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return emit_report(manifest, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-wave resonator TLS loss lab: synthesis, fitting, spectra and statistics"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment config (sectioned key = value)");
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
    sub->add_option("--format", common.format, "csv, or svg to add figures")
        ->check(CLI::IsMember({"csv", "svg"}));
  };

  std::optional<double> density, duration;
  std::string input, input2, column = "xi";
  double alpha = 0.01;

  auto* synth_sweep = app.add_subcommand("synth-sweep", "simulate a high-power frequency sweep");
  add_common(synth_sweep);
  synth_sweep->add_option("--density", density, "photons per quarter wave (default: sweep_density)");

  auto* synth_series = app.add_subcommand("synth-series", "simulate a fixed-frequency record");
  add_common(synth_series);
  synth_series->add_option("--density", density, "photons per quarter wave (default 1)");
  synth_series->add_option("--duration", duration, "record length in s (default: dwell_s)");

  auto* fit_sweep = app.add_subcommand("fit-sweep", "fit a sweep CSV");
  add_common(fit_sweep);
  fit_sweep->add_option("sweep", input, "sweep CSV (freq_hz, re, im)")->required();

  auto* map_series = app.add_subcommand("map-series", "map a record to instantaneous loss");
  add_common(map_series);
  map_series->add_option("series", input, "series CSV (t_s, re, im)")->required();
  map_series->add_option("fit", input2, "fit record from fit-sweep")->required();

  auto* psd = app.add_subcommand("psd", "loss PSD and band variance of a record");
  add_common(psd);
  psd->add_option("series", input, "series CSV (t_s, re, im)")->required();
  psd->add_option("fit", input2, "fit record from fit-sweep")->required();

  auto* ecdf_cmd = app.add_subcommand("ecdf", "eCDF, DKW band and log-normal fit");
  add_common(ecdf_cmd);
  ecdf_cmd->add_option("values", input, "CSV with a column of loss values")->required();
  ecdf_cmd->add_option("--column", column, "column name")->capture_default_str();
  ecdf_cmd->add_option("--alpha", alpha, "DKW significance level")->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "run the full pipeline");
  add_common(experiment);

  auto* report = app.add_subcommand("report", "compare a run against truth and reference values");
  add_common(report);
  report->add_option("manifest", input, "manifest.json or run directory (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth_sweep) return cmd_synth_sweep(common, density);
    if (*synth_series) return cmd_synth_series(common, density, duration);
    if (*fit_sweep) return cmd_fit_sweep(common, input);
    if (*map_series) return cmd_map_series(common, input, input2);
    if (*psd) return cmd_psd(common, input, input2);
    if (*ecdf_cmd) return cmd_ecdf(common, input, column, alpha);
    if (*experiment) return cmd_experiment(common);
    if (*report) return cmd_report(common, input);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure in " << e.stage() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
