#include "mwres/io.hpp"

#include "mwres/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mwres {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

double meta_double(const CsvTable& t, const std::string& key, const std::string& path) {
  const auto it = t.meta.find(key);
  if (it == t.meta.end()) throw ConfigError(path + ": missing '# " + key + "=' metadata line");
  return parse_double(it->second);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v))
    throw ConfigError("not a finite number: '" + s + "'");
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("missing column '" + name + "'");
}

std::vector<double> CsvTable::values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.meta[trim(line.substr(1, eq - 1))] = trim(line.substr(eq + 1));
      continue;
    }
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    row.reserve(cells.size());
    try {
      for (const auto& c : cells) row.push_back(parse_double(c));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ConfigError(path + ": no header row");
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  auto out = open_out(path);
  for (const auto& [k, v] : table.meta) out << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

void write_key_values(const std::string& path, const KeyValues& kv) {
  auto out = open_out(path);
  out << "key,value\n";
  for (const auto& [k, v] : kv) out << k << "," << v << "\n";
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError(path + ": malformed line '" + line + "'");
    kv[trim(line.substr(0, comma))] = trim(line.substr(comma + 1));
  }
  return kv;
}

void write_sweep_csv(const std::string& path, const S21Sweep& sweep) {
  CsvTable t;
  t.header = {"freq_hz", "re", "im"};
  for (std::size_t i = 0; i < sweep.freqs.size(); ++i)
    t.rows.push_back({sweep.freqs[i], sweep.samples[i].real(), sweep.samples[i].imag()});
  write_csv(path, t);
}

S21Sweep read_sweep_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  S21Sweep s;
  s.freqs = t.values("freq_hz");
  const auto re = t.values("re");
  const auto im = t.values("im");
  for (std::size_t i = 0; i < re.size(); ++i) s.samples.emplace_back(re[i], im[i]);
  return s;
}

void write_series_csv(const std::string& path, const S21Series& series) {
  CsvTable t;
  t.meta["fs_hz"] = format_double(series.fs);
  t.meta["f_probe_hz"] = format_double(series.f_probe);
  t.header = {"t_s", "re", "im"};
  for (std::size_t i = 0; i < series.samples.size(); ++i)
    t.rows.push_back({series.time(i), series.samples[i].real(), series.samples[i].imag()});
  write_csv(path, t);
}

S21Series read_series_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  S21Series s;
  s.fs = meta_double(t, "fs_hz", path);
  s.f_probe = meta_double(t, "f_probe_hz", path);
  const auto re = t.values("re");
  const auto im = t.values("im");
  for (std::size_t i = 0; i < re.size(); ++i) s.samples.emplace_back(re[i], im[i]);
  return s;
}

void write_truth_csv(const std::string& path, const S21Series& series) {
  if (!series.truth) throw std::invalid_argument("write_truth_csv: series carries no truth");
  CsvTable t;
  t.meta["n_density"] = format_double(series.truth->drive.n_density);
  t.meta["pf_w"] = format_double(series.truth->drive.pf);
  t.meta["temperature_k"] = format_double(series.truth->drive.temperature);
  t.meta["xi_mean_model"] = format_double(series.truth->xi_mean_model);
  t.header = {"t_s", "xi_true"};
  for (std::size_t i = 0; i < series.truth->xi.size(); ++i)
    t.rows.push_back({series.time(i), series.truth->xi[i]});
  write_csv(path, t);
}

void write_psd_csv(const std::string& path, const PsdEstimate& psd) {
  CsvTable t;
  t.meta["n_averages"] = std::to_string(psd.n_averages);
  t.header = {"freq_hz", "psd_value", "resolution_hz"};
  for (std::size_t i = 0; i < psd.size(); ++i)
    t.rows.push_back({psd.freqs[i], psd.values[i], psd.resolution[i]});
  write_csv(path, t);
}

PsdEstimate read_psd_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  PsdEstimate p;
  p.freqs = t.values("freq_hz");
  p.values = t.values("psd_value");
  p.resolution = t.values("resolution_hz");
  if (const auto it = t.meta.find("n_averages"); it != t.meta.end())
    p.n_averages = static_cast<std::size_t>(parse_double(it->second));
  return p;
}

KeyValues fit_to_key_values(const SweepFitResult& fit) {
  const auto f = format_double;
  return {{"fr_hz", f(fit.fr)},
          {"ql", f(fit.ql)},
          {"qc", f(fit.qc)},
          {"qi", f(fit.qi)},
          {"phi_rad", f(fit.phi)},
          {"tau_s", f(fit.tau)},
          {"z_inf_re", f(fit.z_inf.real())},
          {"z_inf_im", f(fit.z_inf.imag())},
          {"sigma_fr_hz", f(fit.sigmas.fr)},
          {"sigma_ql", f(fit.sigmas.ql)},
          {"sigma_qc", f(fit.sigmas.qc)},
          {"sigma_qi", f(fit.sigmas.qi)},
          {"sigma_phi_rad", f(fit.sigmas.phi)},
          {"sigma_tau_s", f(fit.sigmas.tau)},
          {"sigma_z_inf", f(fit.sigmas.z_inf)},
          {"residual_rms", f(fit.residual_rms)},
          {"refined", fit.refined ? "1" : "0"}};
}

SweepFitResult fit_from_key_values(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("fit record lacks '" + k + "'");
    return parse_double(it->second);
  };
  SweepFitResult fit;
  fit.fr = get("fr_hz");
  fit.ql = get("ql");
  fit.qc = get("qc");
  fit.qi = get("qi");
  fit.phi = get("phi_rad");
  fit.tau = get("tau_s");
  fit.z_inf = cplx(get("z_inf_re"), get("z_inf_im"));
  fit.sigmas.fr = get("sigma_fr_hz");
  fit.sigmas.ql = get("sigma_ql");
  fit.sigmas.qc = get("sigma_qc");
  fit.sigmas.qi = get("sigma_qi");
  fit.sigmas.phi = get("sigma_phi_rad");
  fit.sigmas.tau = get("sigma_tau_s");
  fit.sigmas.z_inf = get("sigma_z_inf");
  fit.residual_rms = get("residual_rms");
  fit.refined = get("refined") != 0.0;
  return fit;
}

}  // namespace mwres
