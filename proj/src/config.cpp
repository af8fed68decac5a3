#include "mwres/config.hpp"

#include "mwres/errors.hpp"
#include "mwres/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace mwres {

namespace {

template <typename Int>
Int parse_int(const std::string& s) {
  Int v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty list element in '" + s + "'");
    out.push_back(parse_double(item.substr(b, e - b + 1)));
  }
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MWRES_DOUBLE(sec, name, member)                                              \
  Field {                                                                            \
    sec, name, [](ExperimentConfig& c, const std::string& s) { c.member = parse_double(s); }, \
        [](const ExperimentConfig& c) { return format_double(c.member); }            \
  }
#define MWRES_LIST(sec, name, member)                                                \
  Field {                                                                            \
    sec, name, [](ExperimentConfig& c, const std::string& s) { c.member = parse_list(s); }, \
        [](const ExperimentConfig& c) { return format_list(c.member); }              \
  }
#define MWRES_INT(sec, name, member, type)                                           \
  Field {                                                                            \
    sec, name,                                                                       \
        [](ExperimentConfig& c, const std::string& s) { c.member = parse_int<type>(s); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"design", "kind",
            [](ExperimentConfig& c, const std::string& s) {
              try {
                c.design.kind = resonator_kind_from_string(s);
              } catch (const std::exception& e) {
                throw ConfigError(e.what());
              }
            },
            [](const ExperimentConfig& c) { return to_string(c.design.kind); }},
      MWRES_INT("design", "n_quarter", design.n_quarter, int),
      MWRES_DOUBLE("design", "fr_hz", design.fr),
      MWRES_DOUBLE("design", "qc", design.qc),
      MWRES_DOUBLE("design", "qi_hp", design.qi_hp),
      MWRES_DOUBLE("design", "phi_rad", design.phi),
      MWRES_DOUBLE("design", "tau_s", design.tau),
      Field{"design", "z_inf_re",
            [](ExperimentConfig& c, const std::string& s) { c.design.z_inf.real(parse_double(s)); },
            [](const ExperimentConfig& c) { return format_double(c.design.z_inf.real()); }},
      Field{"design", "z_inf_im",
            [](ExperimentConfig& c, const std::string& s) { c.design.z_inf.imag(parse_double(s)); },
            [](const ExperimentConfig& c) { return format_double(c.design.z_inf.imag()); }},
      MWRES_DOUBLE("tls", "xi0", tls.xi0),
      MWRES_DOUBLE("tls", "nc", tls.nc),
      MWRES_DOUBLE("tls", "fluct_amp", tls.fluct_amp),
      MWRES_DOUBLE("tls", "nc_temp_exponent", tls.nc_temp_exponent),
      MWRES_DOUBLE("tls", "nc_ref_temperature_k", tls.nc_ref_temperature),
      MWRES_INT("ensemble", "k_per_segment", ensemble.k_per_segment, std::size_t),
      MWRES_DOUBLE("ensemble", "rate_lo_hz", ensemble.band.lo),
      MWRES_DOUBLE("ensemble", "rate_hi_hz", ensemble.band.hi),
      MWRES_DOUBLE("amplifier", "tn_k", amp.tn),
      MWRES_DOUBLE("amplifier", "bandwidth_hz", amp.bandwidth),
      MWRES_LIST("protocol", "densities", protocol.densities),
      MWRES_DOUBLE("protocol", "dwell_s", protocol.dwell),
      MWRES_DOUBLE("protocol", "fs_hz", protocol.fs),
      MWRES_DOUBLE("protocol", "sweep_density", protocol.sweep_density),
      MWRES_DOUBLE("protocol", "sweep_span_linewidths", protocol.sweep_span_linewidths),
      MWRES_INT("protocol", "sweep_points", protocol.sweep_points, std::size_t),
      MWRES_INT("protocol", "repeats", protocol.repeats, std::size_t),
      MWRES_DOUBLE("protocol", "repeat_spacing_s", protocol.repeat_spacing),
      MWRES_LIST("protocol", "temperatures_k", protocol.temperatures),
      MWRES_DOUBLE("protocol", "psd_duration_s", protocol.psd_duration),
      MWRES_LIST("protocol", "psd_densities", protocol.psd_densities),
      MWRES_DOUBLE("protocol", "ecdf_density", protocol.ecdf_density),
      MWRES_DOUBLE("protocol", "dkw_alpha", protocol.dkw_alpha),
      MWRES_INT("protocol", "paired_n_quarter", protocol.paired_n_quarter, int),
      MWRES_INT("run", "seed", seed, std::uint64_t),
  };
  return table;
}

#undef MWRES_DOUBLE
#undef MWRES_LIST
#undef MWRES_INT

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool all_positive(const std::vector<double>& v) {
  for (double x : v)
    if (!(x > 0.0)) return false;
  return true;
}

}  // namespace

std::vector<double> default_densities() {
  std::vector<double> d(12);
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = std::pow(10.0, -3.0 + 8.0 * static_cast<double>(i) / 11.0);
  return d;
}

ProtocolConfig::ProtocolConfig() : densities(default_densities()) {}

void ExperimentConfig::validate() const {
  try {
    design.validate();
    tls.validate();
    amp.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  require(ensemble.k_per_segment >= 1, "ensemble.k_per_segment must be >= 1");
  require(ensemble.band.lo > 0.0 && ensemble.band.hi > ensemble.band.lo,
          "ensemble rate band must satisfy 0 < rate_lo_hz < rate_hi_hz");
  const auto& p = protocol;
  require(!p.densities.empty(), "protocol.densities must not be empty");
  for (double n : p.densities) require(n >= 0.0 && std::isfinite(n), "protocol.densities must be >= 0");
  require(p.dwell > 0.0, "protocol.dwell_s must be > 0");
  require(p.fs > 0.0, "protocol.fs_hz must be > 0");
  require(p.dwell * p.fs >= 2.0, "protocol.dwell_s * fs_hz must give at least 2 samples");
  require(p.sweep_density > 0.0, "protocol.sweep_density must be > 0");
  require(p.sweep_span_linewidths > 0.0, "protocol.sweep_span_linewidths must be > 0");
  require(p.sweep_points >= 20, "protocol.sweep_points must be >= 20");
  require(p.repeats >= 1, "protocol.repeats must be >= 1");
  require(p.repeat_spacing >= 0.0, "protocol.repeat_spacing_s must be >= 0");
  require(!p.temperatures.empty() && all_positive(p.temperatures),
          "protocol.temperatures_k must be a non-empty list of positive values");
  require(p.psd_duration >= 0.0, "protocol.psd_duration_s must be >= 0");
  require(all_positive(p.psd_densities), "protocol.psd_densities must be > 0");
  require(p.ecdf_density >= 0.0, "protocol.ecdf_density must be >= 0");
  require(p.dkw_alpha > 0.0 && p.dkw_alpha < 1.0, "protocol.dkw_alpha must lie in (0, 1)");
  require(p.paired_n_quarter == 0 || (p.paired_n_quarter > 0 && p.paired_n_quarter % 2 == 1),
          "protocol.paired_n_quarter must be 0 or a positive odd integer");
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' must belong to a section");
    for (const auto& [key, value] : body) {
      const Field* match = nullptr;
      for (const auto& f : fields())
        if (section == f.section && key == f.key) match = &f;
      if (!match) throw ConfigError("unknown key [" + section + "] " + key);
      try {
        match->set(cfg, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
      }
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (current != f.section) {
      if (!current.empty()) out += "\n";
      current = f.section;
      out += "[" + current + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = serialize_config(cfg);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("config_hash: SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace mwres
