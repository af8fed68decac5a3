#pragma once

// Experiment configuration: a sectioned key=value file with units in the
// key names. Parsing validates every value and rejects unknown keys.

#include "mwres/model.hpp"
#include "mwres/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mwres {

struct ProtocolConfig {
  std::vector<double> densities;  // photons per λ/4 segment, one staircase step each
  double dwell = 10.0;            // s
  double fs = 500.0;              // Hz
  double sweep_density = 1e5;     // drive of the high-power characterisation sweep
  double sweep_span_linewidths = 10.0;
  std::size_t sweep_points = 401;
  std::size_t repeats = 100;
  double repeat_spacing = 432.0;  // s between staircase starts beyond the dwell time
  std::vector<double> temperatures{0.01};
  double psd_duration = 100.0;    // s
  std::vector<double> psd_densities{1.0, 10.0, 100.0, 1000.0};
  double ecdf_density = 1.0;      // nearest staircase step feeds the eCDF
  double dkw_alpha = 0.01;
  int paired_n_quarter = 0;       // > 0 adds a second arm with this N

  ProtocolConfig();
};

/// 12 log-spaced densities from 1e-3 to 1e5.
std::vector<double> default_densities();

/// Quarter-wave fluctuation level that puts the relative spread of repeated
/// ξ estimates near one photon at about 25%.
inline constexpr double kDefaultFluctAmp = 4.7e-7;

struct ExperimentConfig {
  ResonatorDesign design;
  TlsModel tls = [] {
    TlsModel t;
    t.fluct_amp = kDefaultFluctAmp;
    return t;
  }();
  AmplifierModel amp;
  EnsembleSpec ensemble;
  ProtocolConfig protocol;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Throws ConfigError for malformed text, unknown sections or keys, and
/// values that violate a module invariant.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Inverse of parse_config; doubles are written in shortest round-trip form.
std::string serialize_config(const ExperimentConfig& cfg);

/// Hex SHA-256 of serialize_config(cfg).
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace mwres
