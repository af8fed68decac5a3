#pragma once

// End-to-end runs: high-power characterisation sweep, repeated power
// staircases mapped to ξ(n), long records for noise spectra and the
// distribution of repeated loss estimates.

#include "mwres/config.hpp"
#include "mwres/fit.hpp"
#include "mwres/noisepsd.hpp"
#include "mwres/stats.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mwres {

/// High-power sweep at `protocol.sweep_density` followed by dcm_fit.
SweepFitResult characterize(const ResonatorDesign& design, const TlsModel& tls,
                            const AmplifierModel& amp, const ProtocolConfig& protocol,
                            double temperature, std::uint64_t seed, S21Sweep* sweep_out = nullptr);

/// Conformal map of one record and ξ = ⟨1/Qi⟩ − 1/Qi,hp with Qi,hp from `ref`.
LossEstimate measure_loss(const S21Series& series, const SweepFitResult& ref);

struct NoiseMeasurement {
  double density = 0.0;
  double operating_ql = 0.0;
  PsdEstimate psd_xi;     // dissipation quadrature in ξ units
  PsdEstimate psd_floor;  // frequency quadrature in the same units
  double variance_raw = 0.0;
  double variance_floor = 0.0;
  double variance = 0.0;  // raw minus floor
  double rms = 0.0;       // sqrt(max(variance, 0))
  std::vector<std::string> warnings;
};

/// S_ξ over [0.1, min(250, fs/2)] Hz. The frequency quadrature carries only
/// amplifier noise in this model, so its band variance is subtracted as the
/// white floor.
NoiseMeasurement measure_noise(const S21Series& series, const SweepFitResult& ref);

struct XiPoint {
  double temperature = 0.0;
  double density = 0.0;
  double xi = 0.0;
  double sem = 0.0;
  double beta = 1.0;
  double xi_corrected = 0.0;  // ξ / β
  double sem_corrected = 0.0;
  double xi_model = 0.0;      // configured mean loss at this drive
  std::size_t repeats = 0;
};

struct PlateauEstimate {
  double temperature = 0.0;
  double xi0 = 0.0;
  double sem = 0.0;  // over repeats of the per-staircase plateau mean
  std::size_t points = 0;
};

struct StageStatus {
  std::string name;
  bool ok = true;
  std::string message;
  double seconds = 0.0;
  std::vector<std::string> outputs;
};

struct ArmResult {
  ResonatorDesign design;
  std::vector<double> temperatures;
  std::vector<std::optional<SweepFitResult>> fits;  // per temperature
  std::vector<double> qi_truth;                     // generator Qi at the sweep drive
  std::vector<XiPoint> curve;                       // temperature-major
  std::vector<std::vector<double>> xi_samples;      // per curve point, one per repeat
  std::vector<PlateauEstimate> plateaus;
  std::optional<double> xi_one_photon;              // ξ at the density nearest 1
  std::vector<NoiseMeasurement> noise;
  std::optional<PowerLawFit> scaling;
  std::optional<EcdfBand> ecdf;
  std::optional<LogNormalFit> lognormal;
  double ecdf_density = 0.0;
};

struct ExperimentOptions {
  std::string out_dir;    // empty: keep results in memory only
  bool figures = true;    // SVG figures next to the CSVs
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ArmResult> arms;
  std::vector<StageStatus> stages;
  nlohmann::json manifest;

  bool all_stages_ok() const;
};

/// Stage failures are recorded in the manifest and the run continues with
/// whatever does not depend on the failed stage.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

/// Index of the entry of `values` nearest to `target` on a log axis.
std::size_t nearest_log_index(const std::vector<double>& values, double target);

}  // namespace mwres
