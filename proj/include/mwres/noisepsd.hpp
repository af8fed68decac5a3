#pragma once

// Quadrature projection of fixed-frequency S21 records and Welch spectral
// estimation of the resulting loss fluctuations.

#include "mwres/fit.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mwres {

/// Dissipation (r_hat) and frequency (theta_hat) directions at fr, plus the
/// factor that converts a dissipation-quadrature PSD into a ξ PSD.
struct QuadratureBasis {
  cplx r_hat{1.0, 0.0};
  cplx theta_hat{0.0, -1.0};
  double conversion = 1.0;  // Qc² / (Ql⁴ |z∞|²)
};

enum class Quadrature { dissipation, frequency };

/// Directions from the analytic derivatives of the notch model at fr. The
/// conversion uses `operating_ql` when given (the loaded Q at the drive
/// point of the series) and the fitted Ql otherwise.
QuadratureBasis quadrature_basis(const SweepFitResult& ref,
                                 std::optional<double> operating_ql = std::nullopt);

/// Scalar projection of z − ⟨z⟩ onto the chosen direction.
std::vector<double> project(const S21Series& series, const QuadratureBasis& basis,
                            Quadrature which);

/// One-sided spectral density. `resolution` and per-point so that stitched
/// spectra keep the bin width each value was estimated with.
struct PsdEstimate {
  std::vector<double> freqs;
  std::vector<double> values;
  std::vector<double> resolution;
  std::size_t n_averages = 0;  // smallest segment count among contributing estimates

  std::size_t size() const { return freqs.size(); }
};

/// Welch estimate with a periodic Hann window, 50% overlap and constant
/// detrend per segment. The DC bin is dropped. Throws NumericalError when
/// the series holds fewer than two segments.
PsdEstimate welch_psd(std::span<const double> x, double fs, double segment_seconds);

/// 10 s, 1 s and 0.1 s Welch runs kept on [0.1, 1), [1, 10] and (10, fs/2].
/// Bands the record cannot support are dropped with a message in `warnings`.
PsdEstimate stitch_multiresolution(std::span<const double> x, double fs,
                                   std::vector<std::string>* warnings = nullptr);

PsdEstimate psd_to_xi(const PsdEstimate& psd, const QuadratureBasis& basis);

/// Trapezoidal integral of the PSD over [f_lo, f_hi]. Throws NumericalError
/// when the grid does not reach both band edges.
double integrate_variance(const PsdEstimate& psd, double f_lo = 0.1, double f_hi = 250.0);

}  // namespace mwres
