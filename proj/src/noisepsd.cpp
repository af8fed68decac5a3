#include "mwres/noisepsd.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace mwres {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kJ{0.0, 1.0};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDestroy>;

// Appends the points of `src` with lo <= f < hi (or f <= hi when closed).
void append_band(PsdEstimate& dst, const PsdEstimate& src, double lo, bool lo_closed, double hi,
                 bool hi_closed) {
  const double tol = 1e-9;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double f = src.freqs[i];
    const bool above = lo_closed ? f >= lo - tol : f > lo + tol;
    const bool below = hi_closed ? f <= hi + tol : f < hi - tol;
    if (above && below) {
      dst.freqs.push_back(f);
      dst.values.push_back(src.values[i]);
      dst.resolution.push_back(src.resolution[i]);
    }
  }
  dst.n_averages = dst.n_averages == 0 ? src.n_averages : std::min(dst.n_averages, src.n_averages);
}

}  // namespace

QuadratureBasis quadrature_basis(const SweepFitResult& ref, std::optional<double> operating_ql) {
  // ∂z/∂(1/Qi) at fr = e^{−j2πfrτ} z∞ Ql² e^{jφ} / Qc; ∂z/∂fr carries an extra −j
  const cplx dz = std::exp(-kJ * (2.0 * kPi * ref.fr * ref.tau)) * ref.z_inf * std::exp(kJ * ref.phi);
  QuadratureBasis b;
  b.r_hat = dz / std::abs(dz);
  b.theta_hat = -kJ * b.r_hat;
  const double ql = operating_ql.value_or(ref.ql);
  b.conversion = ref.qc * ref.qc / (std::pow(ql, 4) * std::norm(ref.z_inf));
  return b;
}

std::vector<double> project(const S21Series& series, const QuadratureBasis& basis,
                            Quadrature which) {
  const cplx dir = which == Quadrature::dissipation ? basis.r_hat : basis.theta_hat;
  cplx mean{0.0, 0.0};
  for (const auto& z : series.samples) mean += z;
  if (!series.samples.empty()) mean /= static_cast<double>(series.samples.size());
  std::vector<double> out(series.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (std::conj(dir) * (series.samples[i] - mean)).real();
  return out;
}

PsdEstimate welch_psd(std::span<const double> x, double fs, double segment_seconds) {
  if (!(fs > 0.0) || !(segment_seconds > 0.0))
    throw NumericalError("welch_psd", "fs and segment length must be positive");
  const auto nseg = static_cast<std::size_t>(std::llround(segment_seconds * fs));
  if (nseg < 4) throw NumericalError("welch_psd", "segment shorter than 4 samples");
  const std::size_t step = nseg / 2;
  const std::size_t min_len = nseg + step;
  if (x.size() < min_len)
    throw NumericalError("welch_psd", "series of " + std::to_string(x.size()) +
                                          " samples is too short; at least " +
                                          std::to_string(min_len) +
                                          " are needed for two overlapping segments");

  std::vector<double> window(nseg);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(nseg));
    wsum2 += window[i] * window[i];
  }

  const std::size_t nbins = nseg / 2 + 1;
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * nseg)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nbins)));
  Plan plan(fftw_plan_dft_r2c_1d(static_cast<int>(nseg), in.get(), out.get(), FFTW_ESTIMATE));

  std::vector<double> acc(nbins, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start + nseg <= x.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nseg; ++i) mean += x[start + i];
    mean /= static_cast<double>(nseg);
    for (std::size_t i = 0; i < nseg; ++i) in.get()[i] = (x[start + i] - mean) * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < nbins; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      acc[k] += re * re + im * im;
    }
    ++count;
  }

  PsdEstimate psd;
  psd.n_averages = count;
  const double df = fs / static_cast<double>(nseg);
  const double norm = 1.0 / (fs * wsum2 * static_cast<double>(count));
  for (std::size_t k = 1; k < nbins; ++k) {
    const bool nyquist = nseg % 2 == 0 && k == nbins - 1;
    psd.freqs.push_back(static_cast<double>(k) * df);
    psd.values.push_back(acc[k] * norm * (nyquist ? 1.0 : 2.0));
    psd.resolution.push_back(df);
  }
  return psd;
}

PsdEstimate stitch_multiresolution(std::span<const double> x, double fs,
                                   std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  const double duration = static_cast<double>(x.size()) / fs;
  if (duration < 100.0)
    warn("record of " + std::to_string(duration) +
         " s is shorter than 100 s; the 0.1 Hz band has few averages or is omitted");

  struct Band {
    double seg;
    double lo;
    bool lo_closed;
    double hi;
    bool hi_closed;
  };
  const Band bands[] = {{10.0, 0.1, true, 1.0, false},
                        {1.0, 1.0, true, 10.0, true},
                        {0.1, 10.0, false, fs / 2.0, true}};

  PsdEstimate out;
  for (const auto& b : bands) {
    try {
      const PsdEstimate part = welch_psd(x, fs, b.seg);
      append_band(out, part, b.lo, b.lo_closed, b.hi, b.hi_closed);
    } catch (const NumericalError& e) {
      warn("band starting at " + std::to_string(b.lo) + " Hz omitted: " + e.what());
    }
  }
  if (out.size() == 0)
    throw NumericalError("stitch_multiresolution", "record too short for any resolution band");
  return out;
}

PsdEstimate psd_to_xi(const PsdEstimate& psd, const QuadratureBasis& basis) {
  PsdEstimate out = psd;
  for (double& v : out.values) v *= basis.conversion;
  return out;
}

double integrate_variance(const PsdEstimate& psd, double f_lo, double f_hi) {
  const double tol = 1e-9 * std::max(1.0, f_hi);
  if (psd.size() < 2 || psd.freqs.front() > f_lo + tol || psd.freqs.back() < f_hi - tol)
    throw NumericalError("integrate_variance", "spectrum does not cover the requested band");
  double var = 0.0;
  for (std::size_t i = 0; i + 1 < psd.size(); ++i) {
    const double a = std::max(psd.freqs[i], f_lo);
    const double b = std::min(psd.freqs[i + 1], f_hi);
    if (b <= a) continue;
    // linear interpolation of the segment end values onto [a, b]
    const double span = psd.freqs[i + 1] - psd.freqs[i];
    auto at = [&](double f) {
      return psd.values[i] + (psd.values[i + 1] - psd.values[i]) * (f - psd.freqs[i]) / span;
    };
    var += 0.5 * (at(a) + at(b)) * (b - a);
  }
  return var;
}

}  // namespace mwres
