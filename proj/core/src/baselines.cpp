#include "repcount/baselines.hpp"

#include <cmath>
#include <complex>
#include <memory>

#include <fftw3.h>

#include "repcount/error.hpp"

namespace repcount {

MeanBaseline::MeanBaseline(const std::vector<LabeledSample>& train) {
  if (train.empty()) throw InputError("mean_baseline: empty training set");
  double sum = 0.0;
  for (const auto& s : train) sum += s.count_gt;
  mean_ = sum / static_cast<double>(train.size());
}

namespace {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

FrequencyEstimate frequency_baseline(const SensorSequence& x) {
  const std::size_t n = x.length();
  if (n < 2) throw InputError("frequency_baseline: need at least 2 samples");

  const std::size_t bins = n / 2 + 1;
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));

  std::vector<double> magnitude(bins, 0.0);
  double scale = 0.0;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += x.values(t, c);
    mean /= static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
      in.get()[t] = x.values(t, c) - mean;
      scale = std::max(scale, std::abs(x.values(t, c)));
    }
    fftw_execute(plan.get());
    for (std::size_t b = 1; b < bins; ++b) {
      magnitude[b] += std::hypot(out.get()[b][0], out.get()[b][1]);
    }
  }

  FrequencyEstimate est;
  std::size_t best = 0;
  double best_mag = 0.0;
  for (std::size_t b = 1; b < bins; ++b) {
    if (magnitude[b] > best_mag) {
      best_mag = magnitude[b];
      best = b;
    }
  }
  // Rounding residue of a constant signal is ~1e-16 relative to its level.
  const double floor = 1e-9 * static_cast<double>(n) * std::max(scale, 1e-300);
  if (best == 0 || best_mag <= floor) {
    est.degenerate = true;
    return est;
  }
  est.bin = best;
  est.frequency_hz = static_cast<double>(best) * x.rate_hz / static_cast<double>(n);
  est.count = x.duration_s() * est.frequency_hz;
  return est;
}

}  // namespace repcount
