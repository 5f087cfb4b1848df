#pragma once

#include <vector>

#include "repcount/types.hpp"

namespace repcount {

/// Predicts the mean training count for every input.
class MeanBaseline {
 public:
  explicit MeanBaseline(const std::vector<LabeledSample>& train);
  double predict(const SensorSequence&) const { return mean_; }
  double mean() const { return mean_; }

 private:
  double mean_ = 0.0;
};

struct FrequencyEstimate {
  double count = 0.0;
  double frequency_hz = 0.0;
  std::size_t bin = 0;
  bool degenerate = false;
};

/// Duration times the dominant non-DC frequency of the summed per-channel
/// magnitude spectra (each channel mean-removed).
FrequencyEstimate frequency_baseline(const SensorSequence& x);

}  // namespace repcount
