#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "repcount/types.hpp"

namespace repcount {

/// Generator for labeled recordings built from periodic waveform motifs, with
/// idle stretches, distractor activity and simulated utterance score matrices.
struct MotifDataOptions {
  std::size_t samples = 20;
  double rate_hz = 50.0;
  std::size_t channels = 6;
  std::size_t classes = 3;
  int count_min = 3;
  int count_max = 40;
  /// Upper bound on recording length in seconds.
  double max_duration_s = 56.0;
  bool distractors = true;
  /// Seed of the per-class base waveforms; shared between train and test sets.
  std::uint64_t class_seed = 1;
  /// Seed of per-sample motif variation, counts, timing and scores.
  std::uint64_t sample_seed = 2;
  /// Spurious score peaks per utterance class, drawn uniformly from [0, max].
  int max_spurious_peaks = 2;
};

std::vector<LabeledSample> make_motif_dataset(const MotifDataOptions& options);

}  // namespace repcount
