#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "repcount/matrix.hpp"

namespace repcount {

/// Multichannel sensor recording sampled at a fixed rate (N x d).
struct SensorSequence {
  std::string id;
  double rate_hz = 100.0;
  Matrix values;

  std::size_t length() const { return values.rows(); }
  std::size_t channels() const { return values.cols(); }
  double duration_s() const { return static_cast<double>(length()) / rate_hz; }

  /// Throws ValidationError naming the id when an invariant is broken.
  void validate() const;

  bool operator==(const SensorSequence&) const = default;
};

/// Per-window classifier scores for the utterances "one", "two", "three" (M x 3).
struct ScoreMatrix {
  Matrix scores;
  double window_len_s = 1.0;
  double stride_s = 0.1;
  double t0_s = 0.0;

  std::size_t size() const { return scores.rows(); }
  /// Score of window `i` for utterance `u` in {0, 1, 2}.
  double operator()(std::size_t i, std::size_t u) const { return scores(i, u); }

  void validate() const;

  bool operator==(const ScoreMatrix&) const = default;
};

struct LabeledSample {
  SensorSequence sensor;
  std::optional<ScoreMatrix> scores;
  /// Path of the score CSV as written in the dataset record, relative to the dataset file.
  std::optional<std::string> scores_file;
  int count_gt = 0;
  std::optional<std::vector<double>> utterance_times_gt_s;
  /// Embedding-window indices used instead of localizing utterances.
  std::optional<std::vector<std::size_t>> anchors_override;
  /// Action class; template mining falls back to the sample id when absent.
  std::optional<std::string> label;

  const std::string& id() const { return sensor.id; }
  std::string action_class() const { return label ? *label : sensor.id; }

  void validate() const;

  bool operator==(const LabeledSample&) const = default;
};

}  // namespace repcount
