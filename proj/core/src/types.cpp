#include "repcount/types.hpp"

#include <cmath>

#include "repcount/error.hpp"

namespace repcount {

void SensorSequence::validate() const {
  if (values.rows() < 1) throw ValidationError("sample '" + id + "': sensor sequence is empty");
  if (values.cols() < 1) throw ValidationError("sample '" + id + "': sensor sequence has no channels");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw ValidationError("sample '" + id + "': rate_hz must be positive");
  }
  if (!values.all_finite()) throw ValidationError("sample '" + id + "': non-finite sensor value");
}

void ScoreMatrix::validate() const {
  if (scores.cols() != 3) throw ValidationError("score matrix must have 3 columns");
  if (!(stride_s > 0.0)) throw ValidationError("score matrix stride_s must be positive");
  if (!(window_len_s > 0.0)) throw ValidationError("score matrix window_len_s must be positive");
  if (!std::isfinite(t0_s)) throw ValidationError("score matrix t0_s must be finite");
  for (double v : scores.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("score outside [0, 1]");
  }
}

void LabeledSample::validate() const {
  sensor.validate();
  if (count_gt < 0) throw ValidationError("sample '" + id() + "': count_gt must be nonnegative");
  if (scores) {
    try {
      scores->validate();
    } catch (const ValidationError& e) {
      throw ValidationError("sample '" + id() + "': " + e.what());
    }
  }
  if (utterance_times_gt_s) {
    const auto& t = *utterance_times_gt_s;
    if (t.size() != 3) throw ValidationError("sample '" + id() + "': utterance_times_gt_s needs 3 entries");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t[i])) throw ValidationError("sample '" + id() + "': non-finite utterance time");
      if (i > 0 && !(t[i] > t[i - 1])) {
        throw ValidationError("sample '" + id() + "': utterance times must be strictly increasing");
      }
    }
  }
  if (anchors_override && anchors_override->empty()) {
    throw ValidationError("sample '" + id() + "': anchors_override is empty");
  }
}

}  // namespace repcount
