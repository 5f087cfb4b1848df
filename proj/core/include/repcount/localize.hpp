#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

#include "repcount/types.hpp"

namespace repcount {

/// Audio-window indices of the utterances "one", "two", "three".
struct UtterancePositions {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  std::array<double, 3> conf{};
  double product = 0.0;
  /// Set when the best feasible product is exactly zero.
  bool zero_confidence = false;

  std::array<std::size_t, 3> indices() const { return {i, j, k}; }
};

/// Work counters filled by localize_utterances; used to check linear scaling in M.
struct LocalizeStats {
  std::uint64_t inner_steps = 0;
};

/// Maximizes C1[i] * C2[j] * C3[k] subject to i < j < k and k - i <= R in
/// O(R * M) time. Ties resolve to the lexicographically smallest (i, j, k).
UtterancePositions localize_utterances(const ScoreMatrix& scores, std::size_t R,
                                       LocalizeStats* stats = nullptr);

/// Exhaustive reference over every feasible triple. Limited to M <= 200.
UtterancePositions brute_force_localize(const ScoreMatrix& scores, std::size_t R);

/// Independent per-utterance argmax with no ordering or proximity constraint.
UtterancePositions greedy_localize(const ScoreMatrix& scores);

/// The two positions with the highest confidence, in temporal order.
std::pair<std::size_t, std::size_t> select_anchor_pair(const UtterancePositions& pos);

/// Fraction of index-aligned predictions within K seconds of ground truth.
double off_by_k(std::span<const double> pred_times_s, std::span<const double> gt_times_s, double K);

/// Center of audio window `idx` in seconds.
double window_index_to_time(std::size_t idx, const ScoreMatrix& scores);

/// Nearest window whose center is at `t_s`, clamped to [0, M).
std::size_t time_to_window_index(double t_s, const ScoreMatrix& scores);

}  // namespace repcount
