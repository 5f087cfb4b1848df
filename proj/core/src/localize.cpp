#include "repcount/localize.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "repcount/error.hpp"

namespace repcount {

namespace {

void check_inputs(const ScoreMatrix& scores, std::size_t R) {
  if (scores.scores.cols() != 3) throw InputError("localize: score matrix must have 3 columns");
  if (scores.size() < 3) throw InputError("localize: need at least 3 windows, got " + std::to_string(scores.size()));
  if (R < 3) throw InputError("localize: R must be at least 3, got " + std::to_string(R));
}

// (product, i, j, k) with "better" meaning larger product, then lexicographically smaller triple.
struct Candidate {
  double product = -1.0;
  std::size_t i = 0, j = 0, k = 0;

  bool better_than(const Candidate& o) const {
    if (product != o.product) return product > o.product;
    return std::tie(i, j, k) < std::tie(o.i, o.j, o.k);
  }
};

UtterancePositions finish(const ScoreMatrix& s, const Candidate& c) {
  UtterancePositions p;
  p.i = c.i;
  p.j = c.j;
  p.k = c.k;
  p.conf = {s(c.i, 0), s(c.j, 1), s(c.k, 2)};
  p.product = c.product;
  p.zero_confidence = c.product == 0.0;
  return p;
}

}  // namespace

UtterancePositions localize_utterances(const ScoreMatrix& scores, std::size_t R, LocalizeStats* stats) {
  check_inputs(scores, R);
  const std::size_t M = scores.size();
  std::uint64_t steps = 0;

  Candidate best;
  for (std::size_t k = 2; k < M; ++k) {
    // i ranges over [lo, j), j over (i, k); the window k - R .. k holds every feasible pair.
    const std::size_t lo = k >= R ? k - R : 0;
    std::size_t arg_c1 = lo;
    double max_c1 = scores(lo, 0);
    double best_pair = -1.0;
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t j = lo + 1; j < k; ++j) {
      ++steps;
      // Extend the running max of C1 over [lo, j).
      const double c1 = scores(j - 1, 0);
      if (c1 > max_c1) {
        max_c1 = c1;
        arg_c1 = j - 1;
      }
      const double pair = max_c1 * scores(j, 1);
      // The argmax of C1 only moves right as j grows, so strict > keeps the
      // lexicographically smallest (i, j) among equal pair products.
      if (pair > best_pair) {
        best_pair = pair;
        best_i = arg_c1;
        best_j = j;
      }
    }
    Candidate cand{best_pair * scores(k, 2), best_i, best_j, k};
    if (cand.better_than(best)) best = cand;
  }
  if (stats) stats->inner_steps += steps;

  auto out = finish(scores, best);
  // The search space guarantees both constraints; keep the check as a tripwire.
  if (!(out.i < out.j && out.j < out.k && out.k - out.i <= R)) {
    throw Error("localize_utterances: internal constraint violation");
  }
  return out;
}

UtterancePositions brute_force_localize(const ScoreMatrix& scores, std::size_t R) {
  check_inputs(scores, R);
  const std::size_t M = scores.size();
  if (M > 200) throw InputError("brute_force_localize: limited to M <= 200");
  Candidate best;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j) {
      for (std::size_t k = j + 1; k < M && k - i <= R; ++k) {
        Candidate c{scores(i, 0) * scores(j, 1) * scores(k, 2), i, j, k};
        if (c.better_than(best)) best = c;
      }
    }
  }
  return finish(scores, best);
}

UtterancePositions greedy_localize(const ScoreMatrix& scores) {
  if (scores.scores.cols() != 3 || scores.size() < 1) throw InputError("greedy_localize: bad score matrix");
  std::array<std::size_t, 3> idx{};
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t t = 1; t < scores.size(); ++t) {
      if (scores(t, u) > scores(idx[u], u)) idx[u] = t;
    }
  }
  UtterancePositions p;
  p.i = idx[0];
  p.j = idx[1];
  p.k = idx[2];
  p.conf = {scores(p.i, 0), scores(p.j, 1), scores(p.k, 2)};
  p.product = p.conf[0] * p.conf[1] * p.conf[2];
  p.zero_confidence = p.product == 0.0;
  return p;
}

std::pair<std::size_t, std::size_t> select_anchor_pair(const UtterancePositions& pos) {
  std::array<std::size_t, 3> order{0, 1, 2};
  // Stable: equal confidences keep temporal order, so the earlier index wins.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pos.conf[a] > pos.conf[b]; });
  const auto idx = pos.indices();
  std::size_t a = idx[order[0]];
  std::size_t b = idx[order[1]];
  if (a > b) std::swap(a, b);
  return {a, b};
}

double off_by_k(std::span<const double> pred, std::span<const double> gt, double K) {
  if (pred.size() != gt.size()) throw InputError("off_by_k: prediction and ground truth lengths differ");
  if (pred.empty()) throw InputError("off_by_k: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(pred[i] - gt[i]) <= K) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double window_index_to_time(std::size_t idx, const ScoreMatrix& scores) {
  if (idx >= scores.size()) {
    throw InputError("window_index_to_time: index " + std::to_string(idx) + " out of range");
  }
  return scores.t0_s + static_cast<double>(idx) * scores.stride_s + scores.window_len_s / 2.0;
}

std::size_t time_to_window_index(double t_s, const ScoreMatrix& scores) {
  const double raw = std::round((t_s - scores.t0_s - scores.window_len_s / 2.0) / scores.stride_s);
  if (raw <= 0.0 || scores.size() == 0) return 0;
  return std::min(static_cast<std::size_t>(raw), scores.size() - 1);
}

}  // namespace repcount
