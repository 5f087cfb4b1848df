#include "repcount/motif_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "repcount/error.hpp"
#include "repcount/synthesis.hpp"

namespace repcount {

namespace {

constexpr int kHarmonics = 3;
constexpr double kWindowLen = 1.0;
constexpr double kStride = 0.1;

struct Motif {
  // [channel][harmonic]
  std::vector<std::array<double, kHarmonics>> amp;
  std::vector<std::array<double, kHarmonics>> phase;
  std::vector<double> offset;
};

Motif base_motif(std::size_t channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a1(0.6, 1.4), a_hi(0.0, 0.5), ph(0.0, 2.0 * std::numbers::pi),
      off(-0.5, 0.5);
  Motif m;
  for (std::size_t c = 0; c < channels; ++c) {
    m.amp.push_back({a1(rng), a_hi(rng), 0.5 * a_hi(rng)});
    m.phase.push_back({ph(rng), ph(rng), ph(rng)});
    m.offset.push_back(off(rng));
  }
  return m;
}

Motif perturb(const Motif& base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.8, 1.25), dphase(-0.4, 0.4);
  Motif m = base;
  for (std::size_t c = 0; c < m.amp.size(); ++c)
    for (int h = 0; h < kHarmonics; ++h) {
      m.amp[c][h] *= scale(rng);
      m.phase[c][h] += dphase(rng);
    }
  return m;
}

void append_motif(std::vector<double>& out, const Motif& m, std::size_t rows) {
  const std::size_t C = m.amp.size();
  for (std::size_t t = 0; t < rows; ++t) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(rows);
    for (std::size_t c = 0; c < C; ++c) {
      double v = m.offset[c];
      for (int h = 0; h < kHarmonics; ++h) v += m.amp[c][h] * std::sin((h + 1) * x + m.phase[c][h]);
      out.push_back(v);
    }
  }
}

void append_idle(std::vector<double>& out, std::size_t rows, std::size_t channels, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.03);
  for (std::size_t i = 0; i < rows * channels; ++i) out.push_back(n(rng));
}

void add_bump(Matrix& s, std::size_t u, double center, double height, double width) {
  const auto lo = static_cast<long>(std::floor(center - 4 * width));
  const auto hi = static_cast<long>(std::ceil(center + 4 * width));
  for (long i = std::max(0L, lo); i <= std::min<long>(hi, static_cast<long>(s.rows()) - 1); ++i) {
    const double z = (static_cast<double>(i) - center) / width;
    s(static_cast<std::size_t>(i), u) = std::max(s(static_cast<std::size_t>(i), u), height * std::exp(-0.5 * z * z));
  }
}

}  // namespace

std::vector<LabeledSample> make_motif_dataset(const MotifDataOptions& o) {
  if (o.samples == 0 || o.classes == 0 || o.channels == 0) throw InputError("make_motif_dataset: empty request");
  if (o.count_min < 3 || o.count_max < o.count_min) throw InputError("make_motif_dataset: counts must be >= 3");

  std::mt19937_64 class_rng(o.class_seed);
  std::vector<Motif> bases;
  for (std::size_t k = 0; k < o.classes; ++k) bases.push_back(base_motif(o.channels, class_rng));

  std::vector<LabeledSample> out;
  for (std::size_t n = 0; n < o.samples; ++n) {
    auto rng = sample_rng(o.sample_seed, n);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const std::size_t cls = std::uniform_int_distribution<std::size_t>(0, o.classes - 1)(rng);
    const Motif motif = perturb(bases[cls], rng);
    const int count = std::uniform_int_distribution<int>(o.count_min, o.count_max)(rng);

    // Idle time and distractors take at most 20 s plus rounding; periods jitter by up to 10%.
    const double budget = (o.max_duration_s - 21.0) / 1.1;
    const double p_hi = std::max(0.55, std::min(1.2, budget / count));
    const double period = 0.55 + U(rng) * (p_hi - 0.55);

    std::vector<double> data;
    std::vector<double> rep_centers;
    append_idle(data, static_cast<std::size_t>((1.0 + 3.0 * U(rng)) * o.rate_hz), o.channels, rng);

    const int n_dis = o.distractors ? 1 + static_cast<int>(U(rng) * 2.0) : 0;
    std::vector<int> dis_at;
    for (int k = 0; k < n_dis; ++k) dis_at.push_back(3 + std::uniform_int_distribution<int>(0, count - 3)(rng));
    std::sort(dis_at.begin(), dis_at.end());

    std::size_t next_dis = 0;
    const auto insert_distractors = [&](int junction) {
      for (; next_dis < dis_at.size() && dis_at[next_dis] == junction; ++next_dis) {
        if (o.classes > 1 && U(rng) < 0.5) {
          std::size_t other = std::uniform_int_distribution<std::size_t>(0, o.classes - 2)(rng);
          if (other >= cls) ++other;
          const Motif dm = perturb(bases[other], rng);
          const double dp = 0.6 + 0.8 * U(rng);
          const int reps = 1 + static_cast<int>(U(rng) * 3.0);
          for (int r = 0; r < reps; ++r) append_motif(data, dm, static_cast<std::size_t>(dp * o.rate_hz));
        } else {
          std::normal_distribution<double> nz(0.0, 0.3);
          const auto rows = static_cast<std::size_t>((2.0 + 4.0 * U(rng)) * o.rate_hz);
          for (std::size_t i = 0; i < rows * o.channels; ++i) data.push_back(nz(rng));
        }
      }
    };

    for (int r = 0; r < count; ++r) {
      insert_distractors(r);
      const double p = period * (0.9 + 0.2 * U(rng));
      const auto rows = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(p * o.rate_hz)));
      const double begin = static_cast<double>(data.size() / o.channels);
      append_motif(data, motif, rows);
      rep_centers.push_back((begin + 0.5 * static_cast<double>(rows)) / o.rate_hz);
    }
    insert_distractors(count);
    append_idle(data, static_cast<std::size_t>((1.0 + 3.0 * U(rng)) * o.rate_hz), o.channels, rng);

    std::normal_distribution<double> sensor_noise(0.0, 0.05);
    for (auto& v : data) v += sensor_noise(rng);
    const std::size_t max_rows = static_cast<std::size_t>(o.max_duration_s * o.rate_hz);
    if (data.size() / o.channels > max_rows) {
      throw InputError("make_motif_dataset: sample exceeds max_duration_s; raise it or lower count_max");
    }

    LabeledSample s;
    s.sensor.id = "motif-" + std::to_string(n);
    s.sensor.rate_hz = o.rate_hz;
    const std::size_t n_rows = data.size() / o.channels;
    s.sensor.values = Matrix(n_rows, o.channels, std::move(data));
    s.count_gt = count;
    s.label = "class-" + std::to_string(cls);

    const double duration = s.sensor.duration_s();
    const auto M = static_cast<std::size_t>(std::floor((duration - kWindowLen) / kStride)) + 1;
    ScoreMatrix sm;
    sm.scores = Matrix(M, 3);
    for (double& v : sm.scores.data()) v = 0.05 * U(rng);
    std::vector<double> times;
    for (std::size_t u = 0; u < 3; ++u) {
      const double t = rep_centers[u] + 0.1 * (U(rng) - 0.5);
      times.push_back(t);
      const double center = (t - kWindowLen / 2) / kStride;
      add_bump(sm.scores, u, center, 0.7 + 0.28 * U(rng), 1.5);
    }
    const int max_sp = std::max(0, o.max_spurious_peaks);
    for (std::size_t u = 0; u < 3; ++u) {
      const int n_sp = std::uniform_int_distribution<int>(0, max_sp)(rng);
      for (int k = 0; k < n_sp; ++k) {
        const double center = U(rng) * static_cast<double>(M - 1);
        add_bump(sm.scores, u, center, 0.5 + 0.49 * U(rng), 1.5);
      }
    }
    s.scores = std::move(sm);
    if (times[0] < times[1] && times[1] < times[2]) s.utterance_times_gt_s = times;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace repcount
