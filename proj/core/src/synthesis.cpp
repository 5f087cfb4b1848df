#include "repcount/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "repcount/error.hpp"
#include "repcount/localize.hpp"

namespace repcount {

namespace {

constexpr double kDurationLo = 0.75, kDurationHi = 1.33;
constexpr int kShiftMax = 10;
constexpr double kAmplitudeLo = 0.75, kAmplitudeHi = 1.33;
constexpr double kNoiseHi = 0.2;
constexpr double kNoiseSegmentLo = 2.0, kNoiseSegmentHi = 6.0;
constexpr int kMaxAttempts = 8;
constexpr const char* kDbFormat = "repcount-templates";

std::size_t time_to_row(double t_s, double rate_hz, std::size_t n) {
  const double r = std::round(t_s * rate_hz);
  if (r <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(r), n);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double rms(const Matrix& m) {
  double s = 0.0;
  for (double v : m.storage()) s += v * v;
  return m.storage().empty() ? 0.0 : std::sqrt(s / static_cast<double>(m.storage().size()));
}

void append_rows(std::vector<double>& out, const Matrix& m) {
  out.insert(out.end(), m.storage().begin(), m.storage().end());
}

}  // namespace

std::vector<std::string> TemplateDb::classes() const {
  std::set<std::string> s;
  for (const auto& t : templates) s.insert(t.label);
  return {s.begin(), s.end()};
}

TemplateDb mine_templates(const std::vector<LabeledSample>& samples, std::size_t R, const PipelineConfig& cfg,
                          MiningStats* stats) {
  TemplateDb db;
  MiningStats st;
  bool first = true;
  for (const auto& s : samples) {
    if (!s.scores) throw InputError("mine_templates: sample '" + s.id() + "' has no score matrix");
    if (first) {
      db.rate_hz = s.sensor.rate_hz;
      db.channels = s.sensor.channels();
      db.count_lower = db.count_upper = s.count_gt;
      first = false;
    } else {
      if (s.sensor.rate_hz != db.rate_hz || s.sensor.channels() != db.channels) {
        throw ValidationError("mine_templates: sample '" + s.id() + "' differs in rate or channel count");
      }
      db.count_lower = std::min(db.count_lower, s.count_gt);
      db.count_upper = std::max(db.count_upper, s.count_gt);
    }
    ++st.samples;
    const auto pos = localize_utterances(*s.scores, std::min(R, s.scores->size()));
    const auto idx = pos.indices();
    std::array<std::size_t, 3> rows{};
    for (int u = 0; u < 3; ++u) {
      rows[u] = time_to_row(window_index_to_time(idx[u], *s.scores), s.sensor.rate_hz, s.sensor.length());
    }
    for (int seg = 0; seg < 2; ++seg) {
      ++st.candidates;
      const double c_lo = pos.conf[seg], c_hi = pos.conf[seg + 1];
      if (!(c_lo > kTemplateConfidence && c_hi > kTemplateConfidence)) {
        ++st.rejected_confidence;
        continue;
      }
      const std::size_t b = rows[seg], e = rows[seg + 1];
      const double len_s = static_cast<double>(e - b) / s.sensor.rate_hz;
      if (e <= b || len_s < cfg.template_min_s || len_s > cfg.template_max_s) {
        ++st.rejected_length;
        continue;
      }
      db.templates.push_back({s.sensor.values.slice_rows(b, e), s.id(), std::min(c_lo, c_hi), s.action_class()});
    }
  }
  if (db.empty()) {
    std::cerr << "warning: no action templates survived filtering (" << st.candidates << " candidates, "
              << st.rejected_confidence << " below confidence " << kTemplateConfidence << ", " << st.rejected_length
              << " outside [" << cfg.template_min_s << ", " << cfg.template_max_s << "] s)\n";
  }
  if (stats) *stats = st;
  return db;
}

void save_template_db(const TemplateDb& db, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["format"] = kDbFormat;
  doc["rate_hz"] = db.rate_hz;
  doc["channels"] = db.channels;
  doc["count_lower"] = db.count_lower;
  doc["count_upper"] = db.count_upper;
  auto& arr = doc["templates"];
  arr = nlohmann::ordered_json::array();
  for (const auto& t : db.templates) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < t.values.rows(); ++r) {
      const auto row = t.values.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    arr.push_back({{"source_id", t.source_id}, {"label", t.label}, {"confidence", t.confidence}, {"values", rows}});
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write template database '" + path + "'");
  out << doc.dump() << '\n';
}

TemplateDb load_template_db(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open template database '" + path + "'");
  TemplateDb db;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.value("format", "") != kDbFormat) throw ValidationError(path + ": not a template database");
    db.rate_hz = doc.at("rate_hz").get<double>();
    db.channels = doc.at("channels").get<std::size_t>();
    db.count_lower = doc.at("count_lower").get<int>();
    db.count_upper = doc.at("count_upper").get<int>();
    for (const auto& t : doc.at("templates")) {
      const auto rows = t.at("values").get<std::vector<std::vector<double>>>();
      Matrix m(rows.size(), db.channels);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != db.channels) throw ValidationError(path + ": template row width mismatch");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
      }
      db.templates.push_back(
          {std::move(m), t.at("source_id").get<std::string>(), t.at("confidence").get<double>(), t.at("label").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  return db;
}

AugmentParams draw_augment_params(std::mt19937_64& rng) {
  AugmentParams p;
  p.duration = uniform(rng, kDurationLo, kDurationHi);
  p.shift = uniform_int(rng, -kShiftMax, kShiftMax);
  p.amplitude = uniform(rng, kAmplitudeLo, kAmplitudeHi);
  p.noise_std = uniform(rng, 0.0, kNoiseHi);
  return p;
}

Matrix resample_linear(const Matrix& x, double factor) {
  if (!(factor > 0.0)) throw InputError("resample_linear: factor must be positive");
  const std::size_t n = x.rows();
  if (n == 0) return x;
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * factor)));
  if (m == n) return x;
  Matrix out(m, x.cols());
  for (std::size_t t = 0; t < m; ++t) {
    const double p = m == 1 ? 0.0 : static_cast<double>(t) * static_cast<double>(n - 1) / static_cast<double>(m - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(p), n - 1);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double f = p - static_cast<double>(lo);
    for (std::size_t c = 0; c < x.cols(); ++c) out(t, c) = (1.0 - f) * x(lo, c) + f * x(hi, c);
  }
  return out;
}

Matrix augment_template(const Matrix& values, const AugmentParams& p, std::mt19937_64& rng) {
  Matrix r = resample_linear(values, p.duration);
  if (p.shift != 0) {
    Matrix shifted(r.rows(), r.cols());
    const long n = static_cast<long>(r.rows());
    for (long t = 0; t < n; ++t) {
      const long src = t - p.shift;
      if (src < 0 || src >= n) continue;
      std::copy(r.row(static_cast<std::size_t>(src)).begin(), r.row(static_cast<std::size_t>(src)).end(),
                shifted.row(static_cast<std::size_t>(t)).begin());
    }
    r = std::move(shifted);
  }
  if (p.amplitude != 1.0)
    for (auto& v : r.data()) v *= p.amplitude;
  if (p.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, p.noise_std);
    for (auto& v : r.data()) v += noise(rng);
  }
  return r;
}

std::pair<int, int> synth_count_range(int c_lower, int c_upper) {
  const int lo = std::max(1, static_cast<int>(std::floor(0.8 * c_lower + 0.5)));
  const int hi = std::max(lo, static_cast<int>(std::floor(1.2 * c_upper + 0.5)));
  return {lo, hi};
}

LabeledSample synthesize_sample(const TemplateDb& db, int c_lower, int c_upper, const PipelineConfig& cfg,
                                std::mt19937_64& rng, const SynthOptions& options, SynthTrace* trace) {
  if (db.empty()) throw InputError("synthesize_sample: template database is empty");
  if (c_lower < 0 || c_upper < c_lower) throw InputError("synthesize_sample: invalid count range");
  const auto classes = db.classes();
  const std::string label = classes[std::uniform_int_distribution<std::size_t>(0, classes.size() - 1)(rng)];
  std::vector<std::size_t> own, other;
  for (std::size_t t = 0; t < db.templates.size(); ++t) (db.templates[t].label == label ? own : other).push_back(t);

  const auto [lo, hi] = synth_count_range(c_lower, c_upper);
  int count = options.count.value_or(
      std::max(1, static_cast<int>(std::floor(uniform(rng, 0.8 * c_lower, 1.2 * c_upper) + 0.5))));
  if (!options.count) count = std::clamp(count, lo, hi);

  const auto pick = [&](const std::vector<std::size_t>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };
  const auto make_copy = [&](std::size_t t) {
    return options.augment ? augment_template(db.templates[t].values, draw_augment_params(rng), rng)
                           : db.templates[t].values;
  };

  for (int attempt = 0;; ++attempt) {
    std::vector<Matrix> reps;
    for (int c = 0; c < count; ++c) reps.push_back(make_copy(pick(own)));

    struct Insert {
      std::size_t junction;
      Matrix values;
      std::string what;
    };
    std::vector<Insert> inserts;
    if (options.distractors) {
      const int n_dis = uniform_int(rng, 1, 2);
      for (int k = 0; k < n_dis; ++k) {
        Insert ins;
        ins.junction = std::uniform_int_distribution<std::size_t>(0, reps.size())(rng);
        const bool use_template = !other.empty() && uniform_int(rng, 0, 1) == 1;
        if (use_template) {
          const std::size_t t = pick(other);
          const int n_rep = uniform_int(rng, 1, 3);
          std::vector<double> data;
          for (int r = 0; r < n_rep; ++r) append_rows(data, make_copy(t));
          const std::size_t n_rows = data.size() / db.channels;
          ins.values = Matrix(n_rows, db.channels, std::move(data));
          ins.what = "template:" + db.templates[t].label + "x" + std::to_string(n_rep);
        } else {
          const double secs = uniform(rng, kNoiseSegmentLo, kNoiseSegmentHi);
          const auto rows = static_cast<std::size_t>(std::llround(secs * db.rate_hz));
          std::normal_distribution<double> noise(0.0, kNoiseHi * std::max(rms(db.templates[own.front()].values), 1e-3));
          ins.values = Matrix(rows, db.channels);
          for (auto& v : ins.values.data()) v = noise(rng);
          ins.what = "noise:" + std::to_string(secs);
        }
        inserts.push_back(std::move(ins));
      }
      std::stable_sort(inserts.begin(), inserts.end(),
                       [](const Insert& a, const Insert& b) { return a.junction < b.junction; });
    }

    std::size_t total = 0;
    for (const auto& r : reps) total += r.rows();
    for (const auto& ins : inserts) total += ins.values.rows();
    if (total > cfg.pad_len) {
      if (options.count) {
        throw InputError("synthesize_sample: " + std::to_string(count) + " copies do not fit in pad_len " +
                         std::to_string(cfg.pad_len));
      }
      if (attempt + 1 < kMaxAttempts) continue;
      if (count > lo) {
        count = std::max(lo, count * 3 / 4);
        attempt = -1;
        continue;
      }
      throw InputError("synthesize_sample: even " + std::to_string(count) + " copies exceed pad_len " +
                       std::to_string(cfg.pad_len));
    }

    SynthTrace tr;
    tr.label = label;
    tr.count = count;
    std::vector<double> data;
    data.reserve(total * db.channels);
    std::size_t next = 0;
    const auto flush_inserts = [&](std::size_t junction) {
      for (; next < inserts.size() && inserts[next].junction == junction; ++next) {
        append_rows(data, inserts[next].values);
        tr.distractors.push_back(inserts[next].what);
      }
    };
    for (std::size_t c = 0; c < reps.size(); ++c) {
      flush_inserts(c);
      const std::size_t begin = data.size() / db.channels;
      append_rows(data, reps[c]);
      tr.segments.emplace_back(begin, data.size() / db.channels);
      ++tr.copies;
    }
    flush_inserts(reps.size());

    LabeledSample s;
    s.sensor.rate_hz = db.rate_hz;
    const std::size_t n_rows = data.size() / db.channels;
    s.sensor.values = Matrix(n_rows, db.channels, std::move(data));
    s.count_gt = count;
    s.label = label;
    std::vector<std::size_t> anchors;
    std::vector<double> times;
    const std::size_t emb_len = std::max<std::size_t>(1, cfg.pad_len / cfg.w);
    for (std::size_t c = 0; c < std::min<std::size_t>(3, tr.segments.size()); ++c) {
      const double center = 0.5 * static_cast<double>(tr.segments[c].first + tr.segments[c].second);
      times.push_back(center / db.rate_hz);
      anchors.push_back(std::min(emb_len - 1, static_cast<std::size_t>(std::floor(center / cfg.w))));
    }
    if (anchors.size() < 2) anchors.push_back(anchors.back());
    s.anchors_override = anchors;
    if (times.size() == 3 && times[0] < times[1] && times[1] < times[2]) s.utterance_times_gt_s = times;
    if (trace) *trace = std::move(tr);
    return s;
  }
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<LabeledSample> synthesize_dataset(const TemplateDb& db, std::size_t n_real, const PipelineConfig& cfg,
                                              std::uint64_t seed, std::vector<SynthTrace>* traces) {
  if (db.empty()) throw InputError("synthesize_dataset: template database is empty");
  const std::size_t n = n_real * cfg.synth_multiple;
  std::vector<LabeledSample> out;
  out.reserve(n);
  if (traces) traces->clear();
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = sample_rng(seed, i);
    SynthTrace tr;
    auto s = synthesize_sample(db, db.count_lower, db.count_upper, cfg, rng, {}, &tr);
    s.sensor.id = "synth-" + std::to_string(i);
    s.validate();
    out.push_back(std::move(s));
    if (traces) traces->push_back(std::move(tr));
  }
  return out;
}

}  // namespace repcount
