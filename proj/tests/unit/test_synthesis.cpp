#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "repcount/error.hpp"
#include "repcount/localize.hpp"
#include "repcount/motif_data.hpp"
#include "repcount/synthesis.hpp"

using namespace repcount;

namespace {

// 100 Hz, 900 rows; utterance peaks at windows 10, 30, 50 (centers 1.5 s, 3.5 s, 5.5 s).
LabeledSample scored_sample(const std::string& id, std::array<double, 3> conf, int count, double stride_s = 0.1) {
  LabeledSample s;
  s.sensor.id = id;
  s.sensor.rate_hz = 100.0;
  s.sensor.values = Matrix(900, 2);
  for (std::size_t r = 0; r < 900; ++r) {
    s.sensor.values(r, 0) = static_cast<double>(r);
    s.sensor.values(r, 1) = std::sin(0.05 * static_cast<double>(r));
  }
  ScoreMatrix sc;
  sc.scores = Matrix(80, 3, 0.01);
  sc.stride_s = stride_s;
  sc.scores(10, 0) = conf[0];
  sc.scores(30, 1) = conf[1];
  sc.scores(50, 2) = conf[2];
  s.scores = sc;
  s.count_gt = count;
  return s;
}

TemplateDb single_template_db(std::size_t rows, std::size_t channels = 2) {
  TemplateDb db;
  db.rate_hz = 100.0;
  db.channels = channels;
  db.count_lower = 4;
  db.count_upper = 6;
  ActionTemplate t;
  t.values = Matrix(rows, channels);
  for (std::size_t i = 0; i < t.values.data().size(); ++i) t.values.data()[i] = static_cast<double>(i % 17) - 8.0;
  t.source_id = "src";
  t.confidence = 0.9;
  t.label = "a";
  db.templates.push_back(t);
  return db;
}

}  // namespace

TEST(Mining, CutsBetweenConfidentUtterances) {
  PipelineConfig cfg;
  MiningStats st;
  const auto db = mine_templates({scored_sample("s", {0.9, 0.95, 0.8}, 7)}, 150, cfg, &st);
  ASSERT_EQ(db.templates.size(), 2u);
  EXPECT_EQ(db.templates[0].values.rows(), 200u);
  EXPECT_EQ(db.templates[0].values(0, 0), 150.0);
  EXPECT_EQ(db.templates[1].values(0, 0), 350.0);
  EXPECT_EQ(db.templates[1].values(199, 0), 549.0);
  EXPECT_DOUBLE_EQ(db.templates[0].confidence, 0.9);
  EXPECT_DOUBLE_EQ(db.templates[1].confidence, 0.8);
  EXPECT_EQ(db.templates[0].label, "s");
  EXPECT_EQ(db.count_lower, 7);
  EXPECT_EQ(db.count_upper, 7);
  EXPECT_EQ(st.candidates, 2u);
  EXPECT_EQ(st.rejected_confidence, 0u);
}

TEST(Mining, ConfidenceThresholdIsStrict) {
  PipelineConfig cfg;
  MiningStats st;
  const auto db = mine_templates({scored_sample("s", {0.9, 0.95, 0.75}, 7)}, 150, cfg, &st);
  ASSERT_EQ(db.templates.size(), 1u);
  EXPECT_EQ(db.templates[0].values(0, 0), 150.0);
  EXPECT_EQ(st.rejected_confidence, 1u);
}

TEST(Mining, DurationFilter) {
  PipelineConfig cfg;
  cfg.template_max_s = 1.5;
  MiningStats st;
  EXPECT_TRUE(mine_templates({scored_sample("s", {0.9, 0.9, 0.9}, 3)}, 150, cfg, &st).empty());
  EXPECT_EQ(st.rejected_length, 2u);
  cfg.template_max_s = 8.0;
  cfg.template_min_s = 2.5;
  EXPECT_TRUE(mine_templates({scored_sample("s", {0.9, 0.9, 0.9}, 3)}, 150, cfg).empty());
}

TEST(Mining, CountBoundsAndLabels) {
  PipelineConfig cfg;
  auto a = scored_sample("a", {0.9, 0.9, 0.9}, 4);
  auto b = scored_sample("b", {0.9, 0.9, 0.9}, 11);
  b.label = "squat";
  const auto db = mine_templates({a, b}, 150, cfg);
  EXPECT_EQ(db.count_lower, 4);
  EXPECT_EQ(db.count_upper, 11);
  EXPECT_EQ(db.classes(), (std::vector<std::string>{"a", "squat"}));
  auto missing = a;
  missing.scores.reset();
  EXPECT_THROW(mine_templates({missing}, 150, cfg), InputError);
}

TEST(Mining, DatabaseRoundTrip) {
  PipelineConfig cfg;
  const auto db = mine_templates({scored_sample("a", {0.9, 0.9, 0.9}, 4)}, 150, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "repcount_test_db.json").string();
  save_template_db(db, path);
  EXPECT_EQ(load_template_db(path), db);
  std::filesystem::remove(path);
}

TEST(Augment, IdentityParametersReturnInput) {
  const auto db = single_template_db(37);
  std::mt19937_64 rng(1);
  EXPECT_EQ(augment_template(db.templates[0].values, AugmentParams{}, rng), db.templates[0].values);
}

TEST(Augment, DoubleDurationKeepsEndpoints) {
  Matrix x(50, 1);
  for (std::size_t i = 0; i < 50; ++i) x(i, 0) = 2.0 * static_cast<double>(i);
  const Matrix y = resample_linear(x, 2.0);
  ASSERT_EQ(y.rows(), 100u);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_NEAR(y(99, 0), 98.0, 1e-12);
  for (std::size_t i = 1; i < 100; ++i) EXPECT_NEAR(y(i, 0) - y(i - 1, 0), 98.0 / 99.0, 1e-12);
  EXPECT_EQ(resample_linear(x, 0.001).rows(), 1u);
  EXPECT_THROW(resample_linear(x, 0.0), InputError);
}

TEST(Augment, AmplitudeAndShift) {
  const auto x = single_template_db(30).templates[0].values;
  std::mt19937_64 rng(2);
  AugmentParams p;
  p.amplitude = 2.0;
  const Matrix a = augment_template(x, p, rng);
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_EQ(a.data()[i], 2.0 * x.data()[i]);
  p.amplitude = 1.0;
  p.shift = 3;
  const Matrix s = augment_template(x, p, rng);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(s(r, c), r < 3 ? 0.0 : x(r - 3, c));
  p.shift = -4;
  const Matrix n = augment_template(x, p, rng);
  for (std::size_t r = 0; r < 30; ++r) EXPECT_EQ(n(r, 0), r >= 26 ? 0.0 : x(r + 4, 0));
}

TEST(Augment, DrawnParametersStayInRange) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const auto p = draw_augment_params(rng);
    EXPECT_GE(p.duration, 0.75);
    EXPECT_LE(p.duration, 1.33);
    EXPECT_LE(std::abs(p.shift), 10);
    EXPECT_GE(p.amplitude, 0.75);
    EXPECT_LE(p.amplitude, 1.33);
    EXPECT_GE(p.noise_std, 0.0);
    EXPECT_LE(p.noise_std, 0.2);
  }
}

TEST(Synthesis, CountRange) {
  EXPECT_EQ(synth_count_range(3, 210), (std::pair<int, int>{2, 252}));
  EXPECT_EQ(synth_count_range(1, 1), (std::pair<int, int>{1, 1}));
  EXPECT_EQ(synth_count_range(0, 0), (std::pair<int, int>{1, 1}));
}

TEST(Synthesis, PlainTilingRepeatsTheTemplate) {
  const auto db = single_template_db(40);
  PipelineConfig cfg;
  std::mt19937_64 rng(4);
  SynthTrace tr;
  const auto s = synthesize_sample(db, 4, 6, cfg, rng, {false, false, 5}, &tr);
  ASSERT_EQ(s.sensor.length(), 200u);
  EXPECT_EQ(s.count_gt, 5);
  EXPECT_EQ(tr.copies, 5u);
  EXPECT_TRUE(tr.distractors.empty());
  for (std::size_t r = 0; r < 200; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(s.sensor.values(r, c), db.templates[0].values(r % 40, c));
  EXPECT_EQ(*s.anchors_override, (std::vector<std::size_t>{2, 6, 10}));
  EXPECT_EQ(*s.utterance_times_gt_s, (std::vector<double>{0.2, 0.6, 1.0}));
  EXPECT_EQ(s.label, "a");
}

TEST(Synthesis, RejectsImpossibleRequests) {
  PipelineConfig cfg;
  cfg.pad_len = 100;
  cfg.w = 10;
  std::mt19937_64 rng(5);
  EXPECT_THROW(synthesize_sample(single_template_db(40), 4, 6, cfg, rng, {false, false, 3}), InputError);
  EXPECT_THROW(synthesize_sample(TemplateDb{}, 4, 6, cfg, rng), InputError);
  EXPECT_THROW(synthesize_sample(single_template_db(10), 6, 4, cfg, rng), InputError);
}

TEST(Synthesis, OverflowShrinksCountButNotBelowRange) {
  PipelineConfig cfg;
  cfg.pad_len = 2000;
  cfg.w = 10;
  const auto db = single_template_db(100);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    SynthTrace tr;
    const auto s = synthesize_sample(db, 10, 40, cfg, rng, {false, false, std::nullopt}, &tr);
    EXPECT_LE(s.sensor.length(), cfg.pad_len);
    EXPECT_GE(s.count_gt, 8);
    EXPECT_EQ(static_cast<std::size_t>(s.count_gt), tr.segments.size());
  }
}

TEST(Synthesis, DatasetSizeAndDeterminism) {
  auto cfg = PipelineConfig::desk();
  MotifDataOptions opt;
  opt.samples = 5;
  const auto real = make_motif_dataset(opt);
  const auto db = mine_templates(real, cfg.R, cfg);
  ASSERT_FALSE(db.empty());
  const auto a = synthesize_dataset(db, 5, cfg, 9);
  EXPECT_EQ(a.size(), 50u);
  EXPECT_EQ(a, synthesize_dataset(db, 5, cfg, 9));
  EXPECT_NE(a, synthesize_dataset(db, 5, cfg, 10));
  cfg.synth_multiple = 2;
  const auto b = synthesize_dataset(db, 5, cfg, 9);
  ASSERT_EQ(b.size(), 10u);
  auto rng = sample_rng(9, 3);
  EXPECT_EQ(b[3].sensor.values, synthesize_sample(db, db.count_lower, db.count_upper, cfg, rng).sensor.values);
}

TEST(Synthesis, EverySampleIsValid) {
  const auto cfg = PipelineConfig::desk();
  MotifDataOptions opt;
  opt.samples = 8;
  opt.sample_seed = 12;
  const auto db = mine_templates(make_motif_dataset(opt), cfg.R, cfg);
  ASSERT_FALSE(db.empty());
  std::vector<SynthTrace> traces;
  const auto data = synthesize_dataset(db, 8, cfg, 3, &traces);
  const auto [lo, hi] = synth_count_range(db.count_lower, db.count_upper);
  ASSERT_EQ(traces.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.id(), "synth-" + std::to_string(i));
    EXPECT_LE(s.sensor.length(), cfg.pad_len);
    EXPECT_GE(s.count_gt, lo);
    EXPECT_LE(s.count_gt, hi);
    EXPECT_EQ(traces[i].segments.size(), static_cast<std::size_t>(s.count_gt));
    EXPECT_GE(traces[i].distractors.size(), 1u);
    EXPECT_LE(traces[i].distractors.size(), 2u);
    for (std::size_t k = 1; k < traces[i].segments.size(); ++k)
      EXPECT_GE(traces[i].segments[k].first, traces[i].segments[k - 1].second);
    ASSERT_TRUE(s.anchors_override.has_value());
    EXPECT_GE(s.anchors_override->size(), 2u);
    for (std::size_t a : *s.anchors_override) EXPECT_LT(a, cfg.pad_len / cfg.w);
  }
}

TEST(Mining, MatchesHandLoopedFilter) {
  PipelineConfig cfg = PipelineConfig::desk();
  MotifDataOptions opt;
  opt.samples = 20;
  opt.sample_seed = 31;
  const auto data = make_motif_dataset(opt);
  std::vector<ActionTemplate> want;
  for (const auto& s : data) {
    const auto& sc = *s.scores;
    const auto pos = localize_utterances(sc, std::min(cfg.R, sc.size()));
    const std::size_t idx[3] = {pos.i, pos.j, pos.k};
    const double conf[3] = {sc(pos.i, 0), sc(pos.j, 1), sc(pos.k, 2)};
    std::size_t rows[3];
    for (int u = 0; u < 3; ++u) {
      const double t = sc.t0_s + static_cast<double>(idx[u]) * sc.stride_s + 0.5 * sc.window_len_s;
      rows[u] = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, std::round(t * s.sensor.rate_hz))), s.sensor.length());
    }
    for (int seg = 0; seg < 2; ++seg) {
      if (conf[seg] <= 0.75 || conf[seg + 1] <= 0.75) continue;
      if (rows[seg + 1] <= rows[seg]) continue;
      const double len = static_cast<double>(rows[seg + 1] - rows[seg]) / s.sensor.rate_hz;
      if (len < cfg.template_min_s || len > cfg.template_max_s) continue;
      want.push_back({s.sensor.values.slice_rows(rows[seg], rows[seg + 1]), s.id(), std::min(conf[seg], conf[seg + 1]),
                      s.action_class()});
    }
  }
  const auto db = mine_templates(data, cfg.R, cfg);
  EXPECT_FALSE(want.empty());
  EXPECT_EQ(db.templates, want);
}

TEST(Synthesis, WideCountRangeRespected) {
  auto db = single_template_db(10);
  db.count_lower = 3;
  db.count_upper = 210;
  PipelineConfig cfg;
  std::mt19937_64 rng(13);
  int seen_lo = 1000, seen_hi = 0;
  for (int t = 0; t < 300; ++t) {
    const auto s = synthesize_sample(db, 3, 210, cfg, rng);
    EXPECT_GE(s.count_gt, 2);
    EXPECT_LE(s.count_gt, 252);
    seen_lo = std::min(seen_lo, s.count_gt);
    seen_hi = std::max(seen_hi, s.count_gt);
  }
  EXPECT_LT(seen_lo, 20);
  EXPECT_GT(seen_hi, 230);
}
