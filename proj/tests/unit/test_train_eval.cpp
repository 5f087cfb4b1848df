#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "repcount/error.hpp"
#include "repcount/pipeline.hpp"

using namespace repcount;

namespace {

PipelineConfig tiny() {
  PipelineConfig cfg;
  cfg.channels = 3;
  cfg.w = 5;
  cfg.d_prime = 8;
  cfg.pad_len = 200;
  cfg.knn_k = 10;
  cfg.seed = 5;
  cfg.lr = 3e-3;
  cfg.pretrain_epochs = 2;
  cfg.finetune_epochs = 2;
  return cfg;
}

// Sine bursts whose count equals the number of periods; anchors on the first two.
LabeledSample toy_sample(const std::string& id, int count, std::mt19937_64& rng) {
  LabeledSample s;
  s.sensor.id = id;
  s.sensor.rate_hz = 50.0;
  const std::size_t period = 160 / static_cast<std::size_t>(count);
  s.sensor.values = Matrix(period * count, 3);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (std::size_t r = 0; r < s.sensor.length(); ++r) {
    const double ph = 2.0 * M_PI * static_cast<double>(r % period) / static_cast<double>(period);
    s.sensor.values(r, 0) = std::sin(ph) + noise(rng);
    s.sensor.values(r, 1) = std::cos(ph) + noise(rng);
    s.sensor.values(r, 2) = noise(rng);
  }
  s.count_gt = count;
  s.anchors_override = std::vector<std::size_t>{period / 2 / 5, (period + period / 2) / 5};
  return s;
}

std::vector<LabeledSample> toy_set(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledSample> v;
  for (int c : {2, 4, 5, 8, 10}) v.push_back(toy_sample("toy-" + std::to_string(c), c, rng));
  return v;
}

ScoreMatrix peaked_scores(std::size_t m, std::array<std::size_t, 3> at) {
  ScoreMatrix sc;
  sc.scores = Matrix(m, 3, 0.05);
  for (int u = 0; u < 3; ++u) sc.scores(at[u], u) = 0.9;
  return sc;
}

}  // namespace

TEST(Metrics, Examples) {
  EXPECT_DOUBLE_EQ(mean_absolute_error({3, 5}, {4, 8}), 2.0);
  EXPECT_DOUBLE_EQ(root_mean_squared_error({3, 5}, {4, 8}), std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(mean_absolute_error({7}, {7}), 0.0);
  EXPECT_THROW(mean_absolute_error({}, {}), InputError);
  EXPECT_THROW(root_mean_squared_error({1, 2}, {1}), InputError);
}

TEST(Metrics, RmseDominatesMae) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(1 + rng() % 20), g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = u(rng), g[i] = std::round(u(rng));
    const auto r = make_report(std::vector<std::string>(p.size(), "x"), p, g);
    EXPECT_GE(r.rmse + 1e-12, r.mae);
    EXPECT_GE(r.mae, 0.0);
  }
}

TEST(Schedule, ExponentialDecay) {
  PipelineConfig cfg;
  cfg.lr = 1e-3;
  cfg.lr_decay = 0.9;
  EXPECT_DOUBLE_EQ(epoch_lr(cfg, 0, true), 1e-3);
  EXPECT_NEAR(epoch_lr(cfg, 3, true), 1e-3 * 0.729, 1e-18);
  EXPECT_DOUBLE_EQ(epoch_lr(cfg, 3, false), 1e-3);
}

TEST(Training, OneEpochOneSampleIsOneStep) {
  auto cfg = tiny();
  cfg.finetune_epochs = 1;
  std::mt19937_64 rng(2);
  const auto init = Model::initialize(cfg);
  const auto r = train(init, {}, {toy_sample("one", 4, rng)});
  EXPECT_EQ(r.steps, 1u);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].stage, "finetune");
  EXPECT_NE(r.model.params, init.params);
}

TEST(Training, StagesAndScheduleRecorded) {
  auto cfg = tiny();
  cfg.lr_decay = 0.5;
  cfg.decay_in_pretrain = false;
  const auto data = toy_set(3);
  const auto r = train(Model::initialize(cfg), data, data);
  ASSERT_EQ(r.history.size(), 4u);
  EXPECT_EQ(r.steps, 20u);
  EXPECT_EQ(r.history[0].stage, "pretrain");
  EXPECT_DOUBLE_EQ(r.history[1].lr, cfg.lr);
  EXPECT_EQ(r.history[2].stage, "finetune");
  EXPECT_DOUBLE_EQ(r.history[2].lr, cfg.lr);
  EXPECT_DOUBLE_EQ(r.history[3].lr, cfg.lr * 0.5);
  for (const auto& h : r.history) EXPECT_NEAR(h.loss, h.count_loss + cfg.lambda_pl * h.laplacian_loss, 1e-9 * h.loss);

  TrainOptions no_pre;
  no_pre.pretrain = false;
  EXPECT_EQ(train(Model::initialize(cfg), data, data, no_pre).history.size(), 2u);
  EXPECT_THROW(train(Model::initialize(cfg), {}, {}), InputError);
}

TEST(Training, LossDecreasesOnToySet) {
  auto cfg = tiny();
  cfg.finetune_epochs = 30;
  std::vector<double> losses;
  TrainOptions opt;
  opt.on_epoch = [&](const EpochRecord& r) { losses.push_back(r.count_loss); };
  train(Model::initialize(cfg), {}, toy_set(4), opt);
  ASSERT_EQ(losses.size(), 30u);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
}

TEST(Training, DeterministicGivenSeed) {
  const auto cfg = tiny();
  const auto data = toy_set(5);
  EXPECT_EQ(train(Model::initialize(cfg), data, data).model, train(Model::initialize(cfg), data, data).model);
}

TEST(Training, NonFiniteLossIsReported) {
  const auto cfg = tiny();
  auto model = Model::initialize(cfg);
  std::mt19937_64 rng(6);
  auto p = prepare_sample(toy_sample("bad", 4, rng), cfg, false);
  p.x(7, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_stage(model, {p}, 1, true, "finetune", 1);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'bad'"), std::string::npos);
    EXPECT_NE(msg.find("epoch 0"), std::string::npos);
  }
}

TEST(Counting, CountIsDensitySumAndStable) {
  const auto cfg = tiny();
  const auto model = Model::initialize(cfg);
  std::mt19937_64 rng(7);
  const auto s = toy_sample("c", 5, rng);
  const auto a = count_actions(model, s);
  double sum = 0;
  for (double v : a.density) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_EQ(a.density.size(), 10u);
  EXPECT_NEAR(a.count, sum, 1e-12);
  EXPECT_DOUBLE_EQ(a.density_step_s, 4.0 * 5.0 / 50.0);
  const auto b = count_actions(model, s);
  EXPECT_EQ(a.count, b.count);
  EXPECT_EQ(a.density, b.density);
}

TEST(Anchors, OverrideWinsOverScores) {
  auto cfg = tiny();
  std::mt19937_64 rng(8);
  auto s = toy_sample("o", 4, rng);
  s.anchors_override = std::vector<std::size_t>{12, 3, 30};
  s.scores = peaked_scores(20, {2, 8, 14});
  const auto a = resolve_anchors(s, cfg);
  EXPECT_EQ(a.s1, 3u);
  EXPECT_EQ(a.s2, 12u);
  EXPECT_FALSE(a.positions.has_value());
  s.anchors_override = std::vector<std::size_t>{3, 40};
  EXPECT_THROW(resolve_anchors(s, cfg), ValidationError);
  s.anchors_override.reset();
  s.scores.reset();
  EXPECT_THROW(resolve_anchors(s, cfg), ValidationError);
}

TEST(Anchors, LocalizedFromScores) {
  auto cfg = tiny();
  std::mt19937_64 rng(9);
  auto s = toy_sample("l", 4, rng);
  s.anchors_override.reset();
  s.scores = peaked_scores(20, {2, 8, 14});
  const auto a = resolve_anchors(s, cfg);
  ASSERT_TRUE(a.positions.has_value());
  EXPECT_EQ(a.positions->indices(), (std::array<std::size_t, 3>{2, 8, 14}));
  // Window centers 0.7 s and 1.3 s at 50 Hz with w = 5.
  EXPECT_EQ(a.s1, 7u);
  EXPECT_EQ(a.s2, 13u);
  EXPECT_TRUE(a.warnings.empty());
}

TEST(Evaluation, ReportAndObk) {
  const auto cfg = tiny();
  const auto model = Model::initialize(cfg);
  auto data = toy_set(10);
  data[0].scores = peaked_scores(20, {2, 8, 14});
  data[0].utterance_times_gt_s = std::vector<double>{0.7, 1.3, 2.0};
  const auto rep = evaluate(model, data);
  EXPECT_EQ(rep.ids.size(), 5u);
  std::vector<double> gt;
  for (const auto& s : data) gt.push_back(s.count_gt);
  EXPECT_EQ(rep.ground_truth, gt);
  EXPECT_DOUBLE_EQ(rep.mae, mean_absolute_error(rep.predicted, gt));
  ASSERT_EQ(rep.obk.size(), kObkThresholds.size());
  // Two of three predicted times are exact; the third is off by 0.1 s.
  EXPECT_NEAR(rep.obk[0].second, 1.0, 1e-12);
  const auto j = nlohmann::json::parse(report_to_json_text(rep));
  EXPECT_DOUBLE_EQ(j["mae"].get<double>(), rep.mae);
}

TEST(Evaluation, DensityCsv) {
  const auto cfg = tiny();
  std::mt19937_64 rng(11);
  const auto r = count_actions(Model::initialize(cfg), toy_sample("d", 4, rng));
  const auto path = (std::filesystem::temp_directory_path() / "repcount_test_density.csv").string();
  write_density_csv(r, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t_s,density");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, r.density.size());
  std::filesystem::remove(path);
}

TEST(Metrics, MatchDirectRecomputation) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0.0, 100.0);
  for (int t = 0; t < 100; ++t) {
    const double p = U(rng), g = std::round(U(rng));
    const auto r = make_report({"a", "b"}, {p, 3.0}, {g, 4.0});
    EXPECT_NEAR(r.mae, (std::abs(p - g) + 1.0) / 2.0, 1e-9);
    EXPECT_NEAR(r.rmse, std::sqrt(((p - g) * (p - g) + 1.0) / 2.0), 1e-9);
  }
}

TEST(Training, ToyModelCountsTiledTemplate) {
  // Tiles of one fixed waveform; the trained model must count a held-out tiling.
  auto cfg = tiny();
  cfg.lr = 3e-3;
  cfg.finetune_epochs = 40;
  cfg.lr_decay = 0.97;
  cfg.lambda_pl = 0.0;
  const std::size_t period = 20;
  std::mt19937_64 rng(13);
  const auto tiled = [&](int count, const std::string& id) {
    LabeledSample s;
    s.sensor.id = id;
    s.sensor.rate_hz = 50.0;
    s.sensor.values = Matrix(period * count, 3);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (std::size_t r = 0; r < s.sensor.length(); ++r) {
      const double ph = 2.0 * M_PI * static_cast<double>(r % period) / static_cast<double>(period);
      s.sensor.values(r, 0) = std::sin(ph) + noise(rng);
      s.sensor.values(r, 1) = std::sin(2.0 * ph) + noise(rng);
      s.sensor.values(r, 2) = noise(rng);
    }
    s.count_gt = count;
    s.anchors_override = std::vector<std::size_t>{2, 6};
    return s;
  };
  std::vector<LabeledSample> train_set;
  for (int c : {2, 3, 4, 6, 7, 8, 9, 3, 6, 8}) train_set.push_back(tiled(c, "t" + std::to_string(train_set.size())));
  const auto r = train(Model::initialize(cfg), {}, train_set);
  const double count = count_actions(r.model, tiled(5, "held-out")).count;
  EXPECT_NEAR(count, 5.0, 1.0);
}
