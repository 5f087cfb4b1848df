#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "repcount/config.hpp"
#include "repcount/localize.hpp"
#include "repcount/matrix.hpp"
#include "repcount/model.hpp"
#include "repcount/types.hpp"

namespace repcount {

/// Exemplar anchors in embedding windows, plus the localization they came from.
struct Anchors {
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  std::optional<UtterancePositions> positions;
  std::vector<std::string> warnings;
};

/// Uses anchors_override when present, otherwise localizes the utterances in the score matrix.
Anchors resolve_anchors(const LabeledSample& sample, const PipelineConfig& cfg);

/// A sample made ready for the network: padded input, anchors and (when
/// requested) the k-NN graph over its raw windows.
struct PreparedSample {
  std::string id;
  Matrix x;
  double count_gt = 0.0;
  Anchors anchors;
  std::optional<KnnGraph> graph;
};

PreparedSample prepare_sample(const LabeledSample& sample, const PipelineConfig& cfg, bool with_graph);

struct CountResult {
  double count = 0.0;
  std::vector<double> density;
  /// Seconds between consecutive density values.
  double density_step_s = 0.0;
  Anchors anchors;
};

CountResult count_actions(const Model& model, const LabeledSample& sample);
CountResult count_prepared(const Model& model, const PreparedSample& sample);

struct EpochRecord {
  std::string stage;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double count_loss = 0.0;
  double laplacian_loss = 0.0;
};

struct TrainOptions {
  bool pretrain = true;
  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
};

/// Learning rate of epoch `epoch` (0-based) in a stage.
double epoch_lr(const PipelineConfig& cfg, std::size_t epoch, bool decay);

/// One stage of per-sample Adam with a fresh optimizer state. Aborts with an Error
/// naming the epoch, sample and loss components when a loss is not finite.
std::vector<EpochRecord> train_stage(Model& model, const std::vector<PreparedSample>& data, std::size_t epochs,
                                     bool decay, const std::string& stage, std::uint64_t shuffle_seed,
                                     const std::function<void(const EpochRecord&)>& on_epoch = {},
                                     std::size_t* steps = nullptr);

/// Pretrains on `synthetic` (skipped when empty or disabled) then finetunes on `real`.
TrainResult train(const Model& init, const std::vector<LabeledSample>& synthetic,
                  const std::vector<LabeledSample>& real, const TrainOptions& options = {});

struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<std::string> ids;
  std::vector<double> predicted;
  std::vector<double> ground_truth;
  /// (K seconds, OBK rate) over samples with localization ground truth.
  std::vector<std::pair<double, double>> obk;
};

inline constexpr std::array<double, 5> kObkThresholds{0.25, 0.5, 1.0, 2.0, 3.0};

double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& gt);
double root_mean_squared_error(const std::vector<double>& pred, const std::vector<double>& gt);

EvalReport make_report(std::vector<std::string> ids, std::vector<double> pred, std::vector<double> gt);

/// Predicted utterance times (window centers) against ground truth, pooled over
/// all samples carrying both scores and utterance_times_gt_s.
std::vector<std::pair<double, double>> obk_curve(const std::vector<LabeledSample>& data, const PipelineConfig& cfg);

EvalReport evaluate(const Model& model, const std::vector<LabeledSample>& data);

/// Flat key/value JSON summary with a per-sample table.
std::string report_to_json_text(const EvalReport& report);
void write_report(const EvalReport& report, const std::string& path);

void write_density_csv(const CountResult& result, const std::string& path);

}  // namespace repcount
