#include "repcount/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "repcount/autodiff/adam.hpp"
#include "repcount/autodiff/ops.hpp"
#include "repcount/dataset.hpp"
#include "repcount/embed.hpp"
#include "repcount/error.hpp"
#include "repcount/preprocess.hpp"

namespace repcount {

namespace {

UtterancePositions run_localizer(const ScoreMatrix& scores, const PipelineConfig& cfg) {
  if (cfg.localizer == LocalizerMode::kGreedy) return greedy_localize(scores);
  return localize_utterances(scores, std::min(cfg.R, scores.size()));
}

Matrix model_input(const LabeledSample& sample, const PipelineConfig& cfg) {
  if (sample.sensor.channels() != cfg.channels) {
    throw ValidationError("sample '" + sample.id() + "' has " + std::to_string(sample.sensor.channels()) +
                          " channels, the model expects " + std::to_string(cfg.channels));
  }
  SensorSequence s = cfg.zscore ? zscore_channels(sample.sensor) : sample.sensor;
  return pad_to_length(s, cfg.pad_len).values;
}

}  // namespace

Anchors resolve_anchors(const LabeledSample& sample, const PipelineConfig& cfg) {
  const std::size_t emb_len = cfg.pad_len / cfg.w;
  Anchors a;
  if (sample.anchors_override && sample.anchors_override->size() >= 2) {
    a.s1 = std::min((*sample.anchors_override)[0], (*sample.anchors_override)[1]);
    a.s2 = std::max((*sample.anchors_override)[0], (*sample.anchors_override)[1]);
    if (a.s2 >= emb_len) throw ValidationError("sample '" + sample.id() + "': anchor beyond the padded sequence");
    return a;
  }
  if (!sample.scores) {
    throw ValidationError("sample '" + sample.id() + "' has neither a score matrix nor anchors_override");
  }
  const auto pos = run_localizer(*sample.scores, cfg);
  if (pos.zero_confidence) a.warnings.push_back("utterance localization found no positive-confidence triple");
  const auto [p1, p2] = select_anchor_pair(pos);
  a.s1 = map_audio_to_embedding(p1, *sample.scores, sample.sensor.rate_hz, cfg.w, emb_len);
  a.s2 = map_audio_to_embedding(p2, *sample.scores, sample.sensor.rate_hz, cfg.w, emb_len);
  a.positions = pos;
  return a;
}

PreparedSample prepare_sample(const LabeledSample& sample, const PipelineConfig& cfg, bool with_graph) {
  PreparedSample p;
  p.id = sample.id();
  p.x = model_input(sample, cfg);
  p.count_gt = sample.count_gt;
  p.anchors = resolve_anchors(sample, cfg);
  if (with_graph && cfg.lambda_pl > 0.0) p.graph = build_knn_graph(raw_windows(p.x, cfg.w), cfg.knn_k);
  return p;
}

CountResult count_prepared(const Model& model, const PreparedSample& sample) {
  const auto& cfg = model.config;
  ad::Tape tape;
  ad::BoundParams params(tape, model.params, false);
  const auto x = tape.constant(ad::Tensor::from_matrix(sample.x));
  const auto fp = forward(params, x, sample.anchors.s1, sample.anchors.s2, cfg);
  CountResult r;
  const auto& d = fp.density.value().storage();
  r.density.assign(d.begin(), d.end());
  r.count = predicted_count(r.density);
  r.anchors = sample.anchors;
  return r;
}

CountResult count_actions(const Model& model, const LabeledSample& sample) {
  auto r = count_prepared(model, prepare_sample(sample, model.config, false));
  r.density_step_s = static_cast<double>(model.config.w * kPyramidStride) / sample.sensor.rate_hz;
  return r;
}

double epoch_lr(const PipelineConfig& cfg, std::size_t epoch, bool decay) {
  return decay ? cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch)) : cfg.lr;
}

std::vector<EpochRecord> train_stage(Model& model, const std::vector<PreparedSample>& data, std::size_t epochs,
                                     bool decay, const std::string& stage, std::uint64_t shuffle_seed,
                                     const std::function<void(const EpochRecord&)>& on_epoch, std::size_t* steps) {
  const auto& cfg = model.config;
  if (data.empty() && epochs > 0) throw InputError("train: stage '" + stage + "' has no training data");
  ad::AdamState adam;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.eps = cfg.adam_eps;
  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(data.size());
  std::vector<EpochRecord> history;
  for (std::size_t e = 0; e < epochs; ++e) {
    adam.lr = epoch_lr(cfg, e, decay);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec{stage, e, adam.lr, 0.0, 0.0, 0.0};
    for (std::size_t idx : order) {
      const auto& s = data[idx];
      ad::Tape tape;
      ad::BoundParams params(tape, model.params, true);
      const auto x = tape.constant(ad::Tensor::from_matrix(s.x));
      const auto fp = forward(params, x, s.anchors.s1, s.anchors.s2, cfg);
      const auto lc = counting_loss(fp.density, s.count_gt);
      ad::Var loss = lc;
      double lpl = 0.0;
      if (s.graph && cfg.lambda_pl > 0.0) {
        const auto lp = laplacian_loss(fp.x_emb, *s.graph);
        lpl = lp.value().item();
        loss = ad::add(lc, ad::scale(lp, cfg.lambda_pl));
      }
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) {
        std::ostringstream msg;
        msg << "train: non-finite loss in stage '" << stage << "' epoch " << e << " sample '" << s.id
            << "' (count loss " << lc.value().item() << ", laplacian loss " << lpl << ", predicted count "
            << predicted_count(fp.density).value().item() << ", target " << s.count_gt << ")";
        throw Error(msg.str());
      }
      tape.backward(loss);
      ad::adam_step(model.params, params.grads(), adam);
      rec.loss += lv;
      rec.count_loss += lc.value().item();
      rec.laplacian_loss += lpl;
      if (steps) ++*steps;
    }
    const double n = static_cast<double>(data.size());
    rec.loss /= n;
    rec.count_loss /= n;
    rec.laplacian_loss /= n;
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

TrainResult train(const Model& init, const std::vector<LabeledSample>& synthetic,
                  const std::vector<LabeledSample>& real, const TrainOptions& options) {
  if (real.empty() && synthetic.empty()) throw InputError("train: no training data");
  TrainResult result{init, {}, 0};
  const auto& cfg = init.config;
  const auto prepare_all = [&](const std::vector<LabeledSample>& v) {
    std::vector<PreparedSample> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(prepare_sample(s, cfg, true));
    return out;
  };
  if (options.pretrain && !synthetic.empty() && cfg.pretrain_epochs > 0) {
    const auto h = train_stage(result.model, prepare_all(synthetic), cfg.pretrain_epochs, cfg.decay_in_pretrain,
                               "pretrain", cfg.seed + 1, options.on_epoch, &result.steps);
    result.history.insert(result.history.end(), h.begin(), h.end());
  }
  if (!real.empty() && cfg.finetune_epochs > 0) {
    const auto h = train_stage(result.model, prepare_all(real), cfg.finetune_epochs, true, "finetune", cfg.seed + 2,
                               options.on_epoch, &result.steps);
    result.history.insert(result.history.end(), h.begin(), h.end());
  }
  return result;
}

double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw InputError("mae: need equal, nonempty lists");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
  return s / static_cast<double>(pred.size());
}

double root_mean_squared_error(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw InputError("rmse: need equal, nonempty lists");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

EvalReport make_report(std::vector<std::string> ids, std::vector<double> pred, std::vector<double> gt) {
  EvalReport r;
  r.mae = mean_absolute_error(pred, gt);
  r.rmse = root_mean_squared_error(pred, gt);
  r.ids = std::move(ids);
  r.predicted = std::move(pred);
  r.ground_truth = std::move(gt);
  return r;
}

std::vector<std::pair<double, double>> obk_curve(const std::vector<LabeledSample>& data, const PipelineConfig& cfg) {
  std::vector<double> pred, gt;
  for (const auto& s : data) {
    if (!s.scores || !s.utterance_times_gt_s || s.utterance_times_gt_s->size() != 3) continue;
    const auto pos = run_localizer(*s.scores, cfg);
    for (std::size_t idx : pos.indices()) pred.push_back(window_index_to_time(idx, *s.scores));
    gt.insert(gt.end(), s.utterance_times_gt_s->begin(), s.utterance_times_gt_s->end());
  }
  std::vector<std::pair<double, double>> curve;
  if (pred.empty()) return curve;
  for (double K : kObkThresholds) curve.emplace_back(K, off_by_k(pred, gt, K));
  return curve;
}

EvalReport evaluate(const Model& model, const std::vector<LabeledSample>& data) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  std::vector<std::string> ids;
  std::vector<double> pred, gt;
  for (const auto& s : data) {
    ids.push_back(s.id());
    pred.push_back(count_actions(model, s).count);
    gt.push_back(s.count_gt);
  }
  auto r = make_report(std::move(ids), std::move(pred), std::move(gt));
  r.obk = obk_curve(data, model.config);
  return r;
}

std::string report_to_json_text(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["n"] = report.ids.size();
  doc["mae"] = report.mae;
  doc["rmse"] = report.rmse;
  for (const auto& [K, rate] : report.obk) doc["obk@" + format_double(K)] = rate;
  auto& rows = doc["samples"];
  rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.ids.size(); ++i) {
    rows.push_back({{"id", report.ids[i]}, {"predicted", report.predicted[i]}, {"count_gt", report.ground_truth[i]}});
  }
  return doc.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write report '" + path + "'");
  out << report_to_json_text(report);
}

void write_density_csv(const CountResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write density file '" + path + "'");
  out << "t_s,density\n";
  for (std::size_t i = 0; i < result.density.size(); ++i) {
    out << format_double(static_cast<double>(i) * result.density_step_s) << ',' << format_double(result.density[i])
        << '\n';
  }
}

}  // namespace repcount
