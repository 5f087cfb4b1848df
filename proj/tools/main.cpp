#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "repcount/baselines.hpp"
#include "repcount/config.hpp"
#include "repcount/dataset.hpp"
#include "repcount/embed.hpp"
#include "repcount/error.hpp"
#include "repcount/localize.hpp"
#include "repcount/model.hpp"
#include "repcount/motif_data.hpp"
#include "repcount/pipeline.hpp"
#include "repcount/preprocess.hpp"
#include "repcount/similarity.hpp"
#include "repcount/synthesis.hpp"

using namespace repcount;

namespace {

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

const LabeledSample& pick_sample(const std::vector<LabeledSample>& data, const std::string& id,
                                 const std::string& path) {
  if (data.empty()) throw InputError(path + ": no records");
  if (id.empty()) return data.front();
  for (const auto& s : data)
    if (s.id() == id) return s;
  throw InputError(path + ": no sample with id '" + id + "'");
}

std::vector<double> read_gt_times(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  if (doc.is_object()) doc = doc.at("utterance_times_gt_s");
  auto t = doc.get<std::vector<double>>();
  if (t.size() != 3) throw ValidationError(path + ": expected 3 utterance times");
  return t;
}

void print_positions(const UtterancePositions& pos, const ScoreMatrix& scores) {
  const auto idx = pos.indices();
  std::cout << "positions " << pos.i << ' ' << pos.j << ' ' << pos.k << '\n';
  std::cout << "confidence " << pos.conf[0] << ' ' << pos.conf[1] << ' ' << pos.conf[2] << " product " << pos.product
            << '\n';
  std::cout << "times_s";
  for (auto i : idx) std::cout << ' ' << window_index_to_time(i, scores);
  std::cout << '\n';
  if (pos.zero_confidence) std::cerr << "warning: no feasible triple has positive confidence\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exemplar-based repetition counting for wearable sensor data"};
  app.require_subcommand(1);

  // localize
  auto* loc = app.add_subcommand("localize", "Locate the three counting utterances in a score matrix");
  std::string loc_scores, loc_gt;
  std::size_t loc_R = 150;
  bool loc_greedy = false;
  loc->add_option("--scores", loc_scores, "Score CSV")->required();
  loc->add_option("--R", loc_R, "Proximity bound in audio windows");
  loc->add_option("--gt", loc_gt, "JSON with the ground-truth utterance times");
  loc->add_flag("--greedy", loc_greedy, "Per-utterance argmax instead of the constrained optimum");

  // similarity
  auto* sim = app.add_subcommand("similarity", "Write the similarity map of one sample");
  std::string sim_sample, sim_out, sim_ckpt, sim_config, sim_id;
  sim->add_option("--sample", sim_sample, "Dataset file holding the sample")->required();
  sim->add_option("--id", sim_id, "Sample id (default: first record)");
  sim->add_option("--out", sim_out, "Output CSV")->required();
  sim->add_option("--ckpt", sim_ckpt, "Checkpoint providing the encoder");
  sim->add_option("--config", sim_config, "Config for a freshly initialized encoder");

  // mine-templates
  auto* mine = app.add_subcommand("mine-templates", "Harvest action templates from scored training data");
  std::string mine_data, mine_out, mine_config;
  mine->add_option("--data", mine_data, "Training dataset")->required();
  mine->add_option("--out", mine_out, "Template database")->required();
  mine->add_option("--config", mine_config, "Pipeline config");

  // synth
  auto* syn = app.add_subcommand("synth", "Synthesize labeled samples from a template database");
  std::string syn_db, syn_out, syn_config;
  std::size_t syn_n = 0;
  std::optional<std::size_t> syn_multiple;
  std::uint64_t syn_seed = 0;
  syn->add_option("--db", syn_db, "Template database")->required();
  syn->add_option("--n", syn_n, "Number of real training samples")->required();
  syn->add_option("--multiple", syn_multiple, "Synthetic samples per real sample");
  syn->add_option("--seed", syn_seed, "Random seed");
  syn->add_option("--out", syn_out, "Output dataset")->required();
  syn->add_option("--config", syn_config, "Pipeline config");

  // train
  auto* tr = app.add_subcommand("train", "Pretrain on synthetic data, then finetune on real data");
  std::string tr_data, tr_synth, tr_config, tr_out, tr_history;
  bool tr_no_pretrain = false;
  tr->add_option("--data", tr_data, "Real training dataset")->required();
  tr->add_option("--synth", tr_synth, "Synthetic dataset");
  tr->add_option("--config", tr_config, "Pipeline config");
  tr->add_option("--out", tr_out, "Checkpoint")->required();
  tr->add_option("--history", tr_history, "Per-epoch loss CSV");
  tr->add_flag("--no-pretrain", tr_no_pretrain, "Skip the synthetic stage");

  // count
  auto* cnt = app.add_subcommand("count", "Count repetitions in one sample");
  std::string cnt_ckpt, cnt_sample, cnt_id, cnt_density;
  cnt->add_option("--ckpt", cnt_ckpt, "Checkpoint")->required();
  cnt->add_option("--sample", cnt_sample, "Dataset file holding the sample")->required();
  cnt->add_option("--id", cnt_id, "Sample id (default: first record)");
  cnt->add_option("--density-out", cnt_density, "Density CSV");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_report;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset")->required();
  ev->add_option("--report", ev_report, "Report file");

  // baselines
  auto* bl = app.add_subcommand("baselines", "Mean and frequency baselines on a dataset");
  std::string bl_train, bl_data;
  bl->add_option("--train", bl_train, "Training dataset (for the mean)")->required();
  bl->add_option("--data", bl_data, "Evaluation dataset")->required();

  // make-demo-data
  auto* demo = app.add_subcommand("make-demo-data", "Generate motif recordings with simulated utterance scores");
  std::string demo_out;
  MotifDataOptions demo_opt;
  demo->add_option("--out", demo_out, "Output dataset")->required();
  demo->add_option("--n", demo_opt.samples, "Number of samples");
  demo->add_option("--rate", demo_opt.rate_hz, "Sample rate in Hz");
  demo->add_option("--max-duration", demo_opt.max_duration_s, "Longest recording in seconds");
  demo->add_option("--class-seed", demo_opt.class_seed, "Seed of the class waveforms");
  demo->add_option("--seed", demo_opt.sample_seed, "Seed of per-sample variation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*loc) {
      const auto scores = load_scores_csv(loc_scores);
      const auto pos = loc_greedy ? greedy_localize(scores) : localize_utterances(scores, loc_R);
      print_positions(pos, scores);
      if (!loc_gt.empty()) {
        const auto gt = read_gt_times(loc_gt);
        std::vector<double> pred;
        for (auto i : pos.indices()) pred.push_back(window_index_to_time(i, scores));
        for (double K : kObkThresholds) std::cout << "obk@" << K << ' ' << off_by_k(pred, gt, K) << '\n';
      }
    } else if (*sim) {
      const auto data = load_dataset(sim_sample);
      const auto& s = pick_sample(data, sim_id, sim_sample);
      const Model model = sim_ckpt.empty() ? Model::initialize(config_or_default(sim_config)) : Model::load(sim_ckpt);
      const auto prepared = prepare_sample(s, model.config, false);
      const Matrix x_emb = embed(model.params, SensorSequence{s.id(), s.sensor.rate_hz, prepared.x}, model.config);
      const auto set = extract_exemplars(x_emb, prepared.anchors.s1, prepared.anchors.s2, model.config);
      const auto map = build_similarity_map(x_emb, set, model.config);
      std::ofstream out(sim_out);
      if (!out) throw InputError("cannot write '" + sim_out + "'");
      out << "t_s";
      for (const auto& c : map.columns) out << ",s" << (c.anchor + 1) << "_h" << c.half_width;
      out << '\n';
      for (std::size_t i = 0; i < map.values.rows(); ++i) {
        out << format_double(embedding_index_to_time(i, s.sensor.rate_hz, model.config.w));
        for (std::size_t c = 0; c < map.values.cols(); ++c) out << ',' << format_double(map.values(i, c));
        out << '\n';
      }
    } else if (*mine) {
      const auto cfg = config_or_default(mine_config);
      MiningStats stats;
      const auto db = mine_templates(load_dataset(mine_data), cfg.R, cfg, &stats);
      save_template_db(db, mine_out);
      std::cout << "templates " << db.templates.size() << " from " << stats.samples << " samples ("
                << stats.rejected_confidence << " rejected by confidence, " << stats.rejected_length
                << " by length)\n";
      if (db.empty()) return 3;
    } else if (*syn) {
      auto cfg = config_or_default(syn_config);
      if (syn_multiple) cfg.synth_multiple = *syn_multiple;
      const auto db = load_template_db(syn_db);
      const auto data = synthesize_dataset(db, syn_n, cfg, syn_seed);
      write_dataset(data, syn_out);
      std::cout << "wrote " << data.size() << " samples to " << syn_out << '\n';
    } else if (*tr) {
      const auto cfg = config_or_default(tr_config);
      const auto real = load_dataset(tr_data);
      const auto synthetic = tr_synth.empty() ? std::vector<LabeledSample>{} : load_dataset(tr_synth);
      std::ofstream hist;
      if (!tr_history.empty()) {
        hist.open(tr_history);
        if (!hist) throw InputError("cannot write '" + tr_history + "'");
        hist << "stage,epoch,lr,loss,count_loss,laplacian_loss\n";
      }
      TrainOptions opt;
      opt.pretrain = !tr_no_pretrain;
      opt.on_epoch = [&](const EpochRecord& r) {
        std::cout << r.stage << " epoch " << r.epoch << " lr " << r.lr << " loss " << r.loss << '\n' << std::flush;
        if (hist.is_open()) {
          hist << r.stage << ',' << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.loss) << ','
               << format_double(r.count_loss) << ',' << format_double(r.laplacian_loss) << '\n';
        }
      };
      const auto result = train(Model::initialize(cfg), synthetic, real, opt);
      result.model.save(tr_out);
      std::cout << "steps " << result.steps << ", checkpoint " << tr_out << '\n';
    } else if (*cnt) {
      const Model model = Model::load(cnt_ckpt);
      const auto data = load_dataset(cnt_sample);
      const auto& s = pick_sample(data, cnt_id, cnt_sample);
      const auto r = count_actions(model, s);
      for (const auto& w : r.anchors.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "count " << std::setprecision(6) << r.count << '\n';
      if (!cnt_density.empty()) write_density_csv(r, cnt_density);
    } else if (*ev) {
      const auto report = evaluate(Model::load(ev_ckpt), load_dataset(ev_data));
      std::cout << "mae " << report.mae << "\nrmse " << report.rmse << '\n';
      for (const auto& [K, rate] : report.obk) std::cout << "obk@" << K << ' ' << rate << '\n';
      if (!ev_report.empty()) write_report(report, ev_report);
    } else if (*bl) {
      const MeanBaseline mean(load_dataset(bl_train));
      const auto data = load_dataset(bl_data);
      std::vector<double> gt, pm, pf;
      for (const auto& s : data) {
        gt.push_back(s.count_gt);
        pm.push_back(mean.predict(s.sensor));
        pf.push_back(frequency_baseline(s.sensor).count);
      }
      std::cout << "mean_baseline mae " << mean_absolute_error(pm, gt) << " rmse " << root_mean_squared_error(pm, gt)
                << '\n';
      std::cout << "frequency_baseline mae " << mean_absolute_error(pf, gt) << " rmse "
                << root_mean_squared_error(pf, gt) << '\n';
    } else if (*demo) {
      const auto data = make_motif_dataset(demo_opt);
      write_dataset(data, demo_out);
      std::cout << "wrote " << data.size() << " samples to " << demo_out << '\n';
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
