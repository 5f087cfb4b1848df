#include "repcount/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "repcount/error.hpp"

namespace repcount {

namespace {

using nlohmann::ordered_json;

const char* to_string(ExemplarUnits u) {
  return u == ExemplarUnits::kEmbeddingWindows ? "windows" : "samples";
}
const char* to_string(GateMode g) { return g == GateMode::kProject ? "project" : "pooled"; }
const char* to_string(LocalizerMode m) {
  return m == LocalizerMode::kConstrained ? "constrained" : "greedy";
}

template <typename T>
T get_number(const ordered_json& v, const std::string& key, const std::string& source) {
  if (!v.is_number()) throw ValidationError(source + ": key '" + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ValidationError(source + ": key '" + key + "' must be an integer");
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
      throw ValidationError(source + ": key '" + key + "' must be nonnegative");
    }
  }
  return v.get<T>();
}

bool get_bool(const ordered_json& v, const std::string& key, const std::string& source) {
  if (!v.is_boolean()) throw ValidationError(source + ": key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const ordered_json& v, const std::string& key, const std::string& source) {
  if (!v.is_string()) throw ValidationError(source + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

void PipelineConfig::validate() const {
  if (w == 0) throw ValidationError("config: w must be positive");
  if (pad_len == 0 || pad_len % w != 0) throw ValidationError("config: w must divide pad_len");
  if (channels == 0) throw ValidationError("config: channels must be positive");
  if (d_prime == 0) throw ValidationError("config: d_prime must be positive");
  if (!(gamma > 0.0)) throw ValidationError("config: gamma must be positive");
  if (!(lambda_pl >= 0.0)) throw ValidationError("config: lambda_pl must be nonnegative");
  if (K == 0) throw ValidationError("config: K must be at least 1");
  if (knn_k == 0) throw ValidationError("config: knn_k must be at least 1");
  if (R < 3) throw ValidationError("config: R must be at least 3");
  if (sigma_mode != "median") throw ValidationError("config: unsupported sigma_mode '" + sigma_mode + "'");
  if (!(lr > 0.0)) throw ValidationError("config: lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("config: lr_decay must be in (0, 1]");
  if (!(norm_eps > 0.0)) throw ValidationError("config: norm_eps must be positive");
  if (!(template_min_s > 0.0 && template_max_s > template_min_s)) {
    throw ValidationError("config: template length bounds must satisfy 0 < min < max");
  }
  if (synth_multiple == 0) throw ValidationError("config: synth_multiple must be positive");
}

bool PipelineConfig::same_architecture(const PipelineConfig& o) const {
  return channels == o.channels && w == o.w && d_prime == o.d_prime && pad_len == o.pad_len && K == o.K &&
         gate_mode == o.gate_mode && exemplar_units == o.exemplar_units && zscore == o.zscore;
}

PipelineConfig PipelineConfig::desk() {
  PipelineConfig cfg;
  cfg.pad_len = 2800;
  cfg.d_prime = 32;
  cfg.knn_k = 15;
  return cfg;
}

PipelineConfig config_from_json_text(const std::string& text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 1, e.what());
  }
  if (!doc.is_object()) throw ValidationError(source + ": config must be a flat object");

  PipelineConfig cfg;
  const std::map<std::string, std::function<void(const ordered_json&, const std::string&)>> setters = {
      {"channels", [&](auto& v, auto& k) { cfg.channels = get_number<std::size_t>(v, k, source); }},
      {"w", [&](auto& v, auto& k) { cfg.w = get_number<std::size_t>(v, k, source); }},
      {"d_prime", [&](auto& v, auto& k) { cfg.d_prime = get_number<std::size_t>(v, k, source); }},
      {"pad_len", [&](auto& v, auto& k) { cfg.pad_len = get_number<std::size_t>(v, k, source); }},
      {"zscore", [&](auto& v, auto& k) { cfg.zscore = get_bool(v, k, source); }},
      {"R", [&](auto& v, auto& k) { cfg.R = get_number<std::size_t>(v, k, source); }},
      {"localizer",
       [&](auto& v, auto& k) {
         const auto s = get_string(v, k, source);
         if (s == "constrained") cfg.localizer = LocalizerMode::kConstrained;
         else if (s == "greedy") cfg.localizer = LocalizerMode::kGreedy;
         else throw ValidationError(source + ": localizer must be 'constrained' or 'greedy'");
       }},
      {"exemplar_units",
       [&](auto& v, auto& k) {
         const auto s = get_string(v, k, source);
         if (s == "windows") cfg.exemplar_units = ExemplarUnits::kEmbeddingWindows;
         else if (s == "samples") cfg.exemplar_units = ExemplarUnits::kRawSamples;
         else throw ValidationError(source + ": exemplar_units must be 'windows' or 'samples'");
       }},
      {"gamma", [&](auto& v, auto& k) { cfg.gamma = get_number<double>(v, k, source); }},
      {"norm_eps", [&](auto& v, auto& k) { cfg.norm_eps = get_number<double>(v, k, source); }},
      {"K", [&](auto& v, auto& k) { cfg.K = get_number<std::size_t>(v, k, source); }},
      {"gate_mode",
       [&](auto& v, auto& k) {
         const auto s = get_string(v, k, source);
         if (s == "project") cfg.gate_mode = GateMode::kProject;
         else if (s == "pooled") cfg.gate_mode = GateMode::kPooled;
         else throw ValidationError(source + ": gate_mode must be 'project' or 'pooled'");
       }},
      {"knn_k", [&](auto& v, auto& k) { cfg.knn_k = get_number<std::size_t>(v, k, source); }},
      {"sigma_mode", [&](auto& v, auto& k) { cfg.sigma_mode = get_string(v, k, source); }},
      {"lambda_pl", [&](auto& v, auto& k) { cfg.lambda_pl = get_number<double>(v, k, source); }},
      {"lr", [&](auto& v, auto& k) { cfg.lr = get_number<double>(v, k, source); }},
      {"lr_decay", [&](auto& v, auto& k) { cfg.lr_decay = get_number<double>(v, k, source); }},
      {"decay_in_pretrain", [&](auto& v, auto& k) { cfg.decay_in_pretrain = get_bool(v, k, source); }},
      {"pretrain_epochs", [&](auto& v, auto& k) { cfg.pretrain_epochs = get_number<std::size_t>(v, k, source); }},
      {"finetune_epochs", [&](auto& v, auto& k) { cfg.finetune_epochs = get_number<std::size_t>(v, k, source); }},
      {"adam_beta1", [&](auto& v, auto& k) { cfg.adam_beta1 = get_number<double>(v, k, source); }},
      {"adam_beta2", [&](auto& v, auto& k) { cfg.adam_beta2 = get_number<double>(v, k, source); }},
      {"adam_eps", [&](auto& v, auto& k) { cfg.adam_eps = get_number<double>(v, k, source); }},
      {"seed", [&](auto& v, auto& k) { cfg.seed = get_number<std::uint64_t>(v, k, source); }},
      {"synth_multiple", [&](auto& v, auto& k) { cfg.synth_multiple = get_number<std::size_t>(v, k, source); }},
      {"template_min_s", [&](auto& v, auto& k) { cfg.template_min_s = get_number<double>(v, k, source); }},
      {"template_max_s", [&](auto& v, auto& k) { cfg.template_max_s = get_number<double>(v, k, source); }},
  };

  for (const auto& [key, value] : doc.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ValidationError(source + ": unknown config key '" + key + "'");
    if (value.is_object() || value.is_array()) {
      throw ValidationError(source + ": key '" + key + "' must be a scalar (config is flat)");
    }
    it->second(value, key);
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json_text(const PipelineConfig& cfg) {
  ordered_json doc;
  doc["channels"] = cfg.channels;
  doc["w"] = cfg.w;
  doc["d_prime"] = cfg.d_prime;
  doc["pad_len"] = cfg.pad_len;
  doc["zscore"] = cfg.zscore;
  doc["R"] = cfg.R;
  doc["localizer"] = to_string(cfg.localizer);
  doc["exemplar_units"] = to_string(cfg.exemplar_units);
  doc["gamma"] = cfg.gamma;
  doc["norm_eps"] = cfg.norm_eps;
  doc["K"] = cfg.K;
  doc["gate_mode"] = to_string(cfg.gate_mode);
  doc["knn_k"] = cfg.knn_k;
  doc["sigma_mode"] = cfg.sigma_mode;
  doc["lambda_pl"] = cfg.lambda_pl;
  doc["lr"] = cfg.lr;
  doc["lr_decay"] = cfg.lr_decay;
  doc["decay_in_pretrain"] = cfg.decay_in_pretrain;
  doc["pretrain_epochs"] = cfg.pretrain_epochs;
  doc["finetune_epochs"] = cfg.finetune_epochs;
  doc["adam_beta1"] = cfg.adam_beta1;
  doc["adam_beta2"] = cfg.adam_beta2;
  doc["adam_eps"] = cfg.adam_eps;
  doc["seed"] = cfg.seed;
  doc["synth_multiple"] = cfg.synth_multiple;
  doc["template_min_s"] = cfg.template_min_s;
  doc["template_max_s"] = cfg.template_max_s;
  return doc.dump(2);
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str(), path);
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write config file '" + path + "'");
  out << config_to_json_text(cfg) << '\n';
}

}  // namespace repcount
