#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace repcount {

enum class ExemplarUnits { kEmbeddingWindows, kRawSamples };
enum class GateMode { kProject, kPooled };
enum class LocalizerMode { kConstrained, kGreedy };

/// Every tunable of the pipeline. Defaults are the full-scale profile.
struct PipelineConfig {
  // Encoder and input.
  std::size_t channels = 6;
  std::size_t w = 10;
  std::size_t d_prime = 64;
  std::size_t pad_len = 28000;
  bool zscore = false;

  // Utterance localization, in audio windows.
  std::size_t R = 150;
  LocalizerMode localizer = LocalizerMode::kConstrained;

  // Exemplars and similarity.
  ExemplarUnits exemplar_units = ExemplarUnits::kEmbeddingWindows;
  double gamma = 1.0;
  double norm_eps = 1e-6;

  // Fusion and density head.
  std::size_t K = 2;
  GateMode gate_mode = GateMode::kProject;

  // Distance-preserving loss.
  std::size_t knn_k = 150;
  std::string sigma_mode = "median";
  double lambda_pl = 0.01;

  // Optimization.
  double lr = 1e-4;
  double lr_decay = 0.95;
  bool decay_in_pretrain = true;
  std::size_t pretrain_epochs = 30;
  std::size_t finetune_epochs = 30;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  // Data synthesis.
  std::size_t synth_multiple = 10;
  double template_min_s = 0.5;
  double template_max_s = 8.0;

  /// Throws ValidationError on a broken invariant (w must divide pad_len, gamma > 0, ...).
  void validate() const;

  /// True when both configs describe the same network layout and input geometry.
  bool same_architecture(const PipelineConfig& other) const;

  /// Reduced profile for desk-scale runs: pad_len 2800, d' 32.
  static PipelineConfig desk();

  bool operator==(const PipelineConfig&) const = default;
};

/// Flat key/value JSON document; unknown keys are an error.
PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text, const std::string& source = "<config>");
std::string config_to_json_text(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::string& path);

}  // namespace repcount
