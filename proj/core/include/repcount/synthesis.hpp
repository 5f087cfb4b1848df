#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "repcount/config.hpp"
#include "repcount/matrix.hpp"
#include "repcount/types.hpp"

namespace repcount {

/// Minimum utterance score for a template boundary.
inline constexpr double kTemplateConfidence = 0.75;

/// One raw action segment cut between two utterance positions.
struct ActionTemplate {
  Matrix values;
  std::string source_id;
  double confidence = 0.0;  // lower of the two bounding scores
  std::string label;

  bool operator==(const ActionTemplate&) const = default;
};

struct TemplateDb {
  std::vector<ActionTemplate> templates;
  double rate_hz = 100.0;
  std::size_t channels = 0;
  /// Smallest and largest ground-truth count of the mined samples.
  int count_lower = 0;
  int count_upper = 0;

  bool empty() const { return templates.empty(); }
  /// Distinct labels, sorted.
  std::vector<std::string> classes() const;

  bool operator==(const TemplateDb&) const = default;
};

struct MiningStats {
  std::size_t samples = 0;
  std::size_t candidates = 0;
  std::size_t rejected_confidence = 0;
  std::size_t rejected_length = 0;
};

/// Localizes the three utterances of every sample, keeps all three positions and
/// emits the two segments between them, filtered by score and duration.
TemplateDb mine_templates(const std::vector<LabeledSample>& samples, std::size_t R, const PipelineConfig& cfg,
                          MiningStats* stats = nullptr);

void save_template_db(const TemplateDb& db, const std::string& path);
TemplateDb load_template_db(const std::string& path);

/// Duration factor u, shift v (rows), amplitude a and noise std s.
struct AugmentParams {
  double duration = 1.0;
  int shift = 0;
  double amplitude = 1.0;
  double noise_std = 0.0;
};

AugmentParams draw_augment_params(std::mt19937_64& rng);

/// Linear-interpolation resampling to round(L * factor) rows (at least 1).
Matrix resample_linear(const Matrix& x, double factor);

/// Resample, shift with zero fill, scale, then add Gaussian noise.
Matrix augment_template(const Matrix& values, const AugmentParams& p, std::mt19937_64& rng);

struct SynthOptions {
  bool augment = true;
  bool distractors = true;
  std::optional<int> count;
};

/// What went into one synthetic sample.
struct SynthTrace {
  std::string label;
  int count = 0;
  std::size_t copies = 0;
  /// Row ranges [begin, end) of the action copies.
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  /// "template:<label>x<n>" or "noise:<seconds>" per inserted distractor.
  std::vector<std::string> distractors;
};

/// Inclusive count range [max(1, round(0.8 C_l)), round(1.2 C_u)].
std::pair<int, int> synth_count_range(int c_lower, int c_upper);

LabeledSample synthesize_sample(const TemplateDb& db, int c_lower, int c_upper, const PipelineConfig& cfg,
                                std::mt19937_64& rng, const SynthOptions& options = {}, SynthTrace* trace = nullptr);

/// cfg.synth_multiple * n_real samples; sample i uses its own stream seeded from (seed, i).
std::vector<LabeledSample> synthesize_dataset(const TemplateDb& db, std::size_t n_real, const PipelineConfig& cfg,
                                              std::uint64_t seed, std::vector<SynthTrace>* traces = nullptr);

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

}  // namespace repcount
