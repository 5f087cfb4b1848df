#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "repcount/autodiff/params.hpp"
#include "repcount/config.hpp"
#include "repcount/types.hpp"

namespace repcount {

/// Exemplar half-widths, in embedding windows by default.
inline constexpr std::array<std::size_t, 3> kExemplarScales{10, 20, 40};

/// One exemplar: rows [begin, end) of the embedding sequence around an anchor.
struct ExemplarSpan {
  std::size_t anchor = 0;  // 0 for s1, 1 for s2
  std::size_t center = 0;
  std::size_t half_width = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool operator==(const ExemplarSpan&) const = default;
};

/// Six exemplars ordered (s1 x {10, 20, 40}, s2 x {10, 20, 40}).
struct ExemplarSet {
  std::array<ExemplarSpan, 6> spans{};
  /// Copies of the embedding rows; filled by extract_exemplars.
  std::vector<Matrix> slices;
};

/// Adds the patchify convolution and two residual temporal-conv layers.
void init_encoder_params(ad::ParamStore& params, const PipelineConfig& cfg, std::mt19937_64& rng);

/// x [N, d] -> [N / w, d']. N must be a multiple of w.
ad::Var encode(const ad::BoundParams& params, ad::Var x, const PipelineConfig& cfg);

/// Evaluation-only convenience around encode().
Matrix embed(const ad::ParamStore& params, const SensorSequence& x, const PipelineConfig& cfg);

/// Audio window -> embedding window: round(center_s * rate_hz / w), clamped to [0, emb_len).
std::size_t map_audio_to_embedding(std::size_t idx, const ScoreMatrix& scores, double rate_hz, std::size_t w,
                                   std::size_t emb_len);

/// Inverse of map_audio_to_embedding: e * w / rate_hz seconds.
double embedding_index_to_time(std::size_t e, double rate_hz, std::size_t w);

/// Spans only; requires s1 <= s2 < length.
ExemplarSet exemplar_spans(std::size_t length, std::size_t s1, std::size_t s2, const PipelineConfig& cfg);

ExemplarSet extract_exemplars(const Matrix& x_emb, std::size_t s1, std::size_t s2, const PipelineConfig& cfg);

/// Differentiable slices of `x_emb`, one per span.
std::vector<ad::Var> slice_exemplars(ad::Var x_emb, const ExemplarSet& set);

}  // namespace repcount
