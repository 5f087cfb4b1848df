#include "repcount/embed.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "repcount/autodiff/ops.hpp"
#include "repcount/error.hpp"
#include "repcount/localize.hpp"

namespace repcount {

void init_encoder_params(ad::ParamStore& params, const PipelineConfig& cfg, std::mt19937_64& rng) {
  const std::size_t d = cfg.channels, D = cfg.d_prime, w = cfg.w;
  params.add("enc.patch.w", ad::xavier_uniform({D, d, w}, d * w, D, rng));
  params.add("enc.patch.b", ad::Tensor({D}));
  for (int l = 1; l <= 2; ++l) {
    const std::string p = "enc.res" + std::to_string(l);
    params.add(p + ".w", ad::xavier_uniform({D, D, 3}, 3 * D, 3 * D, rng));
    params.add(p + ".b", ad::Tensor({D}));
  }
}

ad::Var encode(const ad::BoundParams& params, ad::Var x, const PipelineConfig& cfg) {
  if (x.value().rank() != 2 || x.dim(0) % cfg.w != 0) {
    throw ShapeError("embed: input of shape " + ad::shape_string(x.shape()) + " is not a multiple of w=" +
                     std::to_string(cfg.w) + " rows; pad the sequence first");
  }
  ad::Var h = ad::conv1d(x, params["enc.patch.w"], params["enc.patch.b"], cfg.w, 0);
  for (int l = 1; l <= 2; ++l) {
    const std::string p = "enc.res" + std::to_string(l);
    h = ad::add(h, ad::conv1d(ad::gelu(h), params[p + ".w"], params[p + ".b"], 1, 1));
  }
  return h;
}

Matrix embed(const ad::ParamStore& params, const SensorSequence& x, const PipelineConfig& cfg) {
  if (x.length() % cfg.w != 0) {
    throw ShapeError("embed: length " + std::to_string(x.length()) + " is not a multiple of w=" +
                     std::to_string(cfg.w) + "; pad the sequence first");
  }
  ad::Tape tape;
  ad::BoundParams bound(tape, params, false);
  return encode(bound, tape.constant(ad::Tensor::from_matrix(x.values)), cfg).value().to_matrix();
}

std::size_t map_audio_to_embedding(std::size_t idx, const ScoreMatrix& scores, double rate_hz, std::size_t w,
                                   std::size_t emb_len) {
  if (emb_len == 0) throw InputError("map_audio_to_embedding: empty embedding sequence");
  const double center = window_index_to_time(idx, scores);
  const double e = std::round(center * rate_hz / static_cast<double>(w));
  if (e <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(e), emb_len - 1);
}

double embedding_index_to_time(std::size_t e, double rate_hz, std::size_t w) {
  return static_cast<double>(e * w) / rate_hz;
}

ExemplarSet exemplar_spans(std::size_t length, std::size_t s1, std::size_t s2, const PipelineConfig& cfg) {
  if (s1 >= length || s2 >= length) {
    throw InputError("extract_exemplars: anchors (" + std::to_string(s1) + ", " + std::to_string(s2) +
                     ") out of range for " + std::to_string(length) + " windows");
  }
  if (s1 > s2) throw InputError("extract_exemplars: anchors must be in temporal order");
  ExemplarSet set;
  std::size_t slot = 0;
  for (std::size_t a = 0; a < 2; ++a) {
    const std::size_t s = a == 0 ? s1 : s2;
    for (std::size_t scale : kExemplarScales) {
      std::size_t h = scale;
      if (cfg.exemplar_units == ExemplarUnits::kRawSamples) {
        h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(scale) / cfg.w)));
      }
      ExemplarSpan span{a, s, h, s >= h ? s - h : 0, std::min(length, s + h)};
      set.spans[slot++] = span;
    }
  }
  return set;
}

ExemplarSet extract_exemplars(const Matrix& x_emb, std::size_t s1, std::size_t s2, const PipelineConfig& cfg) {
  ExemplarSet set = exemplar_spans(x_emb.rows(), s1, s2, cfg);
  for (const auto& span : set.spans) set.slices.push_back(x_emb.slice_rows(span.begin, span.end));
  return set;
}

std::vector<ad::Var> slice_exemplars(ad::Var x_emb, const ExemplarSet& set) {
  std::vector<ad::Var> out;
  for (const auto& span : set.spans) out.push_back(ad::slice_rows(x_emb, span.begin, span.end));
  return out;
}

}  // namespace repcount
