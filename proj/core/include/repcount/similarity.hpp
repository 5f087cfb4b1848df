#pragma once

#include <array>
#include <vector>

#include "repcount/autodiff/tape.hpp"
#include "repcount/config.hpp"
#include "repcount/embed.hpp"
#include "repcount/matrix.hpp"

namespace repcount {

/// Per-position similarity of the embedding sequence to each of the six exemplars.
struct SimilarityMap {
  Matrix values;  // [L, 6], nonnegative
  std::array<ExemplarSpan, 6> columns{};
};

/// ReLU(Norm(x (*) e)): zero-padded cross-correlation standardized over positions.
ad::Var correlation_channel(ad::Var x_emb, ad::Var exemplar, double eps);

/// ReLU(Norm(max(D) - D)) where D[i] is the Soft-DTW distance between the
/// centered window at i and the exemplar.
ad::Var softdtw_channel(ad::Var x_emb, ad::Var exemplar, double gamma, double eps);

/// Column e is correlation_channel * softdtw_channel for exemplar e. Output [L, 6].
ad::Var build_similarity_map(ad::Var x_emb, const ExemplarSet& exemplars, const PipelineConfig& cfg);

SimilarityMap build_similarity_map(const Matrix& x_emb, const ExemplarSet& exemplars, const PipelineConfig& cfg);

}  // namespace repcount
