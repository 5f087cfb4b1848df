#include "repcount/similarity.hpp"

#include <string>

#include "repcount/autodiff/ops.hpp"
#include "repcount/error.hpp"
#include "repcount/softdtw.hpp"

namespace repcount {

namespace {

void check_exemplar(const char* op, const ad::Var& x, const ad::Var& e) {
  if (e.dim(0) == 0) throw InputError(std::string(op) + ": empty exemplar");
  if (e.dim(0) > x.dim(0)) {
    throw InputError(std::string(op) + ": exemplar of " + std::to_string(e.dim(0)) +
                     " rows is longer than the sequence of " + std::to_string(x.dim(0)));
  }
}

}  // namespace

ad::Var correlation_channel(ad::Var x_emb, ad::Var exemplar, double eps) {
  check_exemplar("correlation_channel", x_emb, exemplar);
  return ad::relu(ad::layer_norm(ad::correlate1d(x_emb, exemplar), 0, eps));
}

ad::Var softdtw_channel(ad::Var x_emb, ad::Var exemplar, double gamma, double eps) {
  check_exemplar("softdtw_channel", x_emb, exemplar);
  return ad::relu(ad::layer_norm(ad::max_minus(softdtw_sliding(x_emb, exemplar, gamma)), 0, eps));
}

ad::Var build_similarity_map(ad::Var x_emb, const ExemplarSet& exemplars, const PipelineConfig& cfg) {
  const auto slices = slice_exemplars(x_emb, exemplars);
  std::vector<ad::Var> columns;
  columns.reserve(slices.size());
  for (const auto& e : slices) {
    columns.push_back(
        ad::mul(correlation_channel(x_emb, e, cfg.norm_eps), softdtw_channel(x_emb, e, cfg.gamma, cfg.norm_eps)));
  }
  return ad::concat(columns, 1);
}

SimilarityMap build_similarity_map(const Matrix& x_emb, const ExemplarSet& exemplars, const PipelineConfig& cfg) {
  ad::Tape tape;
  const auto x = tape.constant(ad::Tensor::from_matrix(x_emb));
  SimilarityMap out;
  out.values = build_similarity_map(x, exemplars, cfg).value().to_matrix();
  out.columns = exemplars.spans;
  return out;
}

}  // namespace repcount
