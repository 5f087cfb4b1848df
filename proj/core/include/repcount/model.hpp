#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "repcount/autodiff/params.hpp"
#include "repcount/autodiff/tape.hpp"
#include "repcount/config.hpp"
#include "repcount/matrix.hpp"

namespace repcount {

/// Number of pyramid levels in the density head; the coarsest has stride 4.
inline constexpr std::size_t kPyramidLevels = 3;
inline constexpr std::size_t kPyramidStride = 4;

/// Adds fusion, pyramid and head parameters (the encoder is added separately).
void init_head_params(ad::ParamStore& params, const PipelineConfig& cfg, std::mt19937_64& rng);

/// Encoder plus head parameters, deterministic in cfg.seed.
ad::ParamStore init_model_params(const PipelineConfig& cfg);

/// Runs the K fusion blocks. x_emb [L, d'], s_map [L, 6] -> F [L, d'].
ad::Var fuse(const ad::BoundParams& params, ad::Var x_emb, ad::Var s_map, const PipelineConfig& cfg);

/// Feature pyramids over F and Conv(x_emb), concatenated at the coarsest level and
/// mapped by the head to a nonnegative density of length ceil(L / 4), shape [L4, 1].
ad::Var density_head(const ad::BoundParams& params, ad::Var fused, ad::Var x_emb, const PipelineConfig& cfg);

std::size_t density_length(std::size_t emb_len);

ad::Var predicted_count(ad::Var density);
double predicted_count(const std::vector<double>& density);

/// (sum(density) - c_gt)^2.
ad::Var counting_loss(ad::Var density, double c_gt);

/// Symmetrized k-NN affinity graph over raw windows; each undirected edge is stored once with i < j.
struct KnnGraph {
  struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;
  };
  std::size_t nodes = 0;
  std::size_t k = 0;
  double sigma = 1.0;
  std::vector<Edge> edges;

  /// Dense symmetric W.
  Matrix dense() const;
};

/// Builds W_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)) over the min(knn_k, n - 1) nearest
/// neighbours of each window, symmetrized by max(W, W^T). sigma is the median pairwise distance.
KnnGraph build_knn_graph(const Matrix& raw_windows, std::size_t knn_k);

/// trace(X'^T L X') = 1/2 sum_ij W_ij |x'_i - x'_j|^2, with W held constant.
ad::Var laplacian_loss(ad::Var x_emb, const KnnGraph& graph);
double laplacian_loss(const Matrix& x_emb, const KnnGraph& graph);

/// counting_loss + lambda * laplacian_loss.
ad::Var total_loss(ad::Var density, double c_gt, ad::Var x_emb, const KnnGraph& graph, double lambda);

/// Everything one forward pass produces, on the caller's tape.
struct ForwardPass {
  ad::Var x_emb;
  ad::Var s_map;
  ad::Var fused;
  ad::Var density;
};

/// Padded raw input [pad_len, d] and anchors in embedding windows -> full forward graph.
ForwardPass forward(const ad::BoundParams& params, ad::Var x, std::size_t s1, std::size_t s2,
                    const PipelineConfig& cfg);

/// Trained parameters together with the configuration they were built for.
struct Model {
  PipelineConfig config;
  ad::ParamStore params;

  static Model initialize(const PipelineConfig& cfg);

  /// Text checkpoint: a format tag, the config, and every named array.
  void save(const std::string& path) const;
  static Model load(const std::string& path);
  /// Loads and rejects a checkpoint whose architecture differs from `expected`.
  static Model load(const std::string& path, const PipelineConfig& expected);

  bool operator==(const Model&) const = default;
};

}  // namespace repcount
