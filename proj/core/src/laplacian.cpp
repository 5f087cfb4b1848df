#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "repcount/error.hpp"
#include "repcount/model.hpp"

namespace repcount {

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

Matrix KnnGraph::dense() const {
  Matrix W(nodes, nodes);
  for (const auto& e : edges) {
    W(e.i, e.j) = e.weight;
    W(e.j, e.i) = e.weight;
  }
  return W;
}

KnnGraph build_knn_graph(const Matrix& x, std::size_t knn_k) {
  const std::size_t n = x.rows();
  if (n < 2) throw InputError("laplacian: need at least 2 windows, got " + std::to_string(n));
  if (knn_k == 0) throw InputError("laplacian: knn_k must be at least 1");

  std::vector<double> sq(n * n, 0.0);
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double d = x(i, c) - x(j, c);
        s += d * d;
      }
      sq[i * n + j] = sq[j * n + i] = s;
      dists.push_back(std::sqrt(s));
    }
  }

  KnnGraph g;
  g.nodes = n;
  g.k = std::min(knn_k, n - 1);
  g.sigma = median(dists);
  if (!(g.sigma > 0.0)) {
    double sum = 0.0;
    std::size_t count = 0;
    for (double d : dists)
      if (d > 0.0) sum += d, ++count;
    g.sigma = count ? sum / static_cast<double>(count) : 1.0;
  }
  const double denom = 2.0 * g.sigma * g.sigma;

  std::vector<double> W(n * n, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::swap(order[i], order[n - 1]);
    const auto cmp = [&](std::size_t a, std::size_t b) {
      const double da = sq[i * n + a], db = sq[i * n + b];
      return da != db ? da < db : a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g.k),
                      order.begin() + static_cast<std::ptrdiff_t>(n - 1), cmp);
    for (std::size_t r = 0; r < g.k; ++r) {
      const std::size_t j = order[r];
      const double v = std::exp(-sq[i * n + j] / denom);
      W[i * n + j] = std::max(W[i * n + j], v);
      W[j * n + i] = std::max(W[j * n + i], v);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (W[i * n + j] > 0.0) g.edges.push_back({i, j, W[i * n + j]});
  return g;
}

double laplacian_loss(const Matrix& x, const KnnGraph& graph) {
  if (x.rows() != graph.nodes) throw ShapeError("laplacian_loss: embedding length does not match the graph");
  double total = 0.0;
  for (const auto& e : graph.edges) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = x(e.i, c) - x(e.j, c);
      s += d * d;
    }
    total += e.weight * s;
  }
  return total;
}

ad::Var laplacian_loss(ad::Var x_emb, const KnnGraph& graph) {
  if (x_emb.value().rank() != 2 || x_emb.dim(0) != graph.nodes) {
    throw ShapeError("laplacian_loss: embedding of shape " + ad::shape_string(x_emb.shape()) +
                     " does not match a graph over " + std::to_string(graph.nodes) + " windows");
  }
  const double v = laplacian_loss(x_emb.value().to_matrix(), graph);
  return x_emb.tape().record(ad::Tensor::scalar(v), {x_emb}, [x_emb, edges = graph.edges](ad::Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const auto& xv = t.value(x_emb.id());
    const std::size_t C = xv.dim(1);
    auto dx = t.grad_buffer(x_emb);
    for (const auto& e : edges) {
      for (std::size_t c = 0; c < C; ++c) {
        const double d = 2.0 * g * e.weight * (xv.at(e.i, c) - xv.at(e.j, c));
        dx[e.i * C + c] += d;
        dx[e.j * C + c] -= d;
      }
    }
  });
}

}  // namespace repcount
