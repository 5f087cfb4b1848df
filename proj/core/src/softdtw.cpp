#include "repcount/softdtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "repcount/error.hpp"

namespace repcount {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this exponent the term cannot change 1 + term in double precision, and
// libm's underflow path is far slower than the common case.
inline double soft_exp(double z) { return z < -40.0 ? 0.0 : std::exp(z); }

void check_gamma(double gamma) {
  if (!(gamma > 0.0)) throw InputError("softdtw: gamma must be positive, got " + std::to_string(gamma));
}

// Forward recursion over an (m+1) x (n+1) accumulator. `w` (3 per cell) may be null.
// Cells are visited by anti-diagonal so neighbouring cells carry no dependency
// and their exp/log latencies overlap.
double forward(const double* cost, std::size_t m, std::size_t n, double gamma, std::vector<double>& acc, double* w) {
  const std::size_t stride = n + 1;
  acc.assign((m + 1) * stride, kInf);
  acc[0] = 0.0;
  const double inv_gamma = 1.0 / gamma;
  for (std::size_t diag = 2; diag <= m + n; ++diag) {
    const std::size_t a_lo = diag > n ? diag - n : 1;
    const std::size_t a_hi = std::min(m, diag - 1);
    for (std::size_t a = a_lo; a <= a_hi; ++a) {
      const std::size_t b = diag - a;
      const double r_diag = acc[(a - 1) * stride + b - 1];
      const double r_up = acc[(a - 1) * stride + b];
      const double r_left = acc[a * stride + b - 1];
      double e_diag = 1.0, e_up = 1.0, e_left = 1.0, lo;
      if (r_diag <= r_up && r_diag <= r_left) {
        lo = r_diag;
        e_up = soft_exp((lo - r_up) * inv_gamma);
        e_left = soft_exp((lo - r_left) * inv_gamma);
      } else if (r_up <= r_left) {
        lo = r_up;
        e_diag = soft_exp((lo - r_diag) * inv_gamma);
        e_left = soft_exp((lo - r_left) * inv_gamma);
      } else {
        lo = r_left;
        e_diag = soft_exp((lo - r_diag) * inv_gamma);
        e_up = soft_exp((lo - r_up) * inv_gamma);
      }
      const double s = e_diag + e_up + e_left;
      acc[a * stride + b] = cost[(a - 1) * n + b - 1] + lo - gamma * std::log(s);
      if (w) {
        double* wc = w + 3 * ((a - 1) * n + (b - 1));
        const double inv_s = 1.0 / s;
        wc[0] = e_diag * inv_s;
        wc[1] = e_up * inv_s;
        wc[2] = e_left * inv_s;
      }
    }
  }
  return acc[m * stride + n];
}

// E[a][b] = sum over successors of E[succ] * weight(succ -> (a, b)).
void backward(const double* w, std::size_t m, std::size_t n, double* grad) {
  for (std::size_t a = m; a-- > 0;) {
    for (std::size_t b = n; b-- > 0;) {
      double e = (a == m - 1 && b == n - 1) ? 1.0 : 0.0;
      if (a + 1 < m && b + 1 < n) e += grad[(a + 1) * n + b + 1] * w[3 * ((a + 1) * n + b + 1) + 0];
      if (a + 1 < m) e += grad[(a + 1) * n + b] * w[3 * ((a + 1) * n + b) + 1];
      if (b + 1 < n) e += grad[a * n + b + 1] * w[3 * (a * n + b + 1) + 2];
      grad[a * n + b] = e;
    }
  }
}

void check_pair(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw InputError("softdtw: sequences must be nonempty");
  if (a.cols() != b.cols()) throw ShapeError("softdtw: sequences differ in channel count");
}

}  // namespace

double softdtw_from_cost(std::span<const double> cost, std::size_t m, std::size_t n, double gamma,
                         std::vector<double>* weights) {
  check_gamma(gamma);
  if (m == 0 || n == 0 || cost.size() != m * n) throw ShapeError("softdtw_from_cost: bad cost matrix shape");
  std::vector<double> acc;
  double* w = nullptr;
  if (weights) {
    weights->resize(3 * m * n);
    w = weights->data();
  }
  return forward(cost.data(), m, n, gamma, acc, w);
}

void softdtw_cost_gradient(std::span<const double> weights, std::size_t m, std::size_t n, std::span<double> grad) {
  if (weights.size() != 3 * m * n || grad.size() != m * n) throw ShapeError("softdtw_cost_gradient: bad sizes");
  backward(weights.data(), m, n, grad.data());
}

std::vector<double> pairwise_sq_dist(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("pairwise_sq_dist: channel mismatch");
  std::vector<double> d(a.rows() * b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) {
        const double diff = a(i, c) - b(j, c);
        s += diff * diff;
      }
      d[i * b.rows() + j] = s;
    }
  return d;
}

double softdtw(const Matrix& a, const Matrix& b, double gamma) {
  check_pair(a, b);
  return softdtw_from_cost(pairwise_sq_dist(a, b), a.rows(), b.rows(), gamma);
}

double hard_dtw(const Matrix& a, const Matrix& b) {
  check_pair(a, b);
  const std::size_t m = a.rows(), n = b.rows();
  const auto cost = pairwise_sq_dist(a, b);
  std::vector<double> acc((m + 1) * (n + 1), kInf);
  acc[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j) {
      acc[i * (n + 1) + j] = cost[(i - 1) * n + j - 1] + std::min({acc[(i - 1) * (n + 1) + j - 1],
                                                                  acc[(i - 1) * (n + 1) + j], acc[i * (n + 1) + j - 1]});
    }
  return acc[m * (n + 1) + n];
}

namespace {

// Shared backward for ops built on a squared-distance matrix between x rows and e rows:
// given dV/dD (G, [Lx, k]) accumulate into x and e.
void distance_backward(ad::Tape& t, ad::Var x, ad::Var e, const std::vector<double>& G) {
  const auto& xv = t.value(x.id());
  const auto& ev = t.value(e.id());
  const std::size_t Lx = xv.dim(0), k = ev.dim(0), C = xv.dim(1);
  std::span<double> dx, de;
  if (x.requires_grad()) dx = t.grad_buffer(x);
  if (e.requires_grad()) de = t.grad_buffer(e);
  for (std::size_t i = 0; i < Lx; ++i) {
    const double* xi = &xv.at(i, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const double g = G[i * k + j];
      if (g == 0.0) continue;
      const double* ej = &ev.at(j, 0);
      for (std::size_t c = 0; c < C; ++c) {
        const double diff = 2.0 * g * (xi[c] - ej[c]);
        if (!dx.empty()) dx[i * C + c] += diff;
        if (!de.empty()) de[j * C + c] -= diff;
      }
    }
  }
}

void check_vars(const char* op, const ad::Var& a, const ad::Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + ad::shape_string(a.shape()) + " and " +
                     ad::shape_string(b.shape()));
  }
  if (a.dim(0) == 0 || b.dim(0) == 0) throw InputError(std::string(op) + ": empty sequence");
}

}  // namespace

ad::Var softdtw(ad::Var a, ad::Var b, double gamma) {
  check_gamma(gamma);
  check_vars("softdtw", a, b);
  const std::size_t m = a.dim(0), n = b.dim(0);
  const auto cost = pairwise_sq_dist(a.value().to_matrix(), b.value().to_matrix());
  std::vector<double> weights;
  const bool need = a.requires_grad() || b.requires_grad();
  const double v = softdtw_from_cost(cost, m, n, gamma, need ? &weights : nullptr);
  return a.tape().record(ad::Tensor::scalar(v), {a, b},
                         [a, b, m, n, weights = std::move(weights)](ad::Tape& t, std::size_t self) {
                           const double g = t.grad(self)[0];
                           std::vector<double> G(m * n);
                           softdtw_cost_gradient(weights, m, n, G);
                           for (auto& x : G) x *= g;
                           distance_backward(t, a, b, G);
                         });
}

std::size_t centered_window_start(std::size_t i, std::size_t k, std::size_t L) {
  const std::size_t half = k / 2;
  const std::size_t start = i >= half ? i - half : 0;
  return std::min(start, L - k);
}

ad::Var softdtw_sliding(ad::Var x, ad::Var e, double gamma) {
  check_gamma(gamma);
  check_vars("softdtw_sliding", x, e);
  const std::size_t L = x.dim(0), k = e.dim(0), C = x.dim(1);
  if (k > L) {
    throw InputError("softdtw_sliding: exemplar of " + std::to_string(k) + " rows longer than sequence of " +
                     std::to_string(L));
  }
  // Cost of every sequence row against every exemplar row; windows index into it.
  const auto& xv = x.value();
  const auto& ev = e.value();
  std::vector<double> dist(L * k);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double diff = xv.at(i, c) - ev.at(j, c);
        s += diff * diff;
      }
      dist[i * k + j] = s;
    }

  const bool need = x.requires_grad() || e.requires_grad();
  ad::Tensor out({L, 1});
  std::vector<double> acc, weights(3 * k * k);
  // Per-window dV/dD, filled only when a gradient is needed.
  std::vector<double> jac(need ? L * k * k : 0);
  // Windows clamped at either end repeat; each distinct start is solved once.
  std::size_t prev_start = L;
  for (std::size_t i = 0; i < L; ++i) {
    const std::size_t start = centered_window_start(i, k, L);
    if (start == prev_start) {
      out[i] = out[i - 1];
      if (need) std::copy_n(&jac[(i - 1) * k * k], k * k, &jac[i * k * k]);
      continue;
    }
    prev_start = start;
    out[i] = forward(&dist[start * k], k, k, gamma, acc, need ? weights.data() : nullptr);
    if (need) backward(weights.data(), k, k, &jac[i * k * k]);
  }

  return x.tape().record(std::move(out), {x, e}, [x, e, L, k, jac = std::move(jac)](ad::Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    std::vector<double> G(L * k, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
      if (g[i] == 0.0) continue;
      const std::size_t start = centered_window_start(i, k, L);
      const double* J = &jac[i * k * k];
      double* Gw = &G[start * k];
      for (std::size_t r = 0; r < k * k; ++r) Gw[r] += g[i] * J[r];
    }
    distance_backward(t, x, e, G);
  });
}

}  // namespace repcount
