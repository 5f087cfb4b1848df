#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "repcount/autodiff/tape.hpp"
#include "repcount/matrix.hpp"

namespace repcount {

// Soft-DTW over a squared-Euclidean cost, with soft-min
//   softmin_g(a, b, c) = -g * log(exp(-a/g) + exp(-b/g) + exp(-c/g)).

/// Runs the forward recursion on an m x n row-major cost matrix and returns
/// the value. When `weights` is non-null it receives, for each cell, the
/// soft-min weights over its three predecessors (diagonal, up, left).
double softdtw_from_cost(std::span<const double> cost, std::size_t m, std::size_t n, double gamma,
                         std::vector<double>* weights = nullptr);

/// Gradient of the value w.r.t. each cost entry, from the forward weights.
void softdtw_cost_gradient(std::span<const double> weights, std::size_t m, std::size_t n, std::span<double> grad);

/// Squared Euclidean distances between rows of a [m, C] and b [n, C].
std::vector<double> pairwise_sq_dist(const Matrix& a, const Matrix& b);

double softdtw(const Matrix& a, const Matrix& b, double gamma);
double hard_dtw(const Matrix& a, const Matrix& b);

/// Differentiable scalar Soft-DTW between a [m, C] and b [n, C].
ad::Var softdtw(ad::Var a, ad::Var b, double gamma);

/// First row of the length-k window centered at i, shifted to lie inside [0, L).
std::size_t centered_window_start(std::size_t i, std::size_t k, std::size_t L);

/// Per-position Soft-DTW between the centered length-k window of x [L, C]
/// and e [k, C]. Output [L, 1].
ad::Var softdtw_sliding(ad::Var x, ad::Var e, double gamma);

}  // namespace repcount
