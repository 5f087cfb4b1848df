#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "repcount/autodiff/tape.hpp"

// Differentiable primitives. Sequences are rank-2 [length, channels];
// scalars have shape [1]. Conv kernels are [out, in, width].
namespace repcount::ad {

/// Same-shape addition, or [L, C] + [L, 1] broadcast over channels (either order).
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Same-shape product, or [L, C] * [L, 1] broadcast over channels (either order).
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);

Var relu(Var x);
/// tanh approximation.
Var gelu(Var x);
Var softplus(Var x);
Var square(Var x);

Var sum_all(Var x);
/// [L, C] -> [L, 1].
Var mean_over_channels(Var x);
/// y = max(x) - x elementwise; the gradient of the max goes to its first argmax.
Var max_minus(Var x);

/// Concatenates rank-2 tensors along axis 0 (rows) or 1 (columns).
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice_rows(Var x, std::size_t begin, std::size_t end);

/// 1-D convolution (cross-correlation convention) with symmetric zero padding.
/// x [L, Cin], kernel [Cout, Cin, K], bias [Cout] -> [(L + 2 pad - K) / stride + 1, Cout].
Var conv1d(Var x, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t pad);

/// Length-preserving cross-correlation of x [L, C] with e [k, C]:
/// y[t] = sum_{o, c} x[t + o - k/2, c] * e[o, c], zero outside [0, L). Output [L, 1].
Var correlate1d(Var x, Var e);

/// Standardizes along `axis` (0: over rows per column, 1: over columns per row),
/// then applies an optional per-column gain and shift ([C] each).
Var layer_norm(Var x, std::size_t axis, double eps, std::optional<Var> gain = std::nullopt,
               std::optional<Var> shift = std::nullopt);

/// Max over windows of `k` rows with step `stride`; a trailing partial window is kept.
Var max_pool1d(Var x, std::size_t k, std::size_t stride);
/// Repeats each row `factor` times, then truncates or zero-extends to `out_len` rows.
Var upsample_nearest(Var x, std::size_t factor, std::size_t out_len);

}  // namespace repcount::ad
