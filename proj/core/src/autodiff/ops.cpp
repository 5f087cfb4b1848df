#include "repcount/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "repcount/error.hpp"

namespace repcount::ad {

namespace {

[[noreturn]] void shape_fail(const std::string& op, const std::string& detail) {
  throw ShapeError(op + ": " + detail);
}

void require_rank2(const std::string& op, const Var& v) {
  if (v.value().rank() != 2) shape_fail(op, "expected a rank-2 [length, channels] tensor, got " + shape_string(v.shape()));
}

enum class Broadcast { kNone, kRight, kLeft };

// kRight: b is [L, 1] against a [L, C]; kLeft: the mirror case.
Broadcast classify(const std::string& op, const Var& a, const Var& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa == sb) return Broadcast::kNone;
  if (sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0]) {
    if (sb[1] == 1) return Broadcast::kRight;
    if (sa[1] == 1) return Broadcast::kLeft;
  }
  shape_fail(op, "incompatible shapes " + shape_string(sa) + " and " + shape_string(sb) +
                     " (only [L, C] with [L, 1] broadcasting is supported)");
}

template <typename F, typename G>
Var unary(Var x, F forward, G derivative) {
  Tensor out(x.shape());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return x.tape().record(std::move(out), {x}, [x, derivative](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& in = t.value(x.id());
    auto dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * derivative(in[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  const Broadcast mode = classify("add", a, b);
  if (mode == Broadcast::kLeft) return add(b, a);
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out = av;
  if (mode == Broadcast::kNone) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  } else {
    const std::size_t L = av.dim(0), C = av.dim(1);
    for (std::size_t r = 0; r < L; ++r)
      for (std::size_t c = 0; c < C; ++c) out.at(r, c) += bv[r];
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, mode](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    if (a.requires_grad()) {
      auto da = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    }
    if (b.requires_grad()) {
      auto db = t.grad_buffer(b);
      if (mode == Broadcast::kNone) {
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      } else {
        const std::size_t C = a.dim(1);
        for (std::size_t i = 0; i < g.size(); ++i) db[i / C] += g[i];
      }
    }
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  const Broadcast mode = classify("mul", a, b);
  if (mode == Broadcast::kLeft) return mul(b, a);
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out = av;
  const std::size_t C = mode == Broadcast::kNone ? 1 : av.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mode == Broadcast::kNone ? bv[i] : bv[i / C];
  return a.tape().record(std::move(out), {a, b}, [a, b, mode, C](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& av = t.value(a.id());
    const auto& bv = t.value(b.id());
    const bool bc = mode != Broadcast::kNone;
    if (a.requires_grad()) {
      auto da = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (bc ? bv[i / C] : bv[i]);
    }
    if (b.requires_grad()) {
      auto db = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) db[bc ? i / C : i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double v) { return v + c; }, [](double) { return 1.0; });
}

Var relu(Var x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double a = 0.044715;
  return unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(k * (v + a * v * v * v))); },
      [](double v) {
        const double u = k * (v + a * v * v * v);
        const double th = std::tanh(u);
        const double du = k * (1.0 + 3.0 * a * v * v);
        return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
      });
}

Var softplus(Var x) {
  return unary(
      x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& d : t.grad_buffer(x)) d += g;
  });
}

Var mean_over_channels(Var x) {
  require_rank2("mean_over_channels", x);
  const std::size_t L = x.dim(0), C = x.dim(1);
  Tensor out({L, 1});
  const auto& in = x.value();
  for (std::size_t r = 0; r < L; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += in.at(r, c);
    out[r] = s / static_cast<double>(C);
  }
  return x.tape().record(std::move(out), {x}, [x, L, C](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto dx = t.grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(C);
    for (std::size_t r = 0; r < L; ++r)
      for (std::size_t c = 0; c < C; ++c) dx[r * C + c] += g[r] * inv;
  });
}

Var max_minus(Var x) {
  const auto& in = x.value();
  if (in.size() == 0) shape_fail("max_minus", "empty input");
  std::size_t arg = 0;
  for (std::size_t i = 1; i < in.size(); ++i) {
    if (in[i] > in[arg]) arg = i;
  }
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[arg] - in[i];
  return x.tape().record(std::move(out), {x}, [x, arg](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto dx = t.grad_buffer(x);
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      dx[i] -= g[i];
      total += g[i];
    }
    dx[arg] += total;
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  if (axis > 1) shape_fail("concat", "axis must be 0 or 1");
  for (const auto& p : parts) require_rank2("concat", p);
  Tape& tape = parts[0].tape();
  const std::size_t other = 1 - axis;
  const std::size_t fixed = parts[0].dim(other);
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.dim(other) != fixed) {
      shape_fail("concat", "mismatched shapes " + shape_string(parts[0].shape()) + " and " + shape_string(p.shape()));
    }
    offsets.push_back(total);
    total += p.dim(axis);
  }
  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 0 ? fixed : total;
  Tensor out({rows, cols});
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].value();
    for (std::size_t r = 0; r < v.dim(0); ++r)
      for (std::size_t c = 0; c < v.dim(1); ++c) {
        if (axis == 0) out.at(offsets[p] + r, c) = v.at(r, c);
        else out.at(r, offsets[p] + c) = v.at(r, c);
      }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [inputs, offsets, axis, cols](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    for (std::size_t p = 0; p < inputs.size(); ++p) {
      if (!inputs[p].requires_grad()) continue;
      auto d = t.grad_buffer(inputs[p]);
      const std::size_t pr = inputs[p].dim(0), pc = inputs[p].dim(1);
      for (std::size_t r = 0; r < pr; ++r)
        for (std::size_t c = 0; c < pc; ++c) {
          const std::size_t src = axis == 0 ? (offsets[p] + r) * cols + c : r * cols + offsets[p] + c;
          d[r * pc + c] += g[src];
        }
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  require_rank2("slice_rows", x);
  if (begin >= end || end > x.dim(0)) {
    shape_fail("slice_rows", "range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                                 shape_string(x.shape()));
  }
  const std::size_t C = x.dim(1);
  const auto& in = x.value().storage();
  Tensor out({end - begin, C}, std::vector<double>(in.begin() + static_cast<std::ptrdiff_t>(begin * C),
                                                   in.begin() + static_cast<std::ptrdiff_t>(end * C)));
  return x.tape().record(std::move(out), {x}, [x, begin, C](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[begin * C + i] += g[i];
  });
}

Var conv1d(Var x, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t pad) {
  require_rank2("conv1d", x);
  const auto& ks = kernel.shape();
  if (ks.size() != 3) shape_fail("conv1d", "kernel must be [out, in, width], got " + shape_string(ks));
  const std::size_t L = x.dim(0), Cin = x.dim(1);
  const std::size_t Cout = ks[0], K = ks[2];
  if (ks[1] != Cin) {
    shape_fail("conv1d", "input " + shape_string(x.shape()) + " has " + std::to_string(Cin) +
                             " channels but kernel " + shape_string(ks) + " expects " + std::to_string(ks[1]));
  }
  if (bias && bias->shape() != Shape{Cout}) {
    shape_fail("conv1d", "bias " + shape_string(bias->shape()) + " does not match " + std::to_string(Cout) + " outputs");
  }
  if (stride == 0) shape_fail("conv1d", "stride must be positive");
  if (L + 2 * pad < K) {
    shape_fail("conv1d", "input length " + std::to_string(L) + " shorter than kernel width " + std::to_string(K));
  }
  const std::size_t Lo = (L + 2 * pad - K) / stride + 1;

  // Kernel re-laid out as [K][Cout][Cin] so the inner loop runs over contiguous channels.
  const auto& wv = kernel.value();
  std::vector<double> wt(K * Cout * Cin);
  for (std::size_t o = 0; o < Cout; ++o)
    for (std::size_t c = 0; c < Cin; ++c)
      for (std::size_t k = 0; k < K; ++k) wt[(k * Cout + o) * Cin + c] = wv[(o * Cin + c) * K + k];

  const auto& xv = x.value();
  Tensor out({Lo, Cout});
  for (std::size_t t = 0; t < Lo; ++t) {
    double* y = &out.at(t, 0);
    if (bias) {
      const auto& bv = bias->value();
      for (std::size_t o = 0; o < Cout; ++o) y[o] = bv[o];
    }
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
      if (r < 0 || r >= static_cast<std::ptrdiff_t>(L)) continue;
      const double* xr = &xv.at(static_cast<std::size_t>(r), 0);
      for (std::size_t o = 0; o < Cout; ++o) {
        const double* wr = &wt[(k * Cout + o) * Cin];
        double acc = 0.0;
        for (std::size_t c = 0; c < Cin; ++c) acc += wr[c] * xr[c];
        y[o] += acc;
      }
    }
  }

  std::vector<Var> inputs{x, kernel};
  if (bias) inputs.push_back(*bias);
  return x.tape().record(
      std::move(out), inputs,
      [x, kernel, bias, wt = std::move(wt), L, Cin, Cout, K, Lo, stride, pad](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& xv = t.value(x.id());
        const bool need_x = x.requires_grad();
        const bool need_w = kernel.requires_grad();
        std::vector<double> dwt(need_w ? K * Cout * Cin : 0, 0.0);
        std::span<double> dx;
        if (need_x) dx = t.grad_buffer(x);
        for (std::size_t tt = 0; tt < Lo; ++tt) {
          const double* gy = &g[tt * Cout];
          for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(tt * stride + k) - static_cast<std::ptrdiff_t>(pad);
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(L)) continue;
            const std::size_t ru = static_cast<std::size_t>(r);
            const double* xr = &xv.at(ru, 0);
            for (std::size_t o = 0; o < Cout; ++o) {
              const double go = gy[o];
              if (go == 0.0) continue;
              if (need_x) {
                const double* wr = &wt[(k * Cout + o) * Cin];
                double* dxr = &dx[ru * Cin];
                for (std::size_t c = 0; c < Cin; ++c) dxr[c] += go * wr[c];
              }
              if (need_w) {
                double* dwr = &dwt[(k * Cout + o) * Cin];
                for (std::size_t c = 0; c < Cin; ++c) dwr[c] += go * xr[c];
              }
            }
          }
        }
        if (need_w) {
          auto dw = t.grad_buffer(kernel);
          for (std::size_t o = 0; o < Cout; ++o)
            for (std::size_t c = 0; c < Cin; ++c)
              for (std::size_t k = 0; k < K; ++k) dw[(o * Cin + c) * K + k] += dwt[(k * Cout + o) * Cin + c];
        }
        if (bias && bias->requires_grad()) {
          auto db = t.grad_buffer(*bias);
          for (std::size_t tt = 0; tt < Lo; ++tt)
            for (std::size_t o = 0; o < Cout; ++o) db[o] += g[tt * Cout + o];
        }
      });
}

Var correlate1d(Var x, Var e) {
  require_rank2("correlate1d", x);
  require_rank2("correlate1d", e);
  const std::size_t L = x.dim(0), C = x.dim(1), k = e.dim(0);
  if (e.dim(1) != C) {
    shape_fail("correlate1d", "sequence " + shape_string(x.shape()) + " and exemplar " + shape_string(e.shape()) +
                                  " differ in channels");
  }
  if (k == 0) shape_fail("correlate1d", "empty exemplar");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const auto& xv = x.value();
  const auto& ev = e.value();
  Tensor out({L, 1});
  for (std::size_t t = 0; t < L; ++t) {
    double acc = 0.0;
    for (std::size_t o = 0; o < k; ++o) {
      const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(t + o) - half;
      if (r < 0 || r >= static_cast<std::ptrdiff_t>(L)) continue;
      const double* xr = &xv.at(static_cast<std::size_t>(r), 0);
      const double* er = &ev.at(o, 0);
      for (std::size_t c = 0; c < C; ++c) acc += xr[c] * er[c];
    }
    out[t] = acc;
  }
  return x.tape().record(std::move(out), {x, e}, [x, e, L, C, k, half](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& xv = t.value(x.id());
    const auto& ev = t.value(e.id());
    std::span<double> dx, de;
    if (x.requires_grad()) dx = t.grad_buffer(x);
    if (e.requires_grad()) de = t.grad_buffer(e);
    for (std::size_t tt = 0; tt < L; ++tt) {
      const double gt = g[tt];
      if (gt == 0.0) continue;
      for (std::size_t o = 0; o < k; ++o) {
        const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(tt + o) - half;
        if (r < 0 || r >= static_cast<std::ptrdiff_t>(L)) continue;
        const std::size_t ru = static_cast<std::size_t>(r);
        if (!dx.empty())
          for (std::size_t c = 0; c < C; ++c) dx[ru * C + c] += gt * ev.at(o, c);
        if (!de.empty())
          for (std::size_t c = 0; c < C; ++c) de[o * C + c] += gt * xv.at(ru, c);
      }
    }
  });
}

Var layer_norm(Var x, std::size_t axis, double eps, std::optional<Var> gain, std::optional<Var> shift) {
  require_rank2("layer_norm", x);
  if (axis > 1) shape_fail("layer_norm", "axis must be 0 or 1");
  const std::size_t R = x.dim(0), C = x.dim(1);
  for (const auto& p : {gain, shift}) {
    if (p && p->shape() != Shape{C}) {
      shape_fail("layer_norm", "affine term " + shape_string(p->shape()) + " must have " + std::to_string(C) + " entries");
    }
  }
  // A group is a row (axis 1) or a column (axis 0); members are its entries.
  const std::size_t groups = axis == 1 ? R : C;
  const std::size_t n = axis == 1 ? C : R;
  auto index = [=](std::size_t gi, std::size_t m) { return axis == 1 ? gi * C + m : m * C + gi; };

  const auto& in = x.value();
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double mean = 0.0;
    for (std::size_t m = 0; m < n; ++m) mean += in[index(gi, m)];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const double d = in[index(gi, m)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[gi] = 1.0 / std::sqrt(var + eps);
    for (std::size_t m = 0; m < n; ++m) xhat[index(gi, m)] = (in[index(gi, m)] - mean) * inv_std[gi];
  }
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t col = i % C;
    out[i] = xhat[i] * (gain ? gain->value()[col] : 1.0) + (shift ? shift->value()[col] : 0.0);
  }

  std::vector<Var> inputs{x};
  if (gain) inputs.push_back(*gain);
  if (shift) inputs.push_back(*shift);
  return x.tape().record(
      std::move(out), inputs,
      [x, gain, shift, xhat = std::move(xhat), inv_std = std::move(inv_std), groups, n, C, index](Tape& t,
                                                                                                  std::size_t self) {
        const auto g = t.grad(self);
        if (gain && gain->requires_grad()) {
          auto dg = t.grad_buffer(*gain);
          for (std::size_t i = 0; i < g.size(); ++i) dg[i % C] += g[i] * xhat[i];
        }
        if (shift && shift->requires_grad()) {
          auto ds = t.grad_buffer(*shift);
          for (std::size_t i = 0; i < g.size(); ++i) ds[i % C] += g[i];
        }
        if (!x.requires_grad()) return;
        auto dx = t.grad_buffer(x);
        for (std::size_t gi = 0; gi < groups; ++gi) {
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t m = 0; m < n; ++m) {
            const std::size_t i = index(gi, m);
            const double gh = g[i] * (gain ? gain->value()[i % C] : 1.0);
            mean_g += gh;
            mean_gx += gh * xhat[i];
          }
          mean_g /= static_cast<double>(n);
          mean_gx /= static_cast<double>(n);
          for (std::size_t m = 0; m < n; ++m) {
            const std::size_t i = index(gi, m);
            const double gh = g[i] * (gain ? gain->value()[i % C] : 1.0);
            dx[i] += inv_std[gi] * (gh - mean_g - xhat[i] * mean_gx);
          }
        }
      });
}

Var max_pool1d(Var x, std::size_t k, std::size_t stride) {
  require_rank2("max_pool1d", x);
  if (k == 0 || stride == 0) shape_fail("max_pool1d", "window and stride must be positive");
  const std::size_t L = x.dim(0), C = x.dim(1);
  if (L == 0) shape_fail("max_pool1d", "empty input");
  const std::size_t Lo = L <= k ? 1 : (L - k + stride - 1) / stride + 1;
  const auto& in = x.value();
  Tensor out({Lo, C});
  std::vector<std::size_t> arg(Lo * C);
  for (std::size_t t = 0; t < Lo; ++t) {
    const std::size_t begin = t * stride;
    const std::size_t end = std::min(begin + k, L);
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t best = begin;
      for (std::size_t r = begin + 1; r < end; ++r) {
        if (in.at(r, c) > in.at(best, c)) best = r;
      }
      arg[t * C + c] = best * C + c;
      out.at(t, c) = in.at(best, c);
    }
  }
  return x.tape().record(std::move(out), {x}, [x, arg = std::move(arg)](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[arg[i]] += g[i];
  });
}

Var upsample_nearest(Var x, std::size_t factor, std::size_t out_len) {
  require_rank2("upsample_nearest", x);
  if (factor == 0) shape_fail("upsample_nearest", "factor must be positive");
  const std::size_t L = x.dim(0), C = x.dim(1);
  const auto& in = x.value();
  Tensor out({out_len, C});
  for (std::size_t t = 0; t < out_len; ++t) {
    const std::size_t src = t / factor;
    if (src >= L) continue;
    for (std::size_t c = 0; c < C; ++c) out.at(t, c) = in.at(src, c);
  }
  return x.tape().record(std::move(out), {x}, [x, factor, out_len, L, C](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto dx = t.grad_buffer(x);
    for (std::size_t tt = 0; tt < out_len; ++tt) {
      const std::size_t src = tt / factor;
      if (src >= L) continue;
      for (std::size_t c = 0; c < C; ++c) dx[src * C + c] += g[tt * C + c];
    }
  });
}

}  // namespace repcount::ad
