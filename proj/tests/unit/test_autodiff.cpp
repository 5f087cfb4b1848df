#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/gradcheck.hpp"
#include "repcount/autodiff/adam.hpp"
#include "repcount/autodiff/ops.hpp"
#include "repcount/autodiff/params.hpp"
#include "repcount/error.hpp"

using namespace repcount;
using namespace repcount::testing;
using ad::Tensor;
using ad::Var;

namespace {

constexpr int kShapes = 20;

struct PrimitiveCase {
  const char* name;
  // Builds shapes for trial t and the scalar loss from input vars.
  std::function<std::vector<ad::Shape>(std::mt19937_64&)> shapes;
  Builder build;
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<PrimitiveCase> primitive_cases() {
  const auto seq = [](std::mt19937_64& r) { return std::vector<ad::Shape>{{pick(r, 2, 9), pick(r, 1, 5)}}; };
  const auto pair = [](std::mt19937_64& r) {
    ad::Shape s{pick(r, 2, 9), pick(r, 1, 5)};
    return std::vector<ad::Shape>{s, s};
  };
  const auto bcast = [](std::mt19937_64& r) {
    const std::size_t L = pick(r, 2, 9);
    return std::vector<ad::Shape>{{L, pick(r, 2, 5)}, {L, 1}};
  };
  const auto unary = [](Var (*fn)(Var)) {
    return [fn](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(fn(v[0])); };
  };
  return {
      {"add", pair, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::add(v[0], v[1])); }},
      {"add_broadcast", bcast, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::add(v[1], v[0])); }},
      {"sub", pair, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::sub(v[0], v[1])); }},
      {"mul", pair, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::mul(v[0], v[1])); }},
      {"mul_broadcast", bcast, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::mul(v[0], v[1])); }},
      {"scale", seq, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::scale(v[0], -1.7)); }},
      {"add_scalar", seq, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::add_scalar(v[0], 0.3)); }},
      {"relu", seq, unary(&ad::relu)},
      {"gelu", seq, unary(&ad::gelu)},
      {"softplus", seq, unary(&ad::softplus)},
      {"square", seq, unary(&ad::square)},
      {"sum_all", seq, [](ad::Tape&, const std::vector<Var>& v) { return ad::square(ad::sum_all(v[0])); }},
      {"mean_over_channels", seq, unary(&ad::mean_over_channels)},
      {"max_minus", seq, unary(&ad::max_minus)},
      {"concat_rows",
       [](std::mt19937_64& r) {
         const std::size_t C = pick(r, 1, 4);
         return std::vector<ad::Shape>{{pick(r, 1, 5), C}, {pick(r, 1, 5), C}};
       },
       [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::concat(v, 0)); }},
      {"concat_cols",
       [](std::mt19937_64& r) {
         const std::size_t L = pick(r, 1, 6);
         return std::vector<ad::Shape>{{L, pick(r, 1, 4)}, {L, pick(r, 1, 4)}};
       },
       [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::concat(v, 1)); }},
      {"slice_rows", seq,
       [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::slice_rows(v[0], 1, v[0].dim(0))); }},
      {"conv1d",
       [](std::mt19937_64& r) {
         const std::size_t cin = pick(r, 1, 4), cout = pick(r, 1, 4), K = pick(r, 1, 4);
         return std::vector<ad::Shape>{{pick(r, K + 2, 12), cin}, {cout, cin, K}, {cout}};
       },
       [](ad::Tape&, const std::vector<Var>& v) {
         const std::size_t K = v[1].dim(2);
         const std::size_t stride = 1 + v[0].dim(0) % 3;
         return weighted_sum(ad::conv1d(v[0], v[1], v[2], stride, K / 2));
       }},
      {"correlate1d",
       [](std::mt19937_64& r) {
         const std::size_t L = pick(r, 3, 12), C = pick(r, 1, 4);
         return std::vector<ad::Shape>{{L, C}, {pick(r, 1, L), C}};
       },
       [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::correlate1d(v[0], v[1])); }},
      {"layer_norm_axis0", seq,
       [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::layer_norm(v[0], 0, 1e-6)); }},
      {"layer_norm_axis1_affine",
       [](std::mt19937_64& r) {
         const std::size_t C = pick(r, 2, 5);
         return std::vector<ad::Shape>{{pick(r, 1, 6), C}, {C}, {C}};
       },
       [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::layer_norm(v[0], 1, 1e-6, v[1], v[2])); }},
      {"max_pool1d", seq, [](ad::Tape&, const std::vector<Var>& v) { return weighted_sum(ad::max_pool1d(v[0], 2, 2)); }},
      {"upsample_nearest", seq,
       [](ad::Tape&, const std::vector<Var>& v) {
         return weighted_sum(ad::upsample_nearest(v[0], 2, 2 * v[0].dim(0) - 1));
       }},
  };
}

}  // namespace

TEST(Primitives, FiniteDifferenceOnRandomShapes) {
  for (const auto& c : primitive_cases()) {
    std::mt19937_64 rng(std::hash<std::string>{}(c.name));
    for (int trial = 0; trial < kShapes; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : c.shapes(rng)) inputs.push_back(random_tensor(s, rng));
      const auto r = grad_check(c.build, inputs);
      EXPECT_TRUE(r.ok()) << c.name << " trial " << trial << ": " << r.worst;
    }
  }
}

TEST(Primitives, ReluValuesAndMask) {
  ad::Tape t;
  const Var x = t.leaf(Tensor({3}, {-1.0, 0.0, 2.0}), true);
  const Var y = ad::relu(x);
  EXPECT_EQ(y.value().storage(), (std::vector<double>{0, 0, 2}));
  t.backward(ad::sum_all(y));
  const auto g = t.grad(x);
  EXPECT_EQ(std::vector<double>(g.begin(), g.end()), (std::vector<double>{0, 0, 1}));
}

TEST(Primitives, IdentityConvKernel) {
  std::mt19937_64 rng(1);
  ad::Tape t;
  const auto xv = random_tensor({7, 3}, rng);
  Tensor k({3, 3, 1});
  for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  const Var y = ad::conv1d(t.constant(xv), t.constant(k), std::nullopt, 1, 0);
  EXPECT_EQ(y.value(), xv);
}

TEST(Primitives, LayerNormMoments) {
  std::mt19937_64 rng(2);
  ad::Tape t;
  const auto y = ad::layer_norm(t.constant(random_tensor({50, 4}, rng, -3, 7)), 0, 0.0);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0, v = 0;
    for (std::size_t r = 0; r < 50; ++r) m += y.value().at(r, c);
    m /= 50;
    for (std::size_t r = 0; r < 50; ++r) v += (y.value().at(r, c) - m) * (y.value().at(r, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v / 50, 1.0, 1e-9);
  }
}

TEST(Primitives, ShapeErrorsNamePrimitive) {
  ad::Tape t;
  const Var a = t.constant(Tensor({3, 2})), b = t.constant(Tensor({4, 2})), c = t.constant(Tensor({3, 3}));
  try {
    ad::add(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
  }
  EXPECT_THROW(ad::mul(a, c), ShapeError);
  EXPECT_THROW(ad::conv1d(a, t.constant(Tensor({2, 3, 1})), std::nullopt, 1, 0), ShapeError);
}

TEST(Backward, LinearGivesOnes) {
  ad::Tape t;
  const Var x = t.leaf(Tensor({2, 3}, {1, -2, 3, 4, 5, -6}), true);
  t.backward(ad::sum_all(x));
  for (double g : t.grad(x)) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareAnalytic) {
  ad::Tape t;
  const Var x = t.leaf(Tensor({2}, {1.0, 2.0}), true);
  t.backward(ad::sum_all(ad::square(x)));
  EXPECT_EQ(t.grad(x)[0], 2.0);
  EXPECT_EQ(t.grad(x)[1], 4.0);
}

TEST(Backward, NonScalarLossRejected) {
  ad::Tape t;
  const Var x = t.leaf(Tensor({2}, {1.0, 2.0}), true);
  EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Backward, ThreeLayerComposite) {
  std::mt19937_64 rng(9);
  const Builder f = [](ad::Tape&, const std::vector<Var>& v) {
    Var h = ad::gelu(ad::conv1d(v[0], v[1], v[2], 1, 1));
    h = ad::layer_norm(ad::conv1d(h, v[3], std::nullopt, 2, 1), 1, 1e-6);
    return weighted_sum(ad::softplus(ad::conv1d(h, v[4], std::nullopt, 1, 0)));
  };
  const std::vector<Tensor> in{random_tensor({10, 3}, rng), random_tensor({4, 3, 3}, rng), random_tensor({4}, rng),
                               random_tensor({5, 4, 3}, rng), random_tensor({2, 5, 1}, rng)};
  const auto r = grad_check(f, in);
  EXPECT_TRUE(r.ok()) << r.worst;
}

TEST(Backward, Deterministic) {
  std::mt19937_64 rng(10);
  ad::Tape t;
  const Var x = t.leaf(random_tensor({6, 3}, rng), true);
  const Var k = t.leaf(random_tensor({2, 3, 3}, rng), true);
  const Var loss = weighted_sum(ad::gelu(ad::conv1d(x, k, std::nullopt, 1, 1)));
  t.backward(loss);
  const auto g1 = std::vector<double>(t.grad(k).begin(), t.grad(k).end());
  t.backward(loss);
  const auto g2 = std::vector<double>(t.grad(k).begin(), t.grad(k).end());
  EXPECT_EQ(g1, g2);
}

TEST(Adam, ZeroGradientLeavesParams) {
  ad::ParamStore p;
  p.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
  const auto before = p;
  ad::AdamState s;
  ad::adam_step(p, {{"w", {0.0, 0.0, 0.0}}}, s);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLr) {
  ad::ParamStore p;
  p.add("x", Tensor({1}, {3.0}));
  ad::AdamState s;
  s.lr = 0.1;
  ad::adam_step(p, {{"x", {1.0}}}, s);
  EXPECT_NEAR(p.at("x")[0], 2.9, 1e-6);
}

TEST(Adam, QuadraticTrajectoryMatchesReference) {
  ad::ParamStore p;
  p.add("x", Tensor({1}, {1.0}));
  ad::AdamState s;
  s.lr = 0.05;
  double x = 1.0, m = 0.0, v = 0.0, prev = 1.0;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * p.at("x")[0];
    ad::adam_step(p, {{"x", {g}}}, s);
    const double gr = 2.0 * x;
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.at("x")[0], x, 1e-12);
    EXPECT_LT(std::abs(p.at("x")[0]), std::abs(prev));
    prev = p.at("x")[0];
  }
}

TEST(Adam, ShapeMismatch) {
  ad::ParamStore p;
  p.add("x", Tensor({2}));
  ad::AdamState s;
  EXPECT_THROW(ad::adam_step(p, {{"x", {1.0}}}, s), ShapeError);
}
