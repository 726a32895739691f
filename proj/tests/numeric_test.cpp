#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ltm/numeric/graph.hpp"
#include "ltm/numeric/optimizer.hpp"
#include "ltm/numeric/plain_ops.hpp"
#include "ltm/numeric/sparse_linear.hpp"
#include "ltm/seqae.hpp"
#include "support/finite_difference.hpp"

namespace ltm::numeric {
namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

TEST(GraphForward, IdentityMatVec) {
  Graph g;
  Vec eye(9, 0.0);
  eye[0] = eye[4] = eye[8] = 1.0;
  auto w = g.constant(eye);
  auto v = g.constant({1.5, -2.0, 3.25});
  auto y = g.matvec(w, v, 3, 3);
  g.forward();
  EXPECT_EQ(g.value(y), (Vec{1.5, -2.0, 3.25}));
}

TEST(GraphForward, SigmoidOfZeroIsHalf) {
  Graph g;
  auto y = g.sigmoid(g.constant({0.0}));
  g.forward();
  EXPECT_EQ(g.scalar(y), 0.5);
}

TEST(GraphForward, MinimumReportsValueAndArgmin) {
  Graph g;
  std::vector<NodeId> losses = {g.constant({0.7}), g.constant({0.2}), g.constant({0.9})};
  auto m = g.minimum(losses);
  g.forward();
  EXPECT_EQ(g.scalar(m), 0.2);
  EXPECT_EQ(g.argmin(m), 1u);
}

TEST(GraphForward, MinimumTieTakesLowestIndex) {
  Graph g;
  std::vector<NodeId> losses = {g.constant({0.5}), g.constant({0.1}), g.constant({0.1})};
  auto m = g.minimum(losses);
  g.forward();
  EXPECT_EQ(g.argmin(m), 1u);
}

TEST(GraphForward, ShapeMismatchFailsAtConstruction) {
  Graph g;
  auto a = g.constant({1.0, 2.0});
  auto b = g.constant({1.0, 2.0, 3.0});
  EXPECT_THROW(g.add(a, b), GraphError);
  EXPECT_THROW(g.matvec(g.constant(Vec(6, 1.0)), a, 3, 3), GraphError);
  EXPECT_THROW(g.slice(a, 1, 2), GraphError);
}

TEST(GraphBackward, SquareDerivative) {
  Graph g;
  auto x = g.parameter({3.0});
  auto loss = g.sum(g.mul(x, x));
  g.forward();
  g.backward(loss);
  EXPECT_EQ(g.gradient(x), (Vec{6.0}));
}

TEST(GraphBackward, UnreachableLeafHasExactZeroGradient) {
  Graph g;
  auto x = g.parameter({3.0, 1.0});
  auto unused = g.parameter({7.0, 8.0});
  auto side = g.sum(g.mul(unused, unused));
  (void)side;
  auto loss = g.sum(g.tanh(x));
  g.forward();
  g.backward(loss);
  EXPECT_EQ(g.gradient(unused), (Vec{0.0, 0.0}));
}

TEST(GraphBackward, BeforeForwardIsAnError) {
  Graph g;
  auto x = g.parameter({1.0});
  auto loss = g.sum(x);
  EXPECT_THROW(g.backward(loss), GraphError);
}

TEST(GraphBackward, NonScalarLossIsAnError) {
  Graph g;
  auto x = g.parameter({1.0, 2.0});
  g.forward();
  EXPECT_THROW(g.backward(x), GraphError);
}

// Builds sum(w) of every primitive applied to one parameter vector and checks
// the composed gradient against central differences.
TEST(GraphBackward, PrimitivesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  const Vec x0 = random_vec(rng, 6);
  const Vec target = {0.0, 1.0, 1.0, 0.0, 1.0, 0.0};
  const Vec weights = random_vec(rng, 12);
  auto mask = std::make_shared<const SparseMask>(SparseMask::sample(4, 6, 0.5, 3));
  const Vec sparse_w = random_vec(rng, mask->size());

  auto build = [&](auto& ops, const auto& x) {
    auto m = ops.matvec(ops.constant(weights), x, 2, 6);
    auto s = ops.sigmoid(ops.slice(x, 1, 2));
    auto t = ops.tanh(ops.slice(x, 3, 2));
    auto prod = ops.mul(s, t);
    auto diff = ops.sub(ops.add(m, prod), ops.scale(s, 0.3));
    auto ce = ops.sigmoid_cross_entropy(x, ops.constant(target));
    auto se = ops.squared_error(ops.concat({diff, t}), ops.constant({0.5, -0.5, 0.1, 0.2}));
    auto sp = ops.sum(ops.sparse_apply(mask, ops.constant(sparse_w), x));
    std::vector<typename std::decay_t<decltype(ops)>::Value> branches = {ops.add(ce, se), ops.scale(sp, 0.0)};
    auto lowest = ops.minimum(branches);
    return ops.sum(ops.concat({lowest, ce, se, sp}));
  };

  Graph g;
  auto x = g.parameter(x0);
  auto loss = build(g, x);
  g.forward();
  g.backward(loss);
  const Vec analytic = g.gradient(x);

  auto f = [&](const Vec& v) {
    PlainOps ops;
    return build(ops, v)[0];
  };
  const Vec fd = ltm::testing::central_differences(f, x0);
  EXPECT_LT(ltm::testing::max_relative_error(analytic, fd), 1e-6);
  EXPECT_EQ(g.scalar(loss), f(x0));
}

TEST(GraphBackward, LstmCellAllParametersMatchFiniteDifferences) {
  const std::size_t hidden = 5;
  const std::size_t input = 3;
  std::mt19937_64 rng(11);
  const Vec x = random_vec(rng, input);
  const Vec h = random_vec(rng, hidden, 0.5);
  const Vec c = random_vec(rng, hidden, 0.5);
  const std::size_t nw = 4 * hidden * (input + hidden);
  const Vec theta0 = random_vec(rng, nw + 4 * hidden, 0.5);

  auto build = [&](auto& ops, const auto& theta) {
    auto w = ops.slice(theta, 0, nw);
    auto b = ops.slice(theta, nw, 4 * hidden);
    auto [h1, c1] = seqae::lstm_cell(ops, ops.constant(x), ops.constant(h), ops.constant(c), w, b, input, hidden);
    auto [h2, c2] = seqae::lstm_cell(ops, ops.constant(x), h1, c1, w, b, input, hidden);
    return ops.sum(ops.concat({ops.mul(h2, h2), c2}));
  };

  Graph g;
  auto theta = g.parameter(theta0);
  auto loss = build(g, theta);
  g.forward();
  g.backward(loss);
  const Vec analytic = g.gradient(theta);
  auto f = [&](const Vec& v) {
    PlainOps ops;
    return build(ops, v)[0];
  };
  const Vec fd = ltm::testing::central_differences(f, theta0, 1e-5);
  EXPECT_LT(ltm::testing::max_relative_error(analytic, fd), 1e-4);
}

TEST(GraphBackward, MinimumIsolatesNonArgminBranches) {
  Graph g;
  std::vector<NodeId> params;
  std::vector<NodeId> losses;
  for (int k = 0; k < 4; ++k) {
    auto p = g.parameter({1.0 + k, 2.0});
    params.push_back(p);
    losses.push_back(g.sum(g.mul(p, p)));
  }
  auto loss = g.minimum(losses);
  g.forward();
  g.backward(loss);
  EXPECT_EQ(g.argmin(loss), 0u);
  EXPECT_EQ(g.gradient(params[0]), (Vec{2.0, 4.0}));
  for (int k = 1; k < 4; ++k) EXPECT_EQ(g.gradient(params[k]), (Vec{0.0, 0.0}));
}

TEST(GraphBackward, Deterministic) {
  auto run = [] {
    std::mt19937_64 rng(5);
    Graph g;
    auto a = g.parameter(random_vec(rng, 8));
    auto w = g.parameter(random_vec(rng, 24));
    auto y = g.tanh(g.matvec(w, a, 3, 8));
    auto loss = g.sum(g.mul(y, y));
    g.forward();
    g.backward(loss);
    return std::make_pair(g.gradient(a), g.gradient(w));
  };
  EXPECT_EQ(run(), run());
}

TEST(SparseLinear, DiagonalMaskIsIdentity) {
  SparseLinear layer;
  layer.mask = std::make_shared<const SparseMask>(4, 4, std::vector<std::uint32_t>{0, 1, 2, 3},
                                                  std::vector<std::uint32_t>{0, 1, 2, 3});
  layer.weights = {1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(sparse_apply(layer, Vec{1, 2, 3, 4}), (Vec{1, 2, 3, 4}));
}

TEST(SparseLinear, RowWithoutConnectionsIsZero) {
  SparseLinear layer;
  layer.mask = std::make_shared<const SparseMask>(3, 2, std::vector<std::uint32_t>{0, 2},
                                                  std::vector<std::uint32_t>{1, 0});
  layer.weights = {2.0, -1.0};
  const Vec y = sparse_apply(layer, Vec{5.0, 7.0});
  EXPECT_EQ(y, (Vec{14.0, 0.0, -5.0}));
}

TEST(SparseLinear, MatchesDenseEquivalent) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SparseLinear layer = SparseLinear::create(37, 23, 0.2, seed, 1.0);
    std::mt19937_64 rng(seed + 100);
    const Vec x = random_vec(rng, 23);
    Vec dense(37 * 23, 0.0);
    for (std::size_t k = 0; k < layer.mask->size(); ++k) {
      dense[layer.mask->row_index()[k] * 23 + layer.mask->col_index()[k]] = layer.weights[k];
    }
    // oracle: column-major accumulation over the dense matrix
    Vec expected(37, 0.0);
    for (std::size_t c = 0; c < 23; ++c) {
      for (std::size_t r = 0; r < 37; ++r) expected[r] += dense[r * 23 + c] * x[c];
    }
    const Vec y = sparse_apply(layer, x);
    for (std::size_t r = 0; r < 37; ++r) EXPECT_NEAR(y[r], expected[r], 1e-10);
  }
}

TEST(SparseLinear, LengthMismatchIsAnError) {
  const SparseLinear layer = SparseLinear::create(4, 3, 0.5, 1, 1.0);
  EXPECT_THROW(sparse_apply(layer, Vec{1.0, 2.0}), std::invalid_argument);
}

TEST(SparseLinear, MaskSizeUniqueAndReproducible) {
  const SparseMask a = SparseMask::sample(100, 256, 0.01, 42);
  const SparseMask b = SparseMask::sample(100, 256, 0.01, 42);
  EXPECT_EQ(a.size(), 256u);
  EXPECT_EQ(a, b);
  EXPECT_THROW(SparseMask::sample(4, 4, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(SparseMask::sample(4, 4, 1.5, 1), std::invalid_argument);
}

TEST(SparseLinear, GradientMatchesFiniteDifferences) {
  auto mask = std::make_shared<const SparseMask>(SparseMask::sample(9, 7, 0.3, 9));
  std::mt19937_64 rng(1);
  const Vec w0 = random_vec(rng, mask->size());
  const Vec x0 = random_vec(rng, 7);
  Vec both = w0;
  both.insert(both.end(), x0.begin(), x0.end());
  auto build = [&](auto& ops, const auto& v) {
    auto y = ops.sparse_apply(mask, ops.slice(v, 0, w0.size()), ops.slice(v, w0.size(), 7));
    return ops.sum(ops.tanh(y));
  };
  Graph g;
  auto p = g.parameter(both);
  auto loss = build(g, p);
  g.forward();
  g.backward(loss);
  auto f = [&](const Vec& v) {
    PlainOps ops;
    return build(ops, v)[0];
  };
  EXPECT_LT(ltm::testing::max_relative_error(g.gradient(p), ltm::testing::central_differences(f, both)), 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Adam adam;
  Vec p = {1.0, -2.0};
  const Vec g = {0.0, 0.0};
  std::vector<ParamRef> blocks = {{"p", p, g}};
  adam.step(blocks);
  EXPECT_EQ(p, (Vec{1.0, -2.0}));
}

TEST(Adam, ConstantGradientDescends) {
  Adam adam;
  Vec p = {0.0, 0.0};
  const Vec g = {2.0, -0.5};
  for (int i = 0; i < 50; ++i) {
    std::vector<ParamRef> blocks = {{"p", p, g}};
    adam.step(blocks);
  }
  EXPECT_LT(p[0], 0.0);
  EXPECT_GT(p[1], 0.0);
}

TEST(Adam, QuadraticBowlConverges) {
  std::mt19937_64 rng(3);
  Vec x = random_vec(rng, 10);
  auto f = [](const Vec& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return s;
  };
  const double initial = f(x);
  AdamConfig config;
  config.learning_rate = 0.05;
  Adam adam(config);
  for (int step = 0; step < 200; ++step) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
    std::vector<ParamRef> blocks = {{"x", x, g}};
    adam.step(blocks);
  }
  EXPECT_LT(f(x), 1e-3 * initial);
}

TEST(Adam, NonFiniteGradientNamesTheBlock) {
  Adam adam;
  Vec p = {1.0};
  const Vec g = {std::nan("")};
  std::vector<ParamRef> blocks = {{"stretcher.W1", p, g}};
  try {
    adam.step(blocks);
    FAIL() << "expected an error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("stretcher.W1"), std::string::npos);
  }
  EXPECT_EQ(p, (Vec{1.0}));
}

TEST(Adam, ClipsToGlobalNorm) {
  AdamConfig config;
  config.learning_rate = 1.0;
  config.clip_norm = 5.0;
  Adam adam(config);
  Vec a = {0.0};
  Vec b = {0.0};
  const Vec ga = {300.0};
  const Vec gb = {400.0};
  std::vector<ParamRef> blocks = {{"a", a, ga}, {"b", b, gb}};
  adam.step(blocks);
  const auto* ma = adam.moments("a");
  ASSERT_NE(ma, nullptr);
  EXPECT_NEAR(ma->first[0], 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(adam.moments("b")->first[0], 0.1 * 4.0, 1e-12);
}

}  // namespace
}  // namespace ltm::numeric
