#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "ltm/numeric/graph.hpp"
#include "ltm/stretcher.hpp"
#include "support/finite_difference.hpp"

namespace ltm::stretcher {
namespace {

// Scalar probe: <c, stretch(embedding)> for a fixed random c.
double probe(const StretcherParams& sp, const Vec& embedding, const Vec& c, Vec* d_embedding,
             std::array<Vec, 3>* d_weights, Vec* d_last) {
  numeric::Graph g;
  const auto nodes = bind_nodes(g, sp);
  const auto e = g.parameter(embedding);
  const auto out = stretch(g, nodes, e);
  const auto loss = g.sum(g.mul(out, g.constant(c)));
  g.forward();
  if (d_embedding) {
    g.backward(loss);
    *d_embedding = g.gradient(e);
    for (std::size_t i = 0; i < 3; ++i) (*d_weights)[i] = g.gradient(nodes.weights[i]);
    *d_last = g.gradient(nodes.last_weights);
  }
  return g.scalar(loss);
}

TEST(Stretcher, SameSeedSameParameters) {
  EXPECT_EQ(init_stretcher(5, 300), init_stretcher(5, 300));
  EXPECT_FALSE(init_stretcher(5, 300) == init_stretcher(6, 300));
}

TEST(Stretcher, SparseLayerHasRequestedDensity) {
  const auto sp = init_stretcher(1, 5000, 0.01);
  EXPECT_EQ(sp.last.mask->size(), static_cast<std::size_t>(std::llround(0.01 * 5000 * 256)));
  EXPECT_EQ(sp.last.mask->rows(), 5000U);
  EXPECT_EQ(sp.last.mask->cols(), kHiddenWidths.back());
  EXPECT_EQ(sp.parameter_count(), 64 * 64 + 64 + 64 * 128 + 128 + 128 * 256 + 256 + sp.last.mask->size() + 5000);
}

TEST(Stretcher, OutputSizeAndDeterminism) {
  const auto sp = init_stretcher(3, 777);
  const auto p = sample_program(9);
  const Vec a = stretch(p, sp);
  ASSERT_EQ(a.size(), 777U);
  EXPECT_EQ(a, stretch(p, sp));
  for (double v : a) EXPECT_TRUE(std::isfinite(v));
}

TEST(Stretcher, DifferentProgramsGiveDifferentWeights) {
  const auto sp = init_stretcher(3, 500, 0.05);
  EXPECT_NE(stretch(sample_program(1), sp), stretch(sample_program(2), sp));
}

TEST(Stretcher, RejectsBadShapes) {
  EXPECT_THROW(init_stretcher(1, 0), std::invalid_argument);
  EXPECT_THROW(init_stretcher(1, 10, 0.0), std::invalid_argument);
  EXPECT_THROW(init_stretcher(1, 10, 1.5), std::invalid_argument);
  const auto sp = init_stretcher(1, 10, 0.5);
  EXPECT_THROW(stretch(ProgramVector{0, Vec(63, 0.0), {}}, sp), std::invalid_argument);
  const auto layout = seqae::param_layout(2, 2, 2);
  EXPECT_THROW(stretch(sample_program(1), sp, layout), std::invalid_argument);
}

TEST(Stretcher, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  StretcherParams sp = init_stretcher(2, 12, 0.25);
  const Vec embedding = sample_program(3).embedding;
  Vec c(12);
  for (double& v : c) v = normal(rng);

  Vec d_embedding, d_last;
  std::array<Vec, 3> d_weights;
  probe(sp, embedding, c, &d_embedding, &d_weights, &d_last);

  const auto fd_embedding =
      testing::central_differences([&](const Vec& e) { return probe(sp, e, c, nullptr, nullptr, nullptr); }, embedding);
  EXPECT_LT(testing::max_relative_error(d_embedding, fd_embedding), 1e-5);

  const auto fd_last = testing::central_differences(
      [&](const Vec& w) {
        StretcherParams s = sp;
        s.last.weights = w;
        return probe(s, embedding, c, nullptr, nullptr, nullptr);
      },
      sp.last.weights);
  EXPECT_LT(testing::max_relative_error(d_last, fd_last), 1e-5);

  // first dense layer, sampled entries
  const auto fd_w1 = testing::central_differences(
      [&](const Vec& w) {
        StretcherParams s = sp;
        s.weights[0] = w;
        return probe(s, embedding, c, nullptr, nullptr, nullptr);
      },
      sp.weights[0]);
  EXPECT_LT(testing::max_relative_error(d_weights[0], fd_w1), 1e-5);
}

TEST(SampleProgram, StandardNormalEntries) {
  double sum = 0.0, sq = 0.0;
  const std::size_t n = 200;
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : sample_program(i).embedding) {
      sum += v;
      sq += v * v;
    }
  }
  const double count = static_cast<double>(n * kProgramWidth);
  EXPECT_NEAR(sum / count, 0.0, 0.05);
  EXPECT_NEAR(sq / count, 1.0, 0.05);
}

}  // namespace
}  // namespace ltm::stretcher
