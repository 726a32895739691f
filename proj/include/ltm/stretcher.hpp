#pragma once

// Hypernetwork expanding a 64-element program vector into the flat parameter
// vector of one autoencoder: dense 64->64->128->256 with tanh, then a fixed
// random sparse linear map 256->P plus a dense bias.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltm/numeric/graph.hpp"
#include "ltm/numeric/plain_ops.hpp"
#include "ltm/numeric/sparse_linear.hpp"
#include "ltm/seqae.hpp"

namespace ltm {

inline constexpr std::size_t kProgramWidth = 64;
inline constexpr std::size_t kKeyWidth = 64;

using ProgramId = std::uint32_t;

struct ProgramVector {
  ProgramId id = 0;
  Vec embedding;
  std::optional<Vec> key;

  bool operator==(const ProgramVector&) const = default;
};

namespace stretcher {

inline constexpr std::array<std::size_t, 4> kHiddenWidths = {64, 64, 128, 256};
inline constexpr double kDefaultDensity = 0.01;

struct StretcherParams {
  std::size_t output_size = 0;
  std::uint64_t seed = 0;
  // layer i maps kHiddenWidths[i] -> kHiddenWidths[i + 1], row-major
  std::array<Vec, 3> weights;
  std::array<Vec, 3> biases;
  numeric::SparseLinear last;
  Vec last_bias;

  double density() const { return last.density; }
  std::size_t parameter_count() const {
    std::size_t n = last.weights.size() + last_bias.size();
    for (std::size_t i = 0; i < 3; ++i) n += weights[i].size() + biases[i].size();
    return n;
  }
};

inline bool operator==(const StretcherParams& a, const StretcherParams& b) {
  return a.output_size == b.output_size && a.seed == b.seed && a.weights == b.weights &&
         a.biases == b.biases && *a.last.mask == *b.last.mask && a.last.weights == b.last.weights &&
         a.last.density == b.last.density && a.last_bias == b.last_bias;
}

inline StretcherParams init_stretcher(std::uint64_t seed, std::size_t output_size,
                                      double density = kDefaultDensity) {
  if (output_size == 0) throw std::invalid_argument("init_stretcher: output size must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) {
    throw std::invalid_argument("init_stretcher: density must lie in (0, 1]");
  }
  StretcherParams sp;
  sp.output_size = output_size;
  sp.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t in = kHiddenWidths[i];
    const std::size_t out = kHiddenWidths[i + 1];
    const double limit = std::sqrt(3.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    sp.weights[i].resize(in * out);
    for (double& w : sp.weights[i]) w = uniform(rng);
    sp.biases[i].assign(out, 0.0);
  }
  const std::size_t fan_in = kHiddenWidths.back();
  sp.last = numeric::SparseLinear::create(output_size, fan_in, density, seed + 1,
                                          1.0 / std::sqrt(static_cast<double>(fan_in) * density));
  sp.last_bias.assign(output_size, 0.0);
  return sp;
}

/// Graph leaves for one stretcher instance, shared by every program stretched
/// in the same graph.
template <class Ops>
struct Nodes {
  using V = typename Ops::Value;
  std::array<V, 3> weights;
  std::array<V, 3> biases;
  V last_weights;
  V last_bias;
  std::shared_ptr<const numeric::SparseMask> mask;
};

template <class Ops>
Nodes<Ops> bind_nodes(Ops& ops, const StretcherParams& sp) {
  Nodes<Ops> n;
  for (std::size_t i = 0; i < 3; ++i) {
    n.weights[i] = ops.parameter(sp.weights[i]);
    n.biases[i] = ops.parameter(sp.biases[i]);
  }
  n.last_weights = ops.parameter(sp.last.weights);
  n.last_bias = ops.parameter(sp.last_bias);
  n.mask = sp.last.mask;
  return n;
}

template <class Ops>
typename Ops::Value stretch(Ops& ops, const Nodes<Ops>& n, const typename Ops::Value& embedding) {
  auto x = embedding;
  for (std::size_t i = 0; i < 3; ++i) {
    x = ops.tanh(ops.add(ops.matvec(n.weights[i], x, kHiddenWidths[i + 1], kHiddenWidths[i]), n.biases[i]));
  }
  return ops.add(ops.sparse_apply(n.mask, n.last_weights, x), n.last_bias);
}

inline Vec stretch(const ProgramVector& program, const StretcherParams& sp) {
  if (program.embedding.size() != kProgramWidth) {
    throw std::invalid_argument("stretch: program embedding must have 64 elements");
  }
  numeric::PlainOps ops;
  return stretch(ops, bind_nodes(ops, sp), program.embedding);
}

/// Stretches and checks the result against the autoencoder layout it feeds.
inline Vec stretch(const ProgramVector& program, const StretcherParams& sp, const seqae::ParamLayout& layout) {
  if (sp.output_size != layout.total) {
    throw std::invalid_argument("stretch: stretcher emits " + std::to_string(sp.output_size) +
                                " parameters but the layout needs " + std::to_string(layout.total));
  }
  return stretch(program, sp);
}

inline Vec gaussian_vector(std::uint64_t seed, std::size_t width = kProgramWidth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(width);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Program vector with i.i.d. N(0, 1) entries.
inline ProgramVector sample_program(std::uint64_t seed, ProgramId id = 0) {
  return ProgramVector{id, gaussian_vector(seed), std::nullopt};
}

}  // namespace stretcher
}  // namespace ltm
