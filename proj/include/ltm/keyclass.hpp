#pragma once

// Window -> 64-wide key classifier used to fetch a few candidate programs
// from memory instead of scoring every program in the bank.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltm/bank.hpp"
#include "ltm/numeric/graph.hpp"
#include "ltm/numeric/optimizer.hpp"
#include "ltm/numeric/plain_ops.hpp"
#include "ltm/seqae.hpp"
#include "ltm/vmem.hpp"

namespace ltm::keyclass {

inline constexpr std::size_t kClassifierHidden = 32;

/// One-layer LSTM over the window's frames followed by a linear head from
/// the final hidden state to the key. The parameter count is fixed by the
/// frame width.
class KeyClassifier {
 public:
  KeyClassifier(std::size_t width, Vec params) : width_(width), params_(std::move(params)) {
    if (width == 0) throw std::invalid_argument("KeyClassifier: width must be >= 1");
    if (params_.size() != parameter_count(width)) {
      throw std::invalid_argument("KeyClassifier: expected " + std::to_string(parameter_count(width)) +
                                  " parameters, got " + std::to_string(params_.size()));
    }
  }

  static std::size_t parameter_count(std::size_t width) {
    const std::size_t h = kClassifierHidden;
    return 4 * h * (width + h) + 4 * h + kKeyWidth * h + kKeyWidth;
  }

  /// Uniform(+-1/sqrt(fan in)) weights, zero biases.
  static KeyClassifier create(std::size_t width, std::uint64_t seed) {
    const std::size_t h = kClassifierHidden;
    Vec p(parameter_count(width), 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lstm(-1.0 / std::sqrt(static_cast<double>(width + h)),
                                                1.0 / std::sqrt(static_cast<double>(width + h)));
    std::uniform_real_distribution<double> head(-1.0 / std::sqrt(static_cast<double>(h)),
                                                1.0 / std::sqrt(static_cast<double>(h)));
    const std::size_t enc_w = 4 * h * (width + h);
    for (std::size_t i = 0; i < enc_w; ++i) p[i] = lstm(rng);
    const std::size_t head_at = enc_w + 4 * h;
    for (std::size_t i = 0; i < kKeyWidth * h; ++i) p[head_at + i] = head(rng);
    return KeyClassifier(width, std::move(p));
  }

  std::size_t width() const { return width_; }
  const Vec& params() const { return params_; }
  Vec& mutable_params() { return params_; }

  Vec classify(std::span<const Frame> window) const {
    numeric::PlainOps ops;
    return forward(ops, params_, window, width_);
  }

  /// Shared forward pass for plain evaluation and gradient graphs.
  template <class Ops>
  static typename Ops::Value forward(Ops& ops, const typename Ops::Value& params, std::span<const Frame> window,
                                     std::size_t width) {
    if (window.empty()) throw std::invalid_argument("classify: empty window");
    const std::size_t h = kClassifierHidden;
    const std::size_t enc_w = 4 * h * (width + h);
    auto w = ops.slice(params, 0, enc_w);
    auto b = ops.slice(params, enc_w, 4 * h);
    auto head_w = ops.slice(params, enc_w + 4 * h, kKeyWidth * h);
    auto head_b = ops.slice(params, enc_w + 4 * h + kKeyWidth * h, kKeyWidth);
    auto hs = ops.constant(Vec(h, 0.0));
    auto cs = ops.constant(Vec(h, 0.0));
    for (const Frame& f : window) {
      if (f.size() != width) throw std::invalid_argument("classify: frame width mismatch");
      std::tie(hs, cs) = seqae::lstm_cell(ops, ops.constant(f), hs, cs, w, b, width, h);
    }
    return ops.add(ops.matvec(head_w, hs, kKeyWidth, h), head_b);
  }

 private:
  std::size_t width_;
  Vec params_;
};

enum class Phase { kJoint, kKeysOnly, kAuto };

struct RetrievalConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 3e-3;      // classifier
  double key_learning_rate = 1e-2;  // program keys
  double stabilize_delta = 1e-4;    // RMS classifier change per epoch that ends the joint phase
  std::uint64_t seed = 0;
};

struct RetrievalMetrics {
  std::vector<double> epoch_loss;  // mean squared key distance over the epoch
  std::size_t keys_only_from = std::numeric_limits<std::size_t>::max();  // first keys-only epoch
};

inline std::string key_block(ProgramId id) { return "key." + std::to_string(id); }

/// Fits classify(window) to the key of the window's routed program. Routing
/// is computed once up front from the (fixed) bank.
inline RetrievalMetrics train_retrieval(std::span<const Window> windows, bank::ProgramBank& bank,
                                        KeyClassifier& classifier, Phase phase, const RetrievalConfig& config = {}) {
  if (windows.empty()) throw std::invalid_argument("train_retrieval: empty data set");
  if (config.batch_size == 0) throw std::invalid_argument("train_retrieval: batch size must be >= 1");
  std::vector<ProgramId> target(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) target[i] = bank::route(windows[i], bank).argmin;
  for (ProgramId id = 0; id < bank.size(); ++id) bank.mutable_key(id);

  numeric::AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  numeric::Adam classifier_opt(ac);
  numeric::AdamConfig kc;
  kc.learning_rate = config.key_learning_rate;
  numeric::Adam keys_opt(kc);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  RetrievalMetrics metrics;
  bool keys_only = phase == Phase::kKeysOnly;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (keys_only && metrics.keys_only_from == std::numeric_limits<std::size_t>::max()) {
      metrics.keys_only_from = epoch;
    }
    const Vec before = classifier.params();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      numeric::Graph g;
      const auto params = keys_only ? g.constant(classifier.params()) : g.parameter(classifier.params());
      std::vector<numeric::NodeId> keys;
      for (ProgramId id = 0; id < bank.size(); ++id) keys.push_back(g.parameter(*bank.program(id).key));
      std::vector<numeric::NodeId> losses;
      for (std::size_t i = start; i < end; ++i) {
        const auto out = KeyClassifier::forward(g, params, windows[order[i]], classifier.width());
        losses.push_back(g.squared_error(out, keys[target[order[i]]]));
      }
      const auto loss = g.scale(g.sum(g.concat(losses)), 1.0 / static_cast<double>(end - start));
      g.forward();
      total += g.scalar(loss) * static_cast<double>(end - start);
      g.backward(loss);
      if (!keys_only) {
        const Vec grad = g.gradient(params);
        const numeric::ParamRef ref{"classifier", classifier.mutable_params(), grad};
        classifier_opt.step(std::span(&ref, 1));
      }
      std::vector<Vec> grads;
      std::vector<numeric::ParamRef> refs;
      grads.reserve(bank.size());
      for (ProgramId id = 0; id < bank.size(); ++id) {
        grads.push_back(g.gradient(keys[id]));
        refs.push_back({key_block(id), bank.mutable_key(id), grads.back()});
      }
      keys_opt.step(refs);
    }
    metrics.epoch_loss.push_back(total / static_cast<double>(windows.size()));
    if (phase == Phase::kAuto && !keys_only) {
      double change = 0.0;
      for (std::size_t i = 0; i < before.size(); ++i) {
        const double d = classifier.params()[i] - before[i];
        change += d * d;
      }
      if (std::sqrt(change / static_cast<double>(before.size())) < config.stabilize_delta) keys_only = true;
    }
  }
  return metrics;
}

/// Replaces the memory's program records with the bank's current keys.
inline std::size_t sync_program_keys(const bank::ProgramBank& bank, vmem::VectorMemory& memory) {
  for (const vmem::Record& r : memory.records()) {
    if (vmem::kind_of(r.value) == vmem::PayloadKind::kProgram) memory.erase(r.id);
  }
  for (const ProgramVector& p : bank.programs()) {
    if (!p.key) throw std::invalid_argument("sync_program_keys: program " + std::to_string(p.id) + " has no key");
    memory.write(*p.key, vmem::ProgramRef{p.id});
  }
  return bank.size();
}

/// Candidate programs for a window, nearest key first.
inline std::vector<ProgramId> retrieve_programs(std::span<const Frame> window, const KeyClassifier& classifier,
                                                const vmem::VectorMemory& memory, std::size_t k) {
  std::vector<ProgramId> out;
  for (const vmem::Hit& h : memory.read(classifier.classify(window), k, vmem::PayloadKind::kProgram)) {
    out.push_back(std::get<vmem::ProgramRef>(h.record.value).program);
  }
  return out;
}

/// Routing restricted to the retrieved candidates.
inline bank::RoutingResult route_retrieved(std::span<const Frame> window, const bank::ProgramBank& bank,
                                           const KeyClassifier& classifier, const vmem::VectorMemory& memory,
                                           std::size_t k) {
  const auto candidates = retrieve_programs(window, classifier, memory, k);
  if (candidates.empty()) return bank::route(window, bank);
  return bank::route_candidates(window, bank, candidates);
}

}  // namespace ltm::keyclass
