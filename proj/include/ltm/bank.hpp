#pragma once

// A bank of program vectors sharing one stretcher. Each window is scored by
// every program and only the best one (minimum loss) is trained on it, which
// drives the programs to specialize.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltm/numeric/graph.hpp"
#include "ltm/numeric/optimizer.hpp"
#include "ltm/seqae.hpp"
#include "ltm/stretcher.hpp"

namespace ltm::bank {

using seqae::ModelShape;
using stretcher::StretcherParams;

/// Encoder input and decoder target. For plain reconstruction both are the
/// same window; prediction and continuation training use other targets.
struct TrainingPair {
  Window input;
  Window target;

  static TrainingPair reconstruction(Window w) {
    TrainingPair p{std::move(w), {}};
    p.target = p.input;
    return p;
  }
};

struct RoutingResult {
  std::size_t window_id = 0;
  Vec losses;
  ProgramId argmin = 0;
  double min_loss = 0.0;
};

struct TrainMetrics {
  double mean_min_loss = 0.0;
  std::vector<std::size_t> usage;  // windows routed to each program
};

class ProgramBank {
 public:
  ProgramBank(ModelShape shape, StretcherParams stretcher, std::vector<ProgramVector> programs,
              numeric::AdamConfig adam = {})
      : shape_(shape),
        layout_(seqae::param_layout(shape)),
        stretcher_(std::move(stretcher)),
        programs_(std::move(programs)),
        optimizer_(adam) {
    if (programs_.empty()) throw std::invalid_argument("ProgramBank: needs at least one program");
    if (stretcher_.output_size != layout_.total) {
      throw std::invalid_argument("ProgramBank: stretcher output " + std::to_string(stretcher_.output_size) +
                                  " does not match autoencoder layout " + std::to_string(layout_.total));
    }
    for (std::size_t i = 0; i < programs_.size(); ++i) {
      if (programs_[i].id != i) throw std::invalid_argument("ProgramBank: program ids must be 0..n-1");
      if (programs_[i].embedding.size() != kProgramWidth) {
        throw std::invalid_argument("ProgramBank: program embedding must have 64 elements");
      }
    }
    refresh();
  }

  /// n programs with N(0,1) embeddings and keys and a fresh stretcher.
  /// `correlation` in [0, 1) makes the embeddings pairwise correlated (each
  /// entry stays N(0,1)), so all programs start near one another.
  static ProgramBank create(const ModelShape& shape, std::size_t n_programs, std::uint64_t seed,
                            double density = stretcher::kDefaultDensity, numeric::AdamConfig adam = {},
                            double correlation = 0.0) {
    if (!(correlation >= 0.0 && correlation < 1.0)) {
      throw std::invalid_argument("ProgramBank::create: correlation must lie in [0, 1)");
    }
    const auto layout = seqae::param_layout(shape);
    const Vec base = stretcher::gaussian_vector(seed * 1000003 + 99);
    const double shared = std::sqrt(correlation);
    const double own = std::sqrt(1.0 - correlation);
    std::vector<ProgramVector> programs;
    for (std::size_t i = 0; i < n_programs; ++i) {
      ProgramVector p = stretcher::sample_program(seed * 1000003 + 17 * i + 1, static_cast<ProgramId>(i));
      if (correlation > 0.0) {
        for (std::size_t k = 0; k < p.embedding.size(); ++k) p.embedding[k] = shared * base[k] + own * p.embedding[k];
      }
      p.key = stretcher::gaussian_vector(seed * 1000003 + 17 * i + 2, kKeyWidth);
      programs.push_back(std::move(p));
    }
    return ProgramBank(shape, stretcher::init_stretcher(seed, layout.total, density), std::move(programs),
                       adam);
  }

  const ModelShape& shape() const { return shape_; }
  const seqae::ParamLayout& layout() const { return layout_; }
  const StretcherParams& stretcher() const { return stretcher_; }
  StretcherParams& mutable_stretcher() { return stretcher_; }
  const std::vector<ProgramVector>& programs() const { return programs_; }
  const ProgramVector& program(ProgramId id) const { return programs_.at(id); }
  std::size_t size() const { return programs_.size(); }
  numeric::Adam& optimizer() { return optimizer_; }
  const numeric::Adam& optimizer() const { return optimizer_; }

  /// Autoencoder generated from program `id` by the current stretcher.
  const seqae::Autoencoder& autoencoder(ProgramId id) const { return autoencoders_.at(id); }

  ProgramId add_program(Vec embedding, std::optional<Vec> key = std::nullopt) {
    if (embedding.size() != kProgramWidth) throw std::invalid_argument("add_program: embedding width");
    const auto id = static_cast<ProgramId>(programs_.size());
    programs_.push_back(ProgramVector{id, std::move(embedding), std::move(key)});
    autoencoders_.emplace_back(shape_, stretcher::stretch(programs_.back(), stretcher_));
    return id;
  }

  void set_embedding(ProgramId id, Vec embedding) {
    programs_.at(id).embedding = std::move(embedding);
    refresh();
  }
  void set_key(ProgramId id, Vec key) { programs_.at(id).key = std::move(key); }
  Vec& mutable_key(ProgramId id) {
    auto& k = programs_.at(id).key;
    if (!k) k = Vec(kKeyWidth, 0.0);
    return *k;
  }
  Vec& mutable_embedding(ProgramId id) { return programs_.at(id).embedding; }

  /// Re-stretches every program; call after changing parameters directly.
  void refresh() {
    autoencoders_.clear();
    autoencoders_.reserve(programs_.size());
    for (const ProgramVector& p : programs_) autoencoders_.emplace_back(shape_, stretcher::stretch(p, stretcher_));
  }

  /// Diagnostic routing counts per (evaluation label, program).
  std::map<std::string, std::vector<std::size_t>>& usage() { return usage_; }
  const std::map<std::string, std::vector<std::size_t>>& usage() const { return usage_; }

 private:
  ModelShape shape_;
  seqae::ParamLayout layout_;
  StretcherParams stretcher_;
  std::vector<ProgramVector> programs_;
  std::vector<seqae::Autoencoder> autoencoders_;
  numeric::Adam optimizer_;
  std::map<std::string, std::vector<std::size_t>> usage_;
};

/// Scores the window under every program; ties go to the lowest id.
inline RoutingResult route(std::span<const Frame> input, std::span<const Frame> target, const ProgramBank& bank,
                           std::size_t window_id = 0) {
  RoutingResult r;
  r.window_id = window_id;
  r.losses.reserve(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) {
    r.losses.push_back(bank.autoencoder(static_cast<ProgramId>(j)).loss(input, target));
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < r.losses.size(); ++j) {
    if (r.losses[j] < r.losses[best]) best = j;
  }
  r.argmin = static_cast<ProgramId>(best);
  r.min_loss = r.losses[best];
  return r;
}

inline RoutingResult route(std::span<const Frame> window, const ProgramBank& bank, std::size_t window_id = 0) {
  return route(window, window, bank, window_id);
}

/// Restricted routing over a candidate subset; returns the best candidate.
inline RoutingResult route_candidates(std::span<const Frame> window, const ProgramBank& bank,
                                      std::span<const ProgramId> candidates) {
  if (candidates.empty()) throw std::invalid_argument("route_candidates: no candidates");
  RoutingResult r;
  for (ProgramId id : candidates) r.losses.push_back(bank.autoencoder(id).loss(window));
  std::size_t best = 0;
  for (std::size_t j = 1; j < r.losses.size(); ++j) {
    if (r.losses[j] < r.losses[best] || (r.losses[j] == r.losses[best] && candidates[j] < candidates[best])) {
      best = j;
    }
  }
  r.argmin = candidates[best];
  r.min_loss = r.losses[best];
  return r;
}

inline std::string embedding_block(ProgramId id) { return "program." + std::to_string(id) + ".embedding"; }

/// One optimizer step on mean over the batch of the minimum-over-programs
/// loss. Only each window's best program and the shared stretcher receive
/// gradient from that window. A nonempty `assignment` names the program for
/// each pair instead of the minimum.
inline TrainMetrics train_step(std::span<const TrainingPair> batch, ProgramBank& bank,
                               std::span<const ProgramId> assignment = {}) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  if (!assignment.empty() && assignment.size() != batch.size()) {
    throw std::invalid_argument("train_step: one assigned program per pair");
  }
  for (ProgramId id : assignment) {
    if (id >= bank.size()) throw std::out_of_range("train_step: unknown program " + std::to_string(id));
  }
  numeric::Graph g;
  const auto nodes = stretcher::bind_nodes(g, bank.stretcher());
  std::vector<numeric::NodeId> embeddings;
  std::vector<seqae::Weights<numeric::Graph>> weights;
  for (const ProgramVector& p : bank.programs()) {
    embeddings.push_back(g.parameter(p.embedding));
    weights.push_back(seqae::bind_weights(g, stretcher::stretch(g, nodes, embeddings.back()), bank.layout()));
  }
  std::vector<numeric::NodeId> minima;
  minima.reserve(batch.size());
  std::vector<numeric::NodeId> per_program(bank.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingPair& pair = batch[i];
    if (!assignment.empty()) {
      minima.push_back(seqae::pair_loss(g, weights[assignment[i]], bank.shape(), pair.input, pair.target));
      continue;
    }
    for (std::size_t j = 0; j < bank.size(); ++j) {
      per_program[j] = seqae::pair_loss(g, weights[j], bank.shape(), pair.input, pair.target);
    }
    minima.push_back(g.minimum(per_program));
  }
  const auto loss = g.scale(g.sum(g.concat(minima)), 1.0 / static_cast<double>(batch.size()));
  g.forward();

  TrainMetrics metrics;
  metrics.mean_min_loss = g.scalar(loss);
  if (!std::isfinite(metrics.mean_min_loss)) throw std::domain_error("train_step: non-finite loss");
  metrics.usage.assign(bank.size(), 0);
  for (std::size_t i = 0; i < minima.size(); ++i) {
    ++metrics.usage[assignment.empty() ? g.argmin(minima[i]) : assignment[i]];
  }

  g.backward(loss);

  StretcherParams& sp = bank.mutable_stretcher();
  std::vector<Vec> grads;
  std::vector<numeric::ParamRef> refs;
  grads.reserve(8 + bank.size());
  auto add_block = [&](std::string name, Vec& values, numeric::NodeId node) {
    grads.push_back(g.gradient(node));
    refs.push_back(numeric::ParamRef{std::move(name), values, grads.back()});
  };
  for (std::size_t i = 0; i < 3; ++i) {
    add_block("stretcher.W" + std::to_string(i + 1), sp.weights[i], nodes.weights[i]);
    add_block("stretcher.b" + std::to_string(i + 1), sp.biases[i], nodes.biases[i]);
  }
  add_block("stretcher.W4", sp.last.weights, nodes.last_weights);
  add_block("stretcher.b4", sp.last_bias, nodes.last_bias);
  for (std::size_t j = 0; j < bank.size(); ++j) {
    add_block(embedding_block(static_cast<ProgramId>(j)), bank.mutable_embedding(static_cast<ProgramId>(j)),
              embeddings[j]);
  }
  bank.optimizer().step(refs);
  bank.refresh();
  return metrics;
}

/// Mean of the routed minimum loss over a data set.
inline double mean_min_loss(std::span<const TrainingPair> data, const ProgramBank& bank) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const TrainingPair& p : data) total += route(p.input, p.target, bank).min_loss;
  return total / static_cast<double>(data.size());
}

/// Runs `steps` minibatch steps with batches drawn uniformly with
/// replacement. Returns the metrics of the last step.
inline TrainMetrics train(std::span<const TrainingPair> data, ProgramBank& bank, std::size_t steps,
                          std::size_t batch_size, std::mt19937_64& rng) {
  if (data.empty()) throw std::invalid_argument("train: empty data set");
  TrainMetrics last;
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<TrainingPair> batch(std::min(batch_size, data.size()));
  for (std::size_t s = 0; s < steps; ++s) {
    for (auto& slot : batch) slot = data[pick(rng)];
    last = train_step(batch, bank);
  }
  return last;
}

struct FitOptions {
  std::size_t programs = 3;
  double density = stretcher::kDefaultDensity;
  double correlation = 0.8;
  numeric::AdamConfig adam;
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  std::size_t restarts = 1;
  std::uint64_t seed = 0;
};

struct FitReport {
  std::vector<double> restart_losses;
  std::size_t chosen = 0;
};

/// Trains `restarts` independently seeded banks from scratch and keeps the
/// one with the lowest mean min-loss on the training data. Selection uses
/// only the training objective.
inline ProgramBank fit(const ModelShape& shape, std::span<const TrainingPair> data, const FitOptions& options,
                       FitReport* report = nullptr) {
  if (options.restarts == 0) throw std::invalid_argument("fit: restarts must be >= 1");
  std::optional<ProgramBank> best;
  double best_loss = 0.0;
  FitReport local;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    const std::uint64_t seed = options.seed + 7919 * r;
    ProgramBank bank =
        ProgramBank::create(shape, options.programs, seed, options.density, options.adam, options.correlation);
    std::mt19937_64 rng(seed);
    train(data, bank, options.steps, options.batch_size, rng);
    const double loss = mean_min_loss(data, bank);
    local.restart_losses.push_back(loss);
    if (!best || loss < best_loss) {
      best = std::move(bank);
      best_loss = loss;
      local.chosen = r;
    }
  }
  if (report) *report = std::move(local);
  return std::move(*best);
}

/// counts[label][program] of argmin routing. Labels come from the evaluation
/// harness only.
using UsageMatrix = std::map<std::string, std::vector<std::size_t>>;

inline UsageMatrix usage_matrix(std::span<const Window> windows, std::span<const std::string> labels,
                                const ProgramBank& bank) {
  if (windows.size() != labels.size()) throw std::invalid_argument("usage_matrix: one label per window");
  UsageMatrix counts;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    auto& row = counts[labels[i]];
    row.resize(bank.size(), 0);
    ++row[route(windows[i], bank).argmin];
  }
  return counts;
}

inline void write_usage_csv(std::ostream& out, const UsageMatrix& counts) {
  out << "domain,program,count\n";
  for (const auto& [label, row] : counts) {
    for (std::size_t j = 0; j < row.size(); ++j) out << label << ',' << j << ',' << row[j] << '\n';
  }
}

struct GrowthPolicy {
  double init_sigma = 0.1;
  double cost_per_program = 64.0 * std::numbers::ln2;  // nats for one 64-element vector
  std::size_t trial_steps = 400;
  double plateau_eps = 1e-3;
  std::size_t plateau_steps = 200;
  std::size_t max_plateau_rounds = 20;
  std::size_t max_programs = 32;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
};

struct GrowthAttempt {
  ProgramId parent = 0;
  double loss_after = 0.0;
  double loss_before = 0.0;  // control bank after the trial steps
  double gain = 0.0;         // (before - after) * coded values, in nats
  bool accepted = false;
};

struct GrowthReport {
  std::size_t initial_programs = 0;
  std::size_t final_programs = 0;
  double initial_loss = 0.0;
  std::vector<GrowthAttempt> attempts;
};

/// Trains until the data-set mean min-loss improves by less than
/// plateau_eps over plateau_steps steps. Returns the final mean min-loss.
inline double train_to_plateau(std::span<const TrainingPair> data, ProgramBank& bank, const GrowthPolicy& policy,
                               std::mt19937_64& rng) {
  double current = mean_min_loss(data, bank);
  for (std::size_t round = 0; round < policy.max_plateau_rounds; ++round) {
    train(data, bank, policy.plateau_steps, policy.batch_size, rng);
    const double next = mean_min_loss(data, bank);
    const bool plateau = current - next < policy.plateau_eps;
    current = next;
    if (plateau) break;
  }
  return current;
}

/// Number of coded values (frames times channels) in a data set; the mean
/// per-value loss times this is the data's code length in nats.
inline double coded_values(std::span<const TrainingPair> data) {
  double n = 0.0;
  for (const TrainingPair& p : data) {
    for (const Frame& f : p.target) n += static_cast<double>(f.size());
  }
  return n;
}

/// Greedy capacity growth. Repeatedly clones the program carrying the most
/// routed loss (plus Gaussian noise) and trains the enlarged bank. A control
/// copy without the clone is trained on the same batches; the clone is kept
/// only if the code length it saves over the control pays for the stored
/// vector. On rejection the control bank is kept.
inline GrowthReport grow(ProgramBank& bank, std::span<const TrainingPair> data, const GrowthPolicy& policy) {
  if (data.empty()) throw std::invalid_argument("grow: empty data set");
  std::mt19937_64 rng(policy.seed);
  GrowthReport report;
  report.initial_programs = bank.size();
  double current = train_to_plateau(data, bank, policy, rng);
  report.initial_loss = current;
  const double n = coded_values(data);

  while (bank.size() < policy.max_programs) {
    // even a perfect fit could not pay for another program
    if (current * n <= policy.cost_per_program) break;

    Vec routed(bank.size(), 0.0);
    for (const TrainingPair& p : data) {
      const RoutingResult r = route(p.input, p.target, bank);
      routed[r.argmin] += r.min_loss;
    }
    ProgramId parent = 0;
    for (std::size_t j = 1; j < routed.size(); ++j) {
      if (routed[j] > routed[parent]) parent = static_cast<ProgramId>(j);
    }

    ProgramBank trial = bank;
    Vec embedding = bank.program(parent).embedding;
    std::normal_distribution<double> noise(0.0, policy.init_sigma);
    for (double& e : embedding) e += noise(rng);
    trial.add_program(std::move(embedding), bank.program(parent).key);
    std::mt19937_64 batches = rng;
    train(data, trial, policy.trial_steps, policy.batch_size, rng);
    train(data, bank, policy.trial_steps, policy.batch_size, batches);

    GrowthAttempt attempt;
    attempt.parent = parent;
    attempt.loss_before = mean_min_loss(data, bank);
    attempt.loss_after = mean_min_loss(data, trial);
    attempt.gain = (attempt.loss_before - attempt.loss_after) * n;
    attempt.accepted = attempt.gain > policy.cost_per_program;
    report.attempts.push_back(attempt);
    current = attempt.loss_before;
    if (!attempt.accepted) break;
    bank = std::move(trial);
    current = attempt.loss_after;
  }
  report.final_programs = bank.size();
  return report;
}

}  // namespace ltm::bank
