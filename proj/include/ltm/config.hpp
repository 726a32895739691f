#pragma once

// Experiment configuration: INI text (section headers, `key = value`), every
// field optional with the default shown in ExperimentConfig.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ltm/bank.hpp"
#include "ltm/lifelong.hpp"
#include "ltm/vmem.hpp"

namespace ltm::config {

struct ExperimentConfig {
  std::uint64_t seed = 1;

  // [data]
  std::size_t bits = 32;
  std::size_t actions = 0;
  std::size_t frames_per_episode = 700;
  std::size_t rounds = 3;

  // [model]
  std::size_t hidden = 16;
  std::size_t thought = 16;
  std::size_t window = 7;
  std::vector<std::size_t> allowed_lengths;
  double span_cost = 0.0;

  // [bank]
  std::size_t programs = 3;
  double correlation = 0.8;
  bool grow = false;
  bank::GrowthPolicy growth;

  // [stretcher]
  double density = stretcher::kDefaultDensity;
  std::optional<std::uint64_t> stretcher_seed;  // defaults to the global seed

  // [training]
  std::size_t batch_size = 16;
  std::size_t steps = 200;  // optimizer steps per consolidation
  double learning_rate = 3e-3;
  double replay_ratio = 0.3;
  std::size_t replay_pool = 256;
  std::size_t buffer_capacity = 4096;
  bool prediction_loss = false;

  // [retrieval]
  std::size_t retrieval_epochs = 10;
  double key_learning_rate = 1e-2;

  // [memory]
  vmem::IndexParams memory;

  // [paths]
  std::filesystem::path trace = "trace.ltmt";
  std::optional<std::filesystem::path> labels;  // defaults to <trace>.labels
  std::filesystem::path model = "model.ltmm";
  std::filesystem::path metrics = "metrics.csv";
  std::filesystem::path usage = "usage.csv";
  std::filesystem::path query = "query.ltmt";
  std::filesystem::path output = "output.ltmt";

  std::uint64_t bank_seed() const { return stretcher_seed.value_or(seed); }
  std::filesystem::path labels_path() const {
    return labels.value_or(std::filesystem::path(trace.string() + ".labels"));
  }

  seqae::ModelShape shape(bool tagged = false) const {
    return seqae::ModelShape{seqae::FrameSchema{bits, actions, tagged}, hidden, thought};
  }

  numeric::AdamConfig adam() const {
    numeric::AdamConfig a;
    a.learning_rate = learning_rate;
    return a;
  }

  lifelong::LifelongConfig lifelong() const {
    lifelong::LifelongConfig c;
    c.window = window;
    c.allowed_lengths = allowed_lengths;
    c.span_cost = span_cost;
    c.buffer_capacity = buffer_capacity;
    c.replay_ratio = replay_ratio;
    c.replay_pool = replay_pool;
    c.steps_per_consolidation = steps;
    c.batch_size = batch_size;
    c.grow = grow;
    c.growth = growth;
    c.growth.batch_size = batch_size;
    c.growth.seed = seed;
    c.prediction_loss = prediction_loss;
    c.seed = seed;
    return c;
  }

  /// Checks the dimensions against each other.
  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (bits + actions == 0) fail("data.bits + data.actions must be >= 1");
    if (hidden == 0 || thought == 0) fail("model.hidden and model.thought must be >= 1");
    if (window == 0) fail("model.window must be >= 1");
    for (std::size_t l : allowed_lengths) {
      if (l == 0) fail("model.allowed_lengths entries must be >= 1");
    }
    if (programs == 0) fail("bank.programs must be >= 1");
    if (!(correlation >= 0.0 && correlation < 1.0)) fail("bank.correlation must lie in [0, 1)");
    if (!(density > 0.0 && density <= 1.0)) fail("stretcher.density must lie in (0, 1]");
    if (batch_size == 0) fail("training.batch_size must be >= 1");
    if (!(replay_ratio >= 0.0 && replay_ratio <= 1.0)) fail("training.replay_ratio must lie in [0, 1]");
    if (buffer_capacity == 0) fail("training.buffer_capacity must be >= 1");
    if (memory.max_degree < 2 || memory.ef_construction == 0 || memory.ef_search == 0) {
      fail("memory index parameters out of range");
    }
  }
};

namespace detail {

inline std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(item.substr(first), &used);
    if (item.find_first_not_of(" \t", first + used) != std::string::npos) {
      throw std::invalid_argument("config: bad list entry '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  auto get = [&](const std::string& key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    try {
      if (tree.get_child_optional(key)) field = tree.get<T>(key);
    } catch (const pt::ptree_bad_data&) {
      throw std::invalid_argument("config: bad value for '" + key + "'");
    }
  };
  auto get_path = [&](const std::string& key, std::filesystem::path& field) {
    if (auto v = tree.get_optional<std::string>(key)) field = *v;
  };

  get("seed", c.seed);
  get("data.bits", c.bits);
  get("data.actions", c.actions);
  get("data.frames_per_episode", c.frames_per_episode);
  get("data.rounds", c.rounds);
  get("model.hidden", c.hidden);
  get("model.thought", c.thought);
  get("model.window", c.window);
  if (auto v = tree.get_optional<std::string>("model.allowed_lengths")) c.allowed_lengths = detail::parse_list(*v);
  get("model.span_cost", c.span_cost);
  get("bank.programs", c.programs);
  get("bank.correlation", c.correlation);
  get("bank.grow", c.grow);
  get("bank.init_sigma", c.growth.init_sigma);
  get("bank.cost_per_program", c.growth.cost_per_program);
  get("bank.trial_steps", c.growth.trial_steps);
  get("bank.plateau_eps", c.growth.plateau_eps);
  get("bank.plateau_steps", c.growth.plateau_steps);
  get("bank.max_plateau_rounds", c.growth.max_plateau_rounds);
  get("bank.max_programs", c.growth.max_programs);
  get("stretcher.density", c.density);
  if (auto v = tree.get_optional<std::uint64_t>("stretcher.seed")) c.stretcher_seed = *v;
  get("training.batch_size", c.batch_size);
  get("training.steps", c.steps);
  get("training.learning_rate", c.learning_rate);
  get("training.replay_ratio", c.replay_ratio);
  get("training.replay_pool", c.replay_pool);
  get("training.buffer_capacity", c.buffer_capacity);
  get("training.prediction_loss", c.prediction_loss);
  get("retrieval.epochs", c.retrieval_epochs);
  get("retrieval.key_learning_rate", c.key_learning_rate);
  get("memory.max_degree", c.memory.max_degree);
  get("memory.ef_construction", c.memory.ef_construction);
  get("memory.ef_search", c.memory.ef_search);
  get_path("paths.trace", c.trace);
  if (auto v = tree.get_optional<std::string>("paths.labels")) c.labels = std::filesystem::path(*v);
  get_path("paths.model", c.model);
  get_path("paths.metrics", c.metrics);
  get_path("paths.usage", c.usage);
  get_path("paths.query", c.query);
  get_path("paths.output", c.output);
  c.validate();
  return c;
}

inline ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

inline ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path.string());
  return parse(is);
}

}  // namespace ltm::config
