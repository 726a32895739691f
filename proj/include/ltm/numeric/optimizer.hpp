#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltm/numeric/kernels.hpp"

namespace ltm::numeric {

struct AdamConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global L2 norm over all blocks; <= 0 disables
  // learning-rate multipliers for blocks whose name starts with the key
  std::map<std::string, double> rate_scale;
};

/// One named parameter block and its gradient for a single step.
struct ParamRef {
  std::string name;
  std::span<double> values;
  std::span<const double> grad;
};

/// Adaptive-moment optimizer. Moments and step counts are kept per named
/// block; a block whose gradient is identically zero in a step is left
/// untouched (parameters, moments and step count).
class Adam {
 public:
  struct Moments {
    Vec first;
    Vec second;
    std::uint64_t steps = 0;
  };

  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }

  /// Applies one update. Throws before touching anything if a gradient is not
  /// finite or a block's length changed.
  void step(std::span<const ParamRef> blocks) {
    double norm_sq = 0.0;
    for (const ParamRef& b : blocks) {
      if (b.values.size() != b.grad.size()) {
        throw std::invalid_argument("Adam: gradient length mismatch for block '" + b.name + "'");
      }
      auto it = state_.find(b.name);
      if (it != state_.end() && it->second.first.size() != b.values.size()) {
        throw std::invalid_argument("Adam: block '" + b.name + "' changed length");
      }
      for (double g : b.grad) {
        if (!std::isfinite(g)) {
          throw std::domain_error("Adam: non-finite gradient in block '" + b.name + "'");
        }
        norm_sq += g * g;
      }
    }
    double factor = 1.0;
    const double norm = std::sqrt(norm_sq);
    if (config_.clip_norm > 0.0 && norm > config_.clip_norm) factor = config_.clip_norm / norm;

    for (const ParamRef& b : blocks) {
      bool any = false;
      for (double g : b.grad) {
        if (g != 0.0) {
          any = true;
          break;
        }
      }
      if (!any) continue;
      Moments& m = state_[b.name];
      if (m.first.empty()) {
        m.first.assign(b.values.size(), 0.0);
        m.second.assign(b.values.size(), 0.0);
      }
      ++m.steps;
      const double rate = config_.learning_rate * rate_scale_for(b.name);
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(m.steps));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(m.steps));
      for (std::size_t i = 0; i < b.values.size(); ++i) {
        const double g = b.grad[i] * factor;
        m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * g;
        m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * g * g;
        const double mhat = m.first[i] / c1;
        const double vhat = m.second[i] / c2;
        b.values[i] -= rate * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
    }
  }

  const Moments* moments(const std::string& name) const {
    auto it = state_.find(name);
    return it == state_.end() ? nullptr : &it->second;
  }

  void forget(const std::string& name) { state_.erase(name); }
  void reset() { state_.clear(); }

 private:
  double rate_scale_for(const std::string& name) const {
    double scale = 1.0;
    for (const auto& [prefix, factor] : config_.rate_scale) {
      if (name.starts_with(prefix)) scale *= factor;
    }
    return scale;
  }

  AdamConfig config_;
  std::map<std::string, Moments> state_;
};

}  // namespace ltm::numeric
