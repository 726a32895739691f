#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "ltm/numeric/kernels.hpp"

namespace ltm::numeric {

/// Fixed connectivity pattern of a sparse linear map. Entries are unique and
/// sorted by (row, col); the pattern never changes after construction.
class SparseMask {
 public:
  SparseMask(std::size_t rows, std::size_t cols, std::vector<std::uint32_t> row_index,
             std::vector<std::uint32_t> col_index)
      : rows_(rows), cols_(cols), rows_of_(std::move(row_index)), cols_of_(std::move(col_index)) {
    if (rows_of_.size() != cols_of_.size()) {
      throw std::invalid_argument("SparseMask: row/col index lengths differ");
    }
    for (std::size_t k = 0; k < rows_of_.size(); ++k) {
      if (rows_of_[k] >= rows_ || cols_of_[k] >= cols_) {
        throw std::out_of_range("SparseMask: entry out of range");
      }
      if (k > 0) {
        const bool ordered = rows_of_[k - 1] < rows_of_[k] ||
                             (rows_of_[k - 1] == rows_of_[k] && cols_of_[k - 1] < cols_of_[k]);
        if (!ordered) throw std::invalid_argument("SparseMask: entries not unique and sorted");
      }
    }
  }

  /// Samples round(density * rows * cols) distinct entries (Floyd's algorithm).
  static SparseMask sample(std::size_t rows, std::size_t cols, double density, std::uint64_t seed) {
    if (!(density > 0.0 && density <= 1.0)) {
      throw std::invalid_argument("SparseMask: density must lie in (0, 1], got " +
                                  std::to_string(density));
    }
    const std::uint64_t total = static_cast<std::uint64_t>(rows) * cols;
    const auto count = static_cast<std::uint64_t>(std::llround(density * static_cast<double>(total)));
    std::vector<std::uint64_t> flat;
    flat.reserve(count);
    if (count == total) {
      for (std::uint64_t i = 0; i < total; ++i) flat.push_back(i);
    } else {
      std::mt19937_64 rng(seed);
      std::unordered_set<std::uint64_t> chosen;
      chosen.reserve(count * 2);
      for (std::uint64_t j = total - count; j < total; ++j) {
        std::uniform_int_distribution<std::uint64_t> pick(0, j);
        const std::uint64_t t = pick(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
      }
      flat.assign(chosen.begin(), chosen.end());
      std::sort(flat.begin(), flat.end());
    }
    std::vector<std::uint32_t> r(flat.size()), c(flat.size());
    for (std::size_t k = 0; k < flat.size(); ++k) {
      r[k] = static_cast<std::uint32_t>(flat[k] / cols);
      c[k] = static_cast<std::uint32_t>(flat[k] % cols);
    }
    return SparseMask(rows, cols, std::move(r), std::move(c));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return rows_of_.size(); }
  std::span<const std::uint32_t> row_index() const { return rows_of_; }
  std::span<const std::uint32_t> col_index() const { return cols_of_; }

  bool operator==(const SparseMask&) const = default;

  // y[r] = sum over entries (r, c) of w * x[c]
  void apply(std::span<const double> weights, std::span<const double> x, std::span<double> y) const {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t k = 0; k < rows_of_.size(); ++k) y[rows_of_[k]] += weights[k] * x[cols_of_[k]];
  }

  void apply_backward(std::span<const double> weights, std::span<const double> x,
                      std::span<const double> g, double* dw, double* dx) const {
    for (std::size_t k = 0; k < rows_of_.size(); ++k) {
      const double gr = g[rows_of_[k]];
      if (dw != nullptr) dw[k] += gr * x[cols_of_[k]];
      if (dx != nullptr) dx[cols_of_[k]] += weights[k] * gr;
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint32_t> rows_of_;
  std::vector<std::uint32_t> cols_of_;
};

/// Linear layer restricted to a fixed random mask, one weight per entry.
struct SparseLinear {
  std::shared_ptr<const SparseMask> mask;
  Vec weights;
  double density = 1.0;

  std::size_t rows() const { return mask->rows(); }
  std::size_t cols() const { return mask->cols(); }

  static SparseLinear create(std::size_t rows, std::size_t cols, double density, std::uint64_t seed,
                             double weight_scale) {
    SparseLinear layer;
    layer.mask = std::make_shared<const SparseMask>(SparseMask::sample(rows, cols, density, seed));
    layer.density = density;
    layer.weights.resize(layer.mask->size());
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& w : layer.weights) w = normal(rng) * weight_scale;
    return layer;
  }
};

inline Vec sparse_apply(const SparseLinear& layer, std::span<const double> input) {
  if (input.size() != layer.cols()) {
    throw std::invalid_argument("sparse_apply: input length " + std::to_string(input.size()) +
                                " does not match layer cols " + std::to_string(layer.cols()));
  }
  Vec out(layer.rows());
  layer.mask->apply(layer.weights, input, out);
  return out;
}

}  // namespace ltm::numeric
