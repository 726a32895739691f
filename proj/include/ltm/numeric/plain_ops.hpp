#pragma once

// Eager evaluator with the same operation names as Graph. Model code written
// against either one produces identical forward values.

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "ltm/numeric/kernels.hpp"
#include "ltm/numeric/sparse_linear.hpp"

namespace ltm::numeric {

class PlainOps {
 public:
  using Value = Vec;

  Vec constant(Vec v) { return v; }
  Vec parameter(Vec v) { return v; }
  Vec leaf(Vec v) { return v; }

  Vec matvec(const Vec& w, const Vec& x, std::size_t rows, std::size_t cols) {
    check(w.size() == rows * cols && x.size() == cols, "matvec");
    Vec y(rows);
    kernels::matvec(w, x, y, rows, cols);
    return y;
  }

  Vec add(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), "add");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
  }
  Vec sub(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), "sub");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
  }
  Vec mul(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), "mul");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
  }
  Vec scale(const Vec& a, double factor) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
    return out;
  }
  Vec sigmoid(const Vec& a) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = kernels::sigmoid(a[i]);
    return out;
  }
  Vec tanh(const Vec& a) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
    return out;
  }

  Vec concat(std::span<const Vec> parts) {
    Vec out;
    for (const Vec& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  }
  Vec concat(std::initializer_list<Vec> parts) {
    return concat(std::span<const Vec>(parts.begin(), parts.size()));
  }

  Vec slice(const Vec& a, std::size_t offset, std::size_t length) {
    check(offset + length <= a.size(), "slice");
    return Vec(a.begin() + static_cast<std::ptrdiff_t>(offset),
               a.begin() + static_cast<std::ptrdiff_t>(offset + length));
  }

  Vec sum(const Vec& a) {
    double acc = 0.0;
    for (double v : a) acc += v;
    return Vec{acc};
  }

  Vec squared_error(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), "squared_error");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return Vec{acc};
  }

  Vec sigmoid_cross_entropy(const Vec& z, const Vec& t) {
    check(z.size() == t.size(), "sigmoid_cross_entropy");
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += kernels::sigmoid_cross_entropy(z[i], t[i]);
    return Vec{acc};
  }

  Vec minimum(std::span<const Vec> scalars) {
    check(!scalars.empty(), "minimum");
    return Vec{scalars[argmin(scalars)][0]};
  }

  /// Lowest index among equal minima.
  static std::size_t argmin(std::span<const Vec> scalars) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scalars.size(); ++i) {
      if (scalars[i][0] < scalars[best][0]) best = i;
    }
    return best;
  }

  Vec sparse_apply(const std::shared_ptr<const SparseMask>& mask, const Vec& weights, const Vec& x) {
    check(weights.size() == mask->size() && x.size() == mask->cols(), "sparse_apply");
    Vec out(mask->rows());
    mask->apply(weights, x, out);
    return out;
  }

 private:
  static void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
};

}  // namespace ltm::numeric
