#pragma once

// Dense kernels shared by the graph and the plain evaluator. Both paths call
// exactly these loops so that forward values agree bit-for-bit.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ltm::numeric {

using Vec = std::vector<double>;

namespace kernels {

// y = W x, W row-major rows x cols.
inline void matvec(std::span<const double> w, std::span<const double> x, std::span<double> y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// dW += g x^T, dx += W^T g.
inline void matvec_backward(std::span<const double> w, std::span<const double> x,
                            std::span<const double> g, double* dw, double* dx, std::size_t rows,
                            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = w.data() + r * cols;
    if (dw != nullptr) {
      double* drow = dw + r * cols;
      for (std::size_t c = 0; c < cols; ++c) drow[c] += gr * x[c];
    }
    if (dx != nullptr) {
      for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * gr;
    }
  }
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// -[t log s(z) + (1-t) log(1-s(z))], stable for large |z|.
inline double sigmoid_cross_entropy(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace kernels
}  // namespace ltm::numeric
