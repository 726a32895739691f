#pragma once

// Reverse-mode automatic differentiation over dense vectors.
//
// A Graph is built by appending nodes; shapes are checked as nodes are added.
// forward() evaluates every node in construction order and backward() then
// propagates adjoints from a scalar node to every node that can reach it.
// Matrices are plain vectors interpreted row-major by matvec.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltm/numeric/kernels.hpp"
#include "ltm/numeric/sparse_linear.hpp"

namespace ltm::numeric {

struct NodeId {
  std::uint32_t index = 0;
  bool operator==(const NodeId&) const = default;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatVec,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kConcat,
  kSlice,
  kSum,
  kSquaredError,
  kSigmoidCrossEntropy,
  kMinimum,
  kSparseApply,
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Graph {
 public:
  using Value = NodeId;

  NodeId constant(Vec value) { return add_leaf(std::move(value), false); }
  NodeId parameter(Vec value) { return add_leaf(std::move(value), true); }
  /// Leaf with the given values; the plain evaluator treats both kinds alike.
  NodeId leaf(Vec value) { return constant(std::move(value)); }

  /// y = W x where w holds a rows x cols row-major matrix.
  NodeId matvec(NodeId w, NodeId x, std::size_t rows, std::size_t cols) {
    require_size(w, rows * cols, "matvec weights");
    require_size(x, cols, "matvec input");
    Node& n = push(OpKind::kMatVec, {w, x}, rows);
    n.rows = rows;
    n.cols = cols;
    return last();
  }

  NodeId add(NodeId a, NodeId b) { return binary(OpKind::kAdd, a, b, "add"); }
  NodeId sub(NodeId a, NodeId b) { return binary(OpKind::kSub, a, b, "sub"); }
  NodeId mul(NodeId a, NodeId b) { return binary(OpKind::kMul, a, b, "mul"); }

  NodeId scale(NodeId a, double factor) {
    Node& n = push(OpKind::kScale, {a}, size_of(a));
    n.scalar = factor;
    return last();
  }

  NodeId sigmoid(NodeId a) { return unary(OpKind::kSigmoid, a); }
  NodeId tanh(NodeId a) { return unary(OpKind::kTanh, a); }

  NodeId concat(std::span<const NodeId> parts) {
    if (parts.empty()) throw GraphError("concat: no inputs");
    std::size_t total = 0;
    for (NodeId p : parts) total += size_of(p);
    push(OpKind::kConcat, std::vector<NodeId>(parts.begin(), parts.end()), total);
    return last();
  }
  NodeId concat(std::initializer_list<NodeId> parts) {
    return concat(std::span<const NodeId>(parts.begin(), parts.size()));
  }

  NodeId slice(NodeId a, std::size_t offset, std::size_t length) {
    if (offset + length > size_of(a)) {
      throw GraphError("slice: [" + std::to_string(offset) + ", " +
                       std::to_string(offset + length) + ") exceeds length " +
                       std::to_string(size_of(a)));
    }
    Node& n = push(OpKind::kSlice, {a}, length);
    n.offset = offset;
    return last();
  }

  NodeId sum(NodeId a) { return unary_to_scalar(OpKind::kSum, a); }

  /// sum_i (a_i - b_i)^2
  NodeId squared_error(NodeId prediction, NodeId target) {
    require_same(prediction, target, "squared_error");
    push(OpKind::kSquaredError, {prediction, target}, 1);
    return last();
  }

  /// sum_i CE(sigmoid(logits_i), target_i); the target receives no gradient.
  NodeId sigmoid_cross_entropy(NodeId logits, NodeId target) {
    require_same(logits, target, "sigmoid_cross_entropy");
    push(OpKind::kSigmoidCrossEntropy, {logits, target}, 1);
    return last();
  }

  /// Minimum over scalar nodes. Ties resolve to the lowest index and the
  /// adjoint flows only into the selected branch.
  NodeId minimum(std::span<const NodeId> scalars) {
    if (scalars.empty()) throw GraphError("minimum: no inputs");
    for (NodeId s : scalars) require_size(s, 1, "minimum input");
    push(OpKind::kMinimum, std::vector<NodeId>(scalars.begin(), scalars.end()), 1);
    return last();
  }

  /// out[r] = sum over mask entries (r, c) of weights_k * x[c]
  NodeId sparse_apply(std::shared_ptr<const SparseMask> mask, NodeId weights, NodeId x) {
    require_size(weights, mask->size(), "sparse_apply weights");
    require_size(x, mask->cols(), "sparse_apply input");
    Node& n = push(OpKind::kSparseApply, {weights, x}, mask->rows());
    n.mask = std::move(mask);
    return last();
  }

  void forward() {
    for (; evaluated_ < nodes_.size(); ++evaluated_) evaluate(nodes_[evaluated_]);
  }

  void backward(NodeId loss) {
    if (loss.index >= nodes_.size()) throw GraphError("backward: unknown node");
    if (evaluated_ != nodes_.size()) throw GraphError("backward called before forward");
    if (size_of(loss) != 1) throw GraphError("backward: loss node is not scalar");
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad.clear();
    }
    Node& root = nodes_[loss.index];
    root.grad.assign(1, 1.0);
    root.has_grad = true;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.requires_grad) continue;
      propagate(n);
    }
    backward_done_ = true;
  }

  const Vec& value(NodeId id) const {
    if (id.index >= evaluated_) throw GraphError("value: node not evaluated");
    return nodes_[id.index].value;
  }
  double scalar(NodeId id) const { return value(id).at(0); }

  /// Adjoint of a node after backward(); exact zeros for unreachable nodes.
  Vec gradient(NodeId id) const {
    if (!backward_done_) throw GraphError("gradient: backward has not run");
    const Node& n = nodes_.at(id.index);
    if (!n.has_grad) return Vec(n.size, 0.0);
    return n.grad;
  }

  std::size_t argmin(NodeId id) const {
    const Node& n = nodes_.at(id.index);
    if (n.op != OpKind::kMinimum) throw GraphError("argmin: not a minimum node");
    if (id.index >= evaluated_) throw GraphError("argmin: node not evaluated");
    return n.argmin;
  }

  std::size_t size_of(NodeId id) const { return nodes_.at(id.index).size; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::vector<NodeId> parents;
    std::size_t size = 0;
    bool requires_grad = false;
    bool has_grad = false;
    Vec value;
    Vec grad;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    double scalar = 0.0;
    std::size_t argmin = 0;
    std::shared_ptr<const SparseMask> mask;
  };

  NodeId last() const { return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)}; }

  NodeId add_leaf(Vec value, bool requires_grad) {
    Node n;
    n.size = value.size();
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return last();
  }

  Node& push(OpKind op, std::vector<NodeId> parents, std::size_t size) {
    for (NodeId p : parents) {
      if (p.index >= nodes_.size()) throw GraphError("node references an unknown parent");
    }
    Node n;
    n.op = op;
    n.size = size;
    n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                  [&](NodeId p) { return nodes_[p.index].requires_grad; });
    n.parents = std::move(parents);
    nodes_.push_back(std::move(n));
    backward_done_ = false;
    return nodes_.back();
  }

  NodeId unary(OpKind op, NodeId a) {
    push(op, {a}, size_of(a));
    return last();
  }
  NodeId unary_to_scalar(OpKind op, NodeId a) {
    push(op, {a}, 1);
    return last();
  }
  NodeId binary(OpKind op, NodeId a, NodeId b, const char* what) {
    require_same(a, b, what);
    push(op, {a, b}, size_of(a));
    return last();
  }

  void require_size(NodeId id, std::size_t expected, const char* what) const {
    if (id.index >= nodes_.size()) throw GraphError(std::string(what) + ": unknown node");
    if (size_of(id) != expected) {
      throw GraphError(std::string(what) + ": expected length " + std::to_string(expected) +
                       ", got " + std::to_string(size_of(id)));
    }
  }
  void require_same(NodeId a, NodeId b, const char* what) const {
    if (a.index >= nodes_.size() || b.index >= nodes_.size()) {
      throw GraphError(std::string(what) + ": unknown node");
    }
    if (size_of(a) != size_of(b)) {
      throw GraphError(std::string(what) + ": shape mismatch " + std::to_string(size_of(a)) +
                       " vs " + std::to_string(size_of(b)));
    }
  }

  const Vec& val(NodeId id) const { return nodes_[id.index].value; }

  void evaluate(Node& n) {
    if (n.op == OpKind::kLeaf) return;
    Vec& out = n.value;
    out.assign(n.size, 0.0);
    const auto& p = n.parents;
    switch (n.op) {
      case OpKind::kMatVec:
        kernels::matvec(val(p[0]), val(p[1]), out, n.rows, n.cols);
        break;
      case OpKind::kAdd: {
        const Vec& a = val(p[0]);
        const Vec& b = val(p[1]);
        for (std::size_t i = 0; i < n.size; ++i) out[i] = a[i] + b[i];
        break;
      }
      case OpKind::kSub: {
        const Vec& a = val(p[0]);
        const Vec& b = val(p[1]);
        for (std::size_t i = 0; i < n.size; ++i) out[i] = a[i] - b[i];
        break;
      }
      case OpKind::kMul: {
        const Vec& a = val(p[0]);
        const Vec& b = val(p[1]);
        for (std::size_t i = 0; i < n.size; ++i) out[i] = a[i] * b[i];
        break;
      }
      case OpKind::kScale: {
        const Vec& a = val(p[0]);
        for (std::size_t i = 0; i < n.size; ++i) out[i] = a[i] * n.scalar;
        break;
      }
      case OpKind::kSigmoid: {
        const Vec& a = val(p[0]);
        for (std::size_t i = 0; i < n.size; ++i) out[i] = kernels::sigmoid(a[i]);
        break;
      }
      case OpKind::kTanh: {
        const Vec& a = val(p[0]);
        for (std::size_t i = 0; i < n.size; ++i) out[i] = std::tanh(a[i]);
        break;
      }
      case OpKind::kConcat: {
        std::size_t at = 0;
        for (NodeId id : p) {
          const Vec& a = val(id);
          std::copy(a.begin(), a.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
          at += a.size();
        }
        break;
      }
      case OpKind::kSlice: {
        const Vec& a = val(p[0]);
        std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(n.offset), n.size, out.begin());
        break;
      }
      case OpKind::kSum: {
        double acc = 0.0;
        for (double v : val(p[0])) acc += v;
        out[0] = acc;
        break;
      }
      case OpKind::kSquaredError: {
        const Vec& a = val(p[0]);
        const Vec& b = val(p[1]);
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        out[0] = acc;
        break;
      }
      case OpKind::kSigmoidCrossEntropy: {
        const Vec& z = val(p[0]);
        const Vec& t = val(p[1]);
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) acc += kernels::sigmoid_cross_entropy(z[i], t[i]);
        out[0] = acc;
        break;
      }
      case OpKind::kMinimum: {
        std::size_t best = 0;
        for (std::size_t i = 1; i < p.size(); ++i) {
          if (val(p[i])[0] < val(p[best])[0]) best = i;
        }
        n.argmin = best;
        out[0] = val(p[best])[0];
        break;
      }
      case OpKind::kSparseApply:
        n.mask->apply(val(p[0]), val(p[1]), out);
        break;
      case OpKind::kLeaf:
        break;
    }
  }

  // Returns the adjoint buffer of a parent, or nullptr if it needs none.
  double* grad_of(NodeId id) {
    Node& n = nodes_[id.index];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
      n.grad.assign(n.size, 0.0);
      n.has_grad = true;
    }
    return n.grad.data();
  }

  void propagate(Node& n) {
    // n.parents and n.grad stay valid: nodes_ does not reallocate here.
    const Vec& g = n.grad;
    const auto& p = n.parents;
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatVec:
        kernels::matvec_backward(val(p[0]), val(p[1]), g, grad_of(p[0]), grad_of(p[1]), n.rows,
                                 n.cols);
        break;
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign = n.op == OpKind::kAdd ? 1.0 : -1.0;
        if (double* da = grad_of(p[0])) {
          for (std::size_t i = 0; i < n.size; ++i) da[i] += g[i];
        }
        if (double* db = grad_of(p[1])) {
          for (std::size_t i = 0; i < n.size; ++i) db[i] += sign * g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Vec& a = val(p[0]);
        const Vec& b = val(p[1]);
        if (double* da = grad_of(p[0])) {
          for (std::size_t i = 0; i < n.size; ++i) da[i] += g[i] * b[i];
        }
        if (double* db = grad_of(p[1])) {
          for (std::size_t i = 0; i < n.size; ++i) db[i] += g[i] * a[i];
        }
        break;
      }
      case OpKind::kScale:
        if (double* da = grad_of(p[0])) {
          for (std::size_t i = 0; i < n.size; ++i) da[i] += g[i] * n.scalar;
        }
        break;
      case OpKind::kSigmoid:
        if (double* da = grad_of(p[0])) {
          for (std::size_t i = 0; i < n.size; ++i) {
            const double s = n.value[i];
            da[i] += g[i] * s * (1.0 - s);
          }
        }
        break;
      case OpKind::kTanh:
        if (double* da = grad_of(p[0])) {
          for (std::size_t i = 0; i < n.size; ++i) {
            const double t = n.value[i];
            da[i] += g[i] * (1.0 - t * t);
          }
        }
        break;
      case OpKind::kConcat: {
        std::size_t at = 0;
        for (NodeId id : p) {
          const std::size_t len = size_of(id);
          if (double* da = grad_of(id)) {
            for (std::size_t i = 0; i < len; ++i) da[i] += g[at + i];
          }
          at += len;
        }
        break;
      }
      case OpKind::kSlice:
        if (double* da = grad_of(p[0])) {
          for (std::size_t i = 0; i < n.size; ++i) da[n.offset + i] += g[i];
        }
        break;
      case OpKind::kSum:
        if (double* da = grad_of(p[0])) {
          const std::size_t len = size_of(p[0]);
          for (std::size_t i = 0; i < len; ++i) da[i] += g[0];
        }
        break;
      case OpKind::kSquaredError: {
        const Vec& a = val(p[0]);
        const Vec& b = val(p[1]);
        double* da = grad_of(p[0]);
        double* db = grad_of(p[1]);
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double d = 2.0 * (a[i] - b[i]) * g[0];
          if (da != nullptr) da[i] += d;
          if (db != nullptr) db[i] -= d;
        }
        break;
      }
      case OpKind::kSigmoidCrossEntropy:
        if (double* dz = grad_of(p[0])) {
          const Vec& z = val(p[0]);
          const Vec& t = val(p[1]);
          for (std::size_t i = 0; i < z.size(); ++i) dz[i] += g[0] * (kernels::sigmoid(z[i]) - t[i]);
        }
        break;
      case OpKind::kMinimum:
        if (double* da = grad_of(p[n.argmin])) da[0] += g[0];
        break;
      case OpKind::kSparseApply:
        n.mask->apply_backward(val(p[0]), val(p[1]), g, grad_of(p[0]), grad_of(p[1]));
        break;
    }
  }

  std::vector<Node> nodes_;
  std::size_t evaluated_ = 0;
  bool backward_done_ = false;
};

}  // namespace ltm::numeric
