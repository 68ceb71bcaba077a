#pragma once

#include "rkopt/error.hpp"
#include "rkopt/types.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace rkopt::ad {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id;
};

/// Reverse-mode autodiff over dense matrices (rows = batch items).
///
/// Nodes are appended in evaluation order, so walking the tape backwards is a
/// valid topological order. Each op records a closure that propagates its
/// output adjoint into its inputs' adjoints.
template <std::floating_point T>
class Tape {
 public:
  using Matrix = MatrixRM<T>;

  Var leaf(Matrix value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
  }

  /// a·wᵀ, with a (n×in) and w (out×in).
  Var matmul_nt(Var a, Var w) {
    Matrix out = value(a) * value(w).transpose();
    return push(std::move(out), needs(a) || needs(w), [a, w](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      if (t.needs(a)) t.accumulate(a, g * t.value(w));
      if (t.needs(w)) t.accumulate(w, g.transpose() * t.value(a));
    });
  }

  /// a + 1·bias, broadcasting the 1×cols bias row over every row of a.
  Var add_row(Var a, Var bias) {
    if (value(bias).rows() != 1 || value(bias).cols() != value(a).cols()) {
      throw InvalidArgument("add_row: bias must be a single row matching the column count");
    }
    Matrix out = value(a).rowwise() + value(bias).row(0);
    return push(std::move(out), needs(a) || needs(bias), [a, bias](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      if (t.needs(a)) t.accumulate(a, g);
      if (t.needs(bias)) t.accumulate(bias, g.colwise().sum());
    });
  }

  Var relu(Var a) {
    Matrix out = value(a).cwiseMax(T(0));
    return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      t.accumulate(a, (t.value(a).array() > T(0)).select(g, T(0)));
    });
  }

  Var tanh(Var a) {
    Matrix out = value(a).array().tanh().matrix();
    return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
      const Matrix& y = t.nodes_[self].value;
      const Matrix& g = t.nodes_[self].grad;
      t.accumulate(a, (g.array() * (T(1) - y.array().square())).matrix());
    });
  }

  /// Mean softmax cross-entropy of row-wise logits against integer labels.
  /// Produces a 1×1 node; the loss is also kept in double via scalar().
  Var softmax_cross_entropy(Var logits, std::span<const std::uint8_t> labels) {
    const Matrix& z = value(logits);
    const Eigen::Index n = z.rows(), k = z.cols();
    if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
      throw InvalidArgument("softmax_cross_entropy: label count must match a nonempty batch");
    }
    Matrix probs(n, k);
    double total = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (labels[r] >= k) throw InvalidArgument("softmax_cross_entropy: label out of range");
      const double zmax = static_cast<double>(z.row(r).maxCoeff());
      double denom = 0.0;
      for (Eigen::Index c = 0; c < k; ++c) denom += std::exp(static_cast<double>(z(r, c)) - zmax);
      const double log_denom = std::log(denom);
      for (Eigen::Index c = 0; c < k; ++c) {
        probs(r, c) = static_cast<T>(std::exp(static_cast<double>(z(r, c)) - zmax - log_denom));
      }
      total += log_denom + zmax - static_cast<double>(z(r, labels[r]));
    }
    const double mean = total / static_cast<double>(n);
    Matrix out(1, 1);
    out(0, 0) = static_cast<T>(mean);
    std::vector<std::uint8_t> labels_copy(labels.begin(), labels.end());
    const Var v = push(std::move(out), needs(logits),
                       [logits, probs = std::move(probs), labels_copy = std::move(labels_copy)](Tape& t,
                                                                                               std::size_t self) {
                         const T scale = t.nodes_[self].grad(0, 0) / static_cast<T>(probs.rows());
                         Matrix g = probs;
                         for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, labels_copy[r]) -= T(1);
                         t.accumulate(logits, g * scale);
                       });
    nodes_[v.id].scalar = mean;
    return v;
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const { return nodes_[v.id].scalar; }
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(out)/d(out) = 1 for a 1×1 output and propagates to every node.
  void backward(Var out) {
    if (value(out).size() != 1) throw InvalidArgument("backward: output must be a scalar");
    for (auto& n : nodes_) {
      if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    nodes_[out.id].grad = Matrix::Constant(1, 1, T(1));
    for (std::size_t i = out.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.requires_grad && n.backward) n.backward(*this, i);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, std::size_t)> backward;
    bool requires_grad = false;
    double scalar = 0.0;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), requires_grad, 0.0});
    return Var{nodes_.size() - 1};
  }

  template <class Expr>
  void accumulate(Var v, const Expr& g) {
    nodes_[v.id].grad += g;
  }

  std::vector<Node> nodes_;
};

}  // namespace rkopt::ad
