#pragma once

#include "rkopt/autodiff.hpp"
#include "rkopt/error.hpp"
#include "rkopt/types.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rkopt {

enum class Activation { relu, tanh };
enum class InitScheme { he_uniform };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

/// Fully connected classifier: widths = (input, hidden..., classes).
struct MlpSpec {
  std::vector<int> layer_widths{784, 64, 64, 10};
  Activation activation = Activation::relu;
  std::uint64_t init_seed = 0;
  InitScheme init_scheme = InitScheme::he_uniform;

  void validate() const {
    if (layer_widths.size() < 3) throw InvalidArgument("MLP needs an input, at least one hidden layer, and an output");
    for (int w : layer_widths) {
      if (w <= 0) throw InvalidArgument("MLP layer widths must be positive");
    }
  }

  int input_width() const { return layer_widths.front(); }
  int classes() const { return layer_widths.back(); }
  std::size_t layers() const { return layer_widths.size() - 1; }
};

/// Weight block of one layer is rows × cols (out × in), followed by `rows` biases.
struct LayerShape {
  Eigen::Index rows;
  Eigen::Index cols;
};

template <std::floating_point T>
struct ParamVector {
  Vector<T> data;
  std::vector<LayerShape> shape_table;
};

inline std::vector<LayerShape> shape_table(const MlpSpec& spec) {
  spec.validate();
  std::vector<LayerShape> shapes;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    shapes.push_back({spec.layer_widths[l + 1], spec.layer_widths[l]});
  }
  return shapes;
}

inline Eigen::Index param_count(const MlpSpec& spec) {
  Eigen::Index n = 0;
  for (const auto& s : shape_table(spec)) n += s.rows * s.cols + s.rows;
  return n;
}

/// He-uniform weights U(-√(6/fan_in), √(6/fan_in)), zero biases.
template <std::floating_point T>
ParamVector<T> init_params(const MlpSpec& spec) {
  ParamVector<T> p;
  p.shape_table = shape_table(spec);
  p.data = Vector<T>::Zero(param_count(spec));
  std::mt19937_64 rng(spec.init_seed);
  Eigen::Index offset = 0;
  for (const auto& s : p.shape_table) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < s.rows * s.cols; ++i) p.data(offset + i) = static_cast<T>(dist(rng));
    offset += s.rows * s.cols + s.rows;
  }
  return p;
}

template <std::floating_point T>
struct LossAndGrad {
  double loss = 0.0;
  Vector<T> grad;
};

namespace detail {

template <std::floating_point T>
void check_batch(const MlpSpec& spec, const Vector<T>& theta, const MatrixRM<T>& inputs,
                 std::span<const std::uint8_t> labels) {
  if (theta.size() != param_count(spec)) throw InvalidArgument("parameter vector length does not match the MLP");
  if (inputs.cols() != spec.input_width()) throw InvalidArgument("input width does not match the MLP");
  if (inputs.rows() == 0) throw InvalidArgument("empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) throw InvalidArgument("label count mismatch");
}

}  // namespace detail

/// Mean softmax cross-entropy over the batch and its reverse-mode gradient.
template <std::floating_point T>
LossAndGrad<T> loss_and_grad(const MlpSpec& spec, const Vector<T>& theta, const MatrixRM<T>& inputs,
                             std::span<const std::uint8_t> labels) {
  detail::check_batch(spec, theta, inputs, labels);
  using M = MatrixRM<T>;
  const auto shapes = shape_table(spec);
  ad::Tape<T> tape;
  std::vector<std::pair<ad::Var, ad::Var>> params;
  ad::Var h = tape.leaf(inputs, false);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [rows, cols] = shapes[l];
    ad::Var w = tape.leaf(Eigen::Map<const M>(theta.data() + offset, rows, cols), true);
    ad::Var b = tape.leaf(Eigen::Map<const M>(theta.data() + offset + rows * cols, 1, rows), true);
    params.emplace_back(w, b);
    offset += rows * cols + rows;
    h = tape.add_row(tape.matmul_nt(h, w), b);
    if (l + 1 < shapes.size()) h = spec.activation == Activation::relu ? tape.relu(h) : tape.tanh(h);
  }
  const ad::Var loss = tape.softmax_cross_entropy(h, labels);
  tape.backward(loss);

  LossAndGrad<T> out;
  out.loss = tape.scalar(loss);
  out.grad.resize(theta.size());
  offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [rows, cols] = shapes[l];
    Eigen::Map<M>(out.grad.data() + offset, rows, cols) = tape.grad(params[l].first);
    Eigen::Map<M>(out.grad.data() + offset + rows * cols, 1, rows) = tape.grad(params[l].second);
    offset += rows * cols + rows;
  }
  return out;
}

/// Forward pass only.
template <std::floating_point T>
MatrixRM<T> logits(const MlpSpec& spec, const Vector<T>& theta, const MatrixRM<T>& inputs) {
  if (theta.size() != param_count(spec)) throw InvalidArgument("parameter vector length does not match the MLP");
  if (inputs.cols() != spec.input_width()) throw InvalidArgument("input width does not match the MLP");
  using M = MatrixRM<T>;
  const auto shapes = shape_table(spec);
  M h = inputs;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [rows, cols] = shapes[l];
    Eigen::Map<const M> w(theta.data() + offset, rows, cols);
    Eigen::Map<const Vector<T>> b(theta.data() + offset + rows * cols, rows);
    M z = h * w.transpose();
    z.rowwise() += b.transpose();
    offset += rows * cols + rows;
    if (l + 1 < shapes.size()) {
      h = spec.activation == Activation::relu ? M(z.cwiseMax(T(0))) : M(z.array().tanh().matrix());
    } else {
      h = std::move(z);
    }
  }
  return h;
}

/// Mean softmax cross-entropy of precomputed logits, accumulated in double.
template <std::floating_point T>
double mean_cross_entropy(const MatrixRM<T>& z, std::span<const std::uint8_t> labels) {
  if (z.rows() == 0 || static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw InvalidArgument("cross-entropy needs one label per logit row");
  }
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double zmax = static_cast<double>(z.row(r).maxCoeff());
    double denom = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) denom += std::exp(static_cast<double>(z(r, c)) - zmax);
    total += std::log(denom) + zmax - static_cast<double>(z(r, labels[r]));
  }
  return total / static_cast<double>(z.rows());
}

/// Mean cross-entropy without building a tape.
template <std::floating_point T>
double loss(const MlpSpec& spec, const Vector<T>& theta, const MatrixRM<T>& inputs,
            std::span<const std::uint8_t> labels) {
  detail::check_batch(spec, theta, inputs, labels);
  return mean_cross_entropy(logits(spec, theta, inputs), labels);
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
template <std::floating_point T>
double accuracy_from_logits(const MatrixRM<T>& z, std::span<const std::uint8_t> labels) {
  if (z.rows() == 0) throw InvalidArgument("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c) {
      if (z(r, c) > z(r, best)) best = c;
    }
    if (best == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

template <std::floating_point T>
double accuracy(const MlpSpec& spec, const Vector<T>& theta, const MatrixRM<T>& inputs,
                std::span<const std::uint8_t> labels) {
  detail::check_batch(spec, theta, inputs, labels);
  return accuracy_from_logits(logits(spec, theta, inputs), labels);
}

/// Gradient oracle for one fixed batch. Holds its own copy of the inputs.
template <std::floating_point T>
class MlpBatchOracle {
 public:
  using Scalar = T;

  MlpBatchOracle(MlpSpec spec, MatrixRM<T> inputs, std::vector<std::uint8_t> labels)
      : spec_(std::move(spec)), inputs_(std::move(inputs)), labels_(std::move(labels)), dim_(param_count(spec_)) {
    if (inputs_.cols() != spec_.input_width()) throw InvalidArgument("input width does not match the MLP");
    if (inputs_.rows() == 0 || static_cast<std::size_t>(inputs_.rows()) != labels_.size()) {
      throw InvalidArgument("batch must be nonempty with one label per row");
    }
  }

  Eigen::Index dim() const noexcept { return dim_; }
  double loss(const Vector<T>& theta) const { return rkopt::loss(spec_, theta, inputs_, labels_); }
  Vector<T> gradient(const Vector<T>& theta) const { return loss_and_grad(spec_, theta, inputs_, labels_).grad; }

  const MlpSpec& spec() const noexcept { return spec_; }
  const MatrixRM<T>& inputs() const noexcept { return inputs_; }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }

 private:
  MlpSpec spec_;
  MatrixRM<T> inputs_;
  std::vector<std::uint8_t> labels_;
  Eigen::Index dim_;
};

}  // namespace rkopt
