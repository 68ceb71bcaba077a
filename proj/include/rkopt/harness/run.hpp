#pragma once

#include "rkopt/data.hpp"
#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/harness/config.hpp"
#include "rkopt/harness/metrics.hpp"
#include "rkopt/model.hpp"
#include "rkopt/optimizers.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rkopt::harness {

struct RunSummary {
  bool diverged = false;
  std::string message;
  std::size_t steps_completed = 0;
  double best_test_acc = 0.0;
  std::uint64_t best_step = 0;  // earliest step attaining best_test_acc
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  double final_train_acc = 0.0;
  double final_test_acc = 0.0;
  std::filesystem::path csv_path;
  std::vector<MetricsRecord> records;
};

/// Counts gradient evaluations passing through to the wrapped oracle.
template <GradientOracle O>
class CountingOracle {
 public:
  using Scalar = scalar_of<O>;

  explicit CountingOracle(const O& inner) : inner_(&inner) {}

  Eigen::Index dim() const { return inner_->dim(); }
  double loss(const Vector<Scalar>& theta) const { return inner_->loss(theta); }
  Vector<Scalar> gradient(const Vector<Scalar>& theta) const {
    ++count_;
    return inner_->gradient(theta);
  }
  Vector<Scalar> hvp(const Vector<Scalar>& theta, const Vector<Scalar>& v) const
    requires ExactHvpOracle<O>
  {
    return inner_->hvp(theta, v);
  }

  std::uint64_t count() const noexcept { return count_; }

 private:
  const O* inner_;
  mutable std::uint64_t count_ = 0;
};

struct Evaluation {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

/// Synthetic quadratic: the loss is the problem itself; accuracies are 0.
class QuadraticWorkload {
 public:
  using Scalar = double;

  explicit QuadraticWorkload(const RunConfig& c)
      : problem_(AnalyticProblem::quadratic(Eigen::Map<const Vector<double>>(
            c.synthetic.diag.data(), static_cast<Eigen::Index>(c.synthetic.diag.size())))),
        init_(c.synthetic.init) {}

  Vector<double> initial() const { return Vector<double>::Constant(problem_.dim(), init_); }
  const AnalyticProblem& next_oracle() { return problem_; }

  Evaluation evaluate(const Vector<double>& theta) const {
    const double l = problem_.loss(theta);
    return {l, l, 0.0, 0.0};
  }

 private:
  AnalyticProblem problem_;
  double init_;
};

/// MLP classifier on a train/test split. All RK stages of one step share the
/// batch returned by next_oracle(). Not movable: the batch stream points into
/// the owned training split.
class MlpWorkload {
 public:
  using Scalar = float;

  MlpWorkload(const RunConfig& c, DatasetSplit train, DatasetSplit test)
      : spec_(c.model), train_(std::move(train)), test_(std::move(test)) {
    if (train_.images.cols() != spec_.input_width()) {
      throw ConfigError("dataset has " + std::to_string(train_.images.cols()) + " features but model.widths starts at " +
                        std::to_string(spec_.input_width()));
    }
    for (auto l : train_.labels) {
      if (l >= spec_.classes()) throw ConfigError("label exceeds the model's class count");
    }
    BatchPlan plan;
    plan.batch_size = c.batch_size == 0 ? train_.size() : c.batch_size;
    plan.shuffle_seed = c.seed;
    plan.drop_last = c.drop_last;
    full_batch_ = plan.batch_size >= train_.size();
    stream_.emplace(train_, plan);
  }

  MlpWorkload(const MlpWorkload&) = delete;
  MlpWorkload& operator=(const MlpWorkload&) = delete;

  Vector<float> initial() const { return init_params<float>(spec_).data; }

  const MlpBatchOracle<float>& next_oracle() {
    if (full_batch_ && current_) return *current_;
    auto batch = stream_->next<float>();
    current_.emplace(spec_, std::move(batch.inputs), std::move(batch.labels));
    return *current_;
  }

  Evaluation evaluate(const Vector<float>& theta) const {
    Evaluation e;
    const auto ztrain = logits(spec_, theta, train_.images);
    e.train_loss = mean_cross_entropy(ztrain, train_.labels);
    e.train_acc = accuracy_from_logits(ztrain, train_.labels);
    const auto ztest = logits(spec_, theta, test_.images);
    e.test_loss = mean_cross_entropy(ztest, test_.labels);
    e.test_acc = accuracy_from_logits(ztest, test_.labels);
    return e;
  }

 private:
  MlpSpec spec_;
  DatasetSplit train_;
  DatasetSplit test_;
  bool full_batch_ = false;
  std::optional<BatchStream> stream_;
  std::optional<MlpBatchOracle<float>> current_;
};

/// Loads (and subsets) the train/test splits a config refers to.
inline std::pair<DatasetSplit, DatasetSplit> load_splits(const RunConfig& c) {
  DatasetSplit train, test;
  if (c.dataset == DatasetKind::synthetic) {
    const auto& s = c.synthetic;
    train = make_blobs(s.train_n, c.model.input_width(), c.model.classes(), c.subset_seed * 2 + 1, s.spread);
    test = make_blobs(s.test_n, c.model.input_width(), c.model.classes(), c.subset_seed * 2 + 2, s.spread);
  } else {
    const auto files = locate_idx_files(resolved_data_dir(c));
    try {
      train = load_idx(files.train_images, files.train_labels, std::string(to_string(c.dataset)) + "-train");
      test = load_idx(files.test_images, files.test_labels, std::string(to_string(c.dataset)) + "-test");
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  const auto shrink = [&](DatasetSplit& split, std::size_t n) {
    if (n == 0 || n == split.size()) return;
    if (n > split.size()) {
      throw ConfigError("requested " + std::to_string(n) + " examples but " + split.name + " has " +
                        std::to_string(split.size()));
    }
    split = subset(split, n, c.subset_seed);
  };
  if (c.dataset != DatasetKind::synthetic) {
    shrink(train, c.train_n);
    shrink(test, c.test_n);
  }
  return {std::move(train), std::move(test)};
}

namespace detail {

template <class Workload>
void train_loop(const RunConfig& c, Workload& workload, std::ostream& csv, RunSummary& summary) {
  using T = typename Workload::Scalar;
  Vector<T> theta = workload.initial();
  Optimizer<T> opt(c.optimizer, theta.size());
  std::uint64_t grad_evals = 0;
  bool have_best = false;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t k = 0; k < c.steps; ++k) {
    const auto& base = workload.next_oracle();
    CountingOracle counted(base);
    StepReport rep;
    try {
      rep = opt.step(counted, theta, k, c.steps);
    } catch (const DivergenceError& e) {
      summary.diverged = true;
      summary.message = "step " + std::to_string(k + 1) + ": " + e.what();
      return;
    }
    grad_evals += counted.count();
    summary.steps_completed = k + 1;

    if ((k + 1) % c.eval_every != 0 && k + 1 != c.steps) continue;
    const Evaluation ev = workload.evaluate(theta);
    MetricsRecord r;
    r.step = k + 1;
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    r.train_loss = ev.train_loss;
    r.test_loss = ev.test_loss;
    r.train_acc = ev.train_acc;
    r.test_acc = ev.test_acc;
    r.lr_effective = rep.lr_effective;
    r.grad_norm = rep.grad_norm;
    r.grad_evals_cum = grad_evals;
    csv << format_metrics_row(r) << '\n' << std::flush;
    summary.records.push_back(r);

    if (!have_best || r.test_acc > summary.best_test_acc) {
      summary.best_test_acc = r.test_acc;
      summary.best_step = r.step;
      have_best = true;
    }
    summary.final_train_loss = r.train_loss;
    summary.final_test_loss = r.test_loss;
    summary.final_train_acc = r.train_acc;
    summary.final_test_acc = r.test_acc;
  }
}

}  // namespace detail

/// Executes one training run: writes <out_dir>/metrics.csv and
/// <out_dir>/config.txt. Divergence ends the run early with summary.diverged
/// set; rows written so far are kept.
inline RunSummary run(const RunConfig& c) {
  RunSummary summary;
  std::filesystem::create_directories(c.out_dir);
  {
    std::ofstream snap(c.out_dir / "config.txt");
    snap << render_settings(to_settings(c));
  }
  summary.csv_path = c.out_dir / "metrics.csv";
  std::ofstream csv(summary.csv_path);
  if (!csv) throw ConfigError("cannot write " + summary.csv_path.string());
  write_metrics_header(csv);

  if (c.dataset == DatasetKind::synthetic && c.synthetic.kind == SyntheticKind::quadratic) {
    QuadraticWorkload w(c);
    detail::train_loop(c, w, csv, summary);
  } else {
    auto [train, test] = load_splits(c);
    auto w = std::make_unique<MlpWorkload>(c, std::move(train), std::move(test));
    detail::train_loop(c, *w, csv, summary);
  }
  return summary;
}

inline RunSummary run(const Settings& settings) { return run(config_from_settings(settings)); }

}  // namespace rkopt::harness
