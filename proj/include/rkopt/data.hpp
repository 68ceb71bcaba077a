#pragma once

#include "rkopt/error.hpp"
#include "rkopt/types.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rkopt {

/// Images flattened row-major into [0, 1], one row per example.
struct DatasetSplit {
  MatrixRM<float> images;
  std::vector<std::uint8_t> labels;
  std::string name;
  int rows = 0;
  int cols = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

/// Whole-file read; files ending in .gz are inflated.
inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  if (path.extension() == ".gz") {
    gzFile gz = gzopen(path.string().c_str(), "rb");
    if (gz == nullptr) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
    std::array<unsigned char, 1 << 16> chunk{};
    for (;;) {
      const int n = gzread(gz, chunk.data(), static_cast<unsigned>(chunk.size()));
      if (n < 0) {
        int errnum = 0;
        const std::string msg = gzerror(gz, &errnum);
        gzclose(gz);
        throw ParseError(ParseErrorKind::truncated, "corrupt gzip stream in " + path.string() + ": " + msg);
      }
      if (n == 0) break;
      bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(gz);
    return bytes;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace detail

/// Parses an IDX image/label pair (big-endian headers, unsigned byte payload).
/// Pixels are scaled by 1/255.
inline DatasetSplit load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                             std::string name = {}) {
  const auto img = detail::read_file_bytes(images_path);
  const auto lbl = detail::read_file_bytes(labels_path);

  if (img.size() < 16) throw ParseError(ParseErrorKind::truncated, images_path.string() + ": header truncated");
  if (detail::read_be32(img, 0) != kIdxImagesMagic) {
    throw ParseError(ParseErrorKind::bad_magic, images_path.string() + ": not an IDX image file");
  }
  if (lbl.size() < 8) throw ParseError(ParseErrorKind::truncated, labels_path.string() + ": header truncated");
  if (detail::read_be32(lbl, 0) != kIdxLabelsMagic) {
    throw ParseError(ParseErrorKind::bad_magic, labels_path.string() + ": not an IDX label file");
  }

  const std::uint64_t n_img = detail::read_be32(img, 4);
  const std::uint64_t rows = detail::read_be32(img, 8);
  const std::uint64_t cols = detail::read_be32(img, 12);
  const std::uint64_t n_lbl = detail::read_be32(lbl, 4);
  const std::uint64_t pixels = rows * cols;

  if (img.size() - 16 < n_img * pixels) {
    throw ParseError(ParseErrorKind::truncated, images_path.string() + ": payload shorter than header count");
  }
  if (lbl.size() - 8 < n_lbl) {
    throw ParseError(ParseErrorKind::truncated, labels_path.string() + ": payload shorter than header count");
  }
  if (n_img != n_lbl) {
    throw ParseError(ParseErrorKind::count_mismatch, "image count " + std::to_string(n_img) +
                                                         " does not match label count " + std::to_string(n_lbl));
  }

  DatasetSplit split;
  split.name = name.empty() ? images_path.filename().string() : std::move(name);
  split.rows = static_cast<int>(rows);
  split.cols = static_cast<int>(cols);
  split.images.resize(static_cast<Eigen::Index>(n_img), static_cast<Eigen::Index>(pixels));
  for (std::uint64_t i = 0; i < n_img; ++i) {
    for (std::uint64_t p = 0; p < pixels; ++p) {
      split.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          static_cast<float>(img[16 + i * pixels + p]) / 255.0f;
    }
  }
  split.labels.assign(lbl.begin() + 8, lbl.begin() + 8 + static_cast<std::ptrdiff_t>(n_lbl));
  return split;
}

inline DatasetSplit take_rows(const DatasetSplit& split, const std::vector<std::size_t>& idx) {
  DatasetSplit out;
  out.name = split.name;
  out.rows = split.rows;
  out.cols = split.cols;
  out.images.resize(static_cast<Eigen::Index>(idx.size()), split.images.cols());
  out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.images.row(static_cast<Eigen::Index>(i)) = split.images.row(static_cast<Eigen::Index>(idx[i]));
    out.labels[i] = split.labels[idx[i]];
  }
  return out;
}

/// Deterministic stratified sample of n examples. Each class receives its
/// proportional share rounded down; leftover slots go to the largest
/// remainders, ties to the lower class index. Rows keep their original order.
inline DatasetSplit subset(const DatasetSplit& split, std::size_t n, std::uint64_t seed) {
  const std::size_t total = split.size();
  if (n == 0 || n > total) {
    throw InvalidArgument("subset size " + std::to_string(n) + " outside [1, " + std::to_string(total) + "]");
  }
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t c = split.labels[i];
    if (c >= by_class.size()) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  const std::size_t k = by_class.size();
  std::vector<std::size_t> quota(k);
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (numerator remainder, class)
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t num = n * by_class[c].size();
    quota[c] = num / total;
    assigned += quota[c];
    remainders.emplace_back(num % total, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r) {
    const std::size_t c = remainders[r % k].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t c = 0; c < k; ++c) {
    auto pool = by_class[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  return take_rows(split, chosen);
}

struct BatchPlan {
  std::size_t batch_size = 16;
  std::uint64_t shuffle_seed = 0;
  bool drop_last = false;
};

template <std::floating_point T = float>
struct Batch {
  MatrixRM<T> inputs;
  std::vector<std::uint8_t> labels;
};

/// Index lists for one epoch. Full-batch plans (batch_size >= n) keep the
/// natural order; otherwise the epoch is shuffled from shuffle_seed + epoch.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const BatchPlan& plan, std::uint64_t epoch) {
  if (plan.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (plan.batch_size < n) {
    std::mt19937_64 rng(plan.shuffle_seed + epoch);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += plan.batch_size) {
    const std::size_t end = std::min(n, start + plan.batch_size);
    if (end - start < plan.batch_size && plan.drop_last) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

template <std::floating_point T = float>
Batch<T> gather(const DatasetSplit& split, const std::vector<std::size_t>& idx) {
  Batch<T> b;
  b.inputs.resize(static_cast<Eigen::Index>(idx.size()), split.images.cols());
  b.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    b.inputs.row(static_cast<Eigen::Index>(i)) = split.images.row(static_cast<Eigen::Index>(idx[i])).template cast<T>();
    b.labels[i] = split.labels[idx[i]];
  }
  return b;
}

/// Endless batch iterator crossing epoch boundaries.
class BatchStream {
 public:
  BatchStream(const DatasetSplit& split, BatchPlan plan) : split_(&split), plan_(plan) {
    if (split.size() == 0) throw InvalidArgument("cannot batch an empty split");
    if (plan_.drop_last && plan_.batch_size > split.size()) {
      throw InvalidArgument("drop_last with batch_size > n yields no batches");
    }
    current_ = epoch_batches(split_->size(), plan_, epoch_);
  }

  /// Index list of the next batch.
  const std::vector<std::size_t>& next_indices() {
    if (pos_ == current_.size()) {
      ++epoch_;
      current_ = epoch_batches(split_->size(), plan_, epoch_);
      pos_ = 0;
    }
    return current_[pos_++];
  }

  template <std::floating_point T = float>
  Batch<T> next() {
    return gather<T>(*split_, next_indices());
  }

  std::uint64_t epoch() const noexcept { return epoch_; }

 private:
  const DatasetSplit* split_;
  BatchPlan plan_;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::vector<std::size_t>> current_;
};

/// Gaussian clusters clipped to [0, 1]; a stand-in dataset for tests and
/// quick runs that need no files.
inline DatasetSplit make_blobs(std::size_t n, int dim, int classes, std::uint64_t seed, double spread = 0.08,
                               std::uint64_t center_seed = 12345) {
  if (n == 0 || dim <= 0 || classes <= 1 || classes > 256) throw InvalidArgument("invalid blob dataset shape");
  std::mt19937_64 center_rng(center_seed);
  std::uniform_real_distribution<double> unit(0.2, 0.8);
  MatrixRM<double> centers(classes, dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = unit(center_rng);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  DatasetSplit s;
  s.name = "blobs";
  s.rows = 1;
  s.cols = dim;
  s.images.resize(static_cast<Eigen::Index>(n), dim);
  s.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
    s.labels[i] = static_cast<std::uint8_t>(c);
    for (int d = 0; d < dim; ++d) {
      const double v = std::clamp(centers(c, d) + noise(rng), 0.0, 1.0);
      s.images(static_cast<Eigen::Index>(i), d) = static_cast<float>(v);
    }
  }
  return s;
}

}  // namespace rkopt
