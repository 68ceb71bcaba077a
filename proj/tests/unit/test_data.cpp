#include "rkopt/data.hpp"

#include <gtest/gtest.h>
#include <zlib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

using namespace rkopt;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

std::vector<unsigned char> image_file(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                      const std::vector<unsigned char>& pixels, std::uint32_t magic = 0x00000803) {
  std::vector<unsigned char> out;
  for (auto v : {magic, n, rows, cols}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<unsigned char> label_file(std::uint32_t n, const std::vector<unsigned char>& labels,
                                      std::uint32_t magic = 0x00000801) {
  std::vector<unsigned char> out;
  for (auto v : {magic, n}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("rkopt_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

  fs::path write(const std::string& name, const std::vector<unsigned char>& bytes, bool compress = true) const {
    const auto p = path_ / name;
    if (compress && p.extension() == ".gz") {
      gzFile f = gzopen(p.string().c_str(), "wb");
      gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
      gzclose(f);
    } else {
      std::ofstream out(p, std::ios::binary);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    return p;
  }

 private:
  fs::path path_;
};

ParseErrorKind kind_of(const fs::path& img, const fs::path& lbl) {
  try {
    load_idx(img, lbl);
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ParseError";
  return ParseErrorKind::io;
}

DatasetSplit labelled(const std::vector<std::uint8_t>& labels) {
  DatasetSplit s;
  s.images.resize(static_cast<Eigen::Index>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) s.images(static_cast<Eigen::Index>(i), 0) = static_cast<float>(i);
  s.labels = labels;
  return s;
}

}  // namespace

TEST(Idx, LoadsRawAndGzipWithPixelScaling) {
  TempDir dir;
  const auto img = image_file(1, 2, 2, {0, 255, 128, 64});
  const auto lbl = label_file(1, {7});
  for (const std::string suffix : {"", ".gz"}) {
    const auto s = load_idx(dir.write("img" + suffix, img), dir.write("lbl" + suffix, lbl));
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s.rows, 2);
    EXPECT_EQ(s.cols, 2);
    EXPECT_EQ(s.labels[0], 7);
    EXPECT_EQ(s.images(0, 0), 0.0f);
    EXPECT_EQ(s.images(0, 1), 1.0f);
    EXPECT_NEAR(s.images(0, 2), 0.50196, 1e-5);
    EXPECT_NEAR(s.images(0, 3), 0.25098, 1e-5);
  }
}

TEST(Idx, MultipleImagesAreRowMajor) {
  TempDir dir;
  const auto s = load_idx(dir.write("i", image_file(2, 1, 3, {0, 51, 102, 153, 204, 255})),
                          dir.write("l", label_file(2, {1, 2})));
  ASSERT_EQ(s.images.rows(), 2);
  ASSERT_EQ(s.images.cols(), 3);
  EXPECT_FLOAT_EQ(s.images(1, 0), 0.6f);
  EXPECT_FLOAT_EQ(s.images(1, 2), 1.0f);
  EXPECT_EQ(s.labels, (std::vector<std::uint8_t>{1, 2}));
}

TEST(Idx, DistinctErrorKinds) {
  TempDir dir;
  const auto good_img = dir.write("img", image_file(2, 2, 2, std::vector<unsigned char>(8, 1)));
  const auto good_lbl = dir.write("lbl", label_file(2, {0, 1}));
  EXPECT_EQ(kind_of(dir.write("bad_img", image_file(2, 2, 2, std::vector<unsigned char>(8, 1), 0x00000801)), good_lbl),
            ParseErrorKind::bad_magic);
  EXPECT_EQ(kind_of(good_img, dir.write("bad_lbl", label_file(2, {0, 1}, 0x00000803))), ParseErrorKind::bad_magic);
  EXPECT_EQ(kind_of(dir.write("short_img", image_file(2, 2, 2, std::vector<unsigned char>(5, 1))), good_lbl),
            ParseErrorKind::truncated);
  EXPECT_EQ(kind_of(dir.write("short_hdr", {0, 0, 8, 3, 0}), good_lbl), ParseErrorKind::truncated);
  EXPECT_EQ(kind_of(good_img, dir.write("short_lbl", label_file(3, {0, 1}))), ParseErrorKind::truncated);
  EXPECT_EQ(kind_of(good_img, dir.write("three", label_file(3, {0, 1, 2}))), ParseErrorKind::count_mismatch);
  EXPECT_EQ(kind_of(dir.path() / "missing", good_lbl), ParseErrorKind::io);
  // A corrupt gzip stream is reported rather than silently truncated.
  EXPECT_THROW(load_idx(dir.write("junk.gz", {0x1f, 0x8b, 8, 0, 1, 2, 3}, false), good_lbl), ParseError);
  auto cut = image_file(2, 2, 2, std::vector<unsigned char>(8, 1));
  cut.resize(10);
  EXPECT_EQ(kind_of(dir.write("cut.gz", cut), good_lbl), ParseErrorKind::truncated);
}

TEST(Subset, FullSizeIsIdentity) {
  const auto s = labelled({0, 1, 2, 0, 1, 2});
  const auto t = subset(s, 6, 3);
  EXPECT_EQ(t.labels, s.labels);
  EXPECT_EQ(t.images, s.images);
}

TEST(Subset, StratifiedAndDeterministic) {
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 10000; ++i) labels.push_back(static_cast<std::uint8_t>(i % 10));
  const auto s = labelled(labels);
  const auto a = subset(s, 1000, 42);
  const auto b = subset(s, 1000, 42);
  const auto c = subset(s, 1000, 43);
  EXPECT_EQ(a.images, b.images);
  EXPECT_NE(a.images, c.images);
  std::vector<int> counts(10, 0);
  for (auto l : a.labels) ++counts[l];
  for (int k : counts) EXPECT_EQ(k, 100);
  // Rows are drawn without replacement.
  std::set<float> ids(a.images.data(), a.images.data() + a.images.size());
  EXPECT_EQ(ids.size(), 1000u);
}

TEST(Subset, UnevenClassesGetProportionalShares) {
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(0);
  for (int i = 0; i < 30; ++i) labels.push_back(1);
  for (int i = 0; i < 10; ++i) labels.push_back(2);
  const auto a = subset(labelled(labels), 10, 1);
  std::vector<int> counts(3, 0);
  for (auto l : a.labels) ++counts[l];
  EXPECT_EQ(counts, (std::vector<int>{6, 3, 1}));
}

TEST(Subset, RejectsBadSizes) {
  const auto s = labelled({0, 1});
  EXPECT_THROW(subset(s, 3, 0), InvalidArgument);
  EXPECT_THROW(subset(s, 0, 0), InvalidArgument);
}

TEST(Batches, FullBatchKeepsOrder) {
  const auto b = epoch_batches(5, BatchPlan{5, 9, false}, 0);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(epoch_batches(5, BatchPlan{8, 9, false}, 3)[0].size(), 5u);
}

TEST(Batches, DropLastAndRemainder) {
  EXPECT_EQ(epoch_batches(10, BatchPlan{3, 0, true}, 0).size(), 3u);
  const auto keep = epoch_batches(10, BatchPlan{3, 0, false}, 0);
  ASSERT_EQ(keep.size(), 4u);
  EXPECT_EQ(keep.back().size(), 1u);
  EXPECT_THROW(epoch_batches(10, BatchPlan{0, 0, false}, 0), InvalidArgument);
}

TEST(Batches, EpochsCoverEveryExampleOnceAndAreReproducible) {
  const BatchPlan plan{7, 5, false};
  const auto e0 = epoch_batches(50, plan, 0);
  const auto e1 = epoch_batches(50, plan, 1);
  EXPECT_EQ(e0, epoch_batches(50, plan, 0));
  EXPECT_NE(e0, e1);
  for (const auto& epoch : {e0, e1}) {
    std::vector<int> seen(50, 0);
    for (const auto& batch : epoch) {
      for (auto i : batch) ++seen[i];
    }
    for (int k : seen) EXPECT_EQ(k, 1);
  }
}

TEST(Batches, StreamCrossesEpochs) {
  const auto s = labelled({0, 1, 2, 3, 4, 5, 6});
  BatchStream stream(s, BatchPlan{3, 2, true});
  std::vector<std::vector<std::size_t>> got;
  for (int i = 0; i < 4; ++i) got.push_back(stream.next_indices());
  EXPECT_EQ(stream.epoch(), 1u);
  const auto e0 = epoch_batches(7, BatchPlan{3, 2, true}, 0);
  const auto e1 = epoch_batches(7, BatchPlan{3, 2, true}, 1);
  EXPECT_EQ(got[0], e0[0]);
  EXPECT_EQ(got[1], e0[1]);
  EXPECT_EQ(got[2], e1[0]);
  const auto b = BatchStream(s, BatchPlan{3, 2, true}).next<double>();
  ASSERT_EQ(b.inputs.rows(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(b.inputs(i, 0), static_cast<double>(e0[0][i]));
  EXPECT_THROW(BatchStream(s, BatchPlan{8, 0, true}), InvalidArgument);
}

TEST(Blobs, ShapeAndDeterminism) {
  const auto a = make_blobs(30, 4, 3, 1);
  EXPECT_EQ(a.images.rows(), 30);
  EXPECT_EQ(a.images.cols(), 4);
  EXPECT_EQ(a.images, make_blobs(30, 4, 3, 1).images);
  EXPECT_NE(a.images, make_blobs(30, 4, 3, 2).images);
  EXPECT_TRUE((a.images.array() >= 0.0f).all() && (a.images.array() <= 1.0f).all());
  EXPECT_THROW(make_blobs(10, 4, 1, 0), InvalidArgument);
}

TEST(Idx, BundledSubsetIsBalanced) {
  const fs::path dir = fs::path(RKOPT_SOURCE_DIR) / "data" / "mnist-5k";
  const auto train = load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz");
  const auto test = load_idx(dir / "t10k-images-idx3-ubyte.gz", dir / "t10k-labels-idx1-ubyte.gz");
  for (const auto* s : {&train, &test}) {
    EXPECT_EQ(s->size(), 2500u);
    EXPECT_EQ(s->images.cols(), 784);
    std::vector<int> counts(10, 0);
    for (auto l : s->labels) ++counts[l];
    for (int k : counts) EXPECT_EQ(k, 250);
  }
}

TEST(Idx, FullMnistTestSet) {
  const char* env = std::getenv("RKOPT_MNIST_DIR");
  if (env == nullptr) GTEST_SKIP() << "set RKOPT_MNIST_DIR to a directory holding the full MNIST files";
  const fs::path dir(env);
  const auto pick = [&](const std::string& stem) {
    return fs::exists(dir / (stem + ".gz")) ? dir / (stem + ".gz") : dir / stem;
  };
  const auto test = load_idx(pick("t10k-images-idx3-ubyte"), pick("t10k-labels-idx1-ubyte"));
  ASSERT_EQ(test.size(), 10000u);
  std::vector<int> counts(10, 0);
  for (auto l : test.labels) ++counts[l];
  EXPECT_EQ(counts, (std::vector<int>{980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009}));
}
