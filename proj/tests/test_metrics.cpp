#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "m2s/metrics.hpp"
#include "m2s/random.hpp"

using namespace m2s;

namespace {

std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return v;
}

}  // namespace

TEST(Confusion, PerfectPredictionIsDiagonal) {
  const std::vector<int> gt{1, 2, 2, 3, 0, 1};
  const auto cm = accumulate_confusion(gt, gt, 4);
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t p = 0; p < 4; ++p)
      if (g != p) {
        EXPECT_EQ(cm.at(g, p), 0u);
      }
  EXPECT_EQ(cm.at(0, 0), 0u);  // ignored
  EXPECT_EQ(cm.at(2, 2), 2u);
  const auto r = miou(cm);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_FALSE(r.per_class[0].has_value());
}

TEST(Confusion, AllIgnoredIsZero) {
  const std::vector<int> gt{0, 0, 0}, pred{1, 2, 0};
  const auto cm = accumulate_confusion(pred, gt, 3);
  EXPECT_EQ(cm.total(), 0u);
  try {
    miou(cm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoValidClasses);
  }
}

TEST(Confusion, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = random_labels(rng, 300, 6), pred = random_labels(rng, 300, 6);
    const auto cm = accumulate_confusion(pred, gt, 6, {0, 3});
    for (int g = 0; g < 6; ++g)
      for (int p = 0; p < 6; ++p) {
        std::uint64_t count = 0;
        if (g != 0 && g != 3)
          for (std::size_t i = 0; i < gt.size(); ++i) count += gt[i] == g && pred[i] == p;
        EXPECT_EQ(cm.at(static_cast<std::size_t>(g), static_cast<std::size_t>(p)), count);
      }
  }
}

TEST(Confusion, RangeErrors) {
  const std::vector<int> gt{1, 5}, pred{1, 1};
  EXPECT_THROW(accumulate_confusion(pred, gt, 3), Error);
  const std::vector<int> neg{-1};
  EXPECT_THROW(accumulate_confusion(neg, neg, 3), Error);
  EXPECT_THROW(ConfusionMatrix(3, {7}), Error);
  const std::vector<int> a{1}, b{1, 2};
  EXPECT_THROW(accumulate_confusion(a, b, 3), Error);
}

TEST(Miou, HandExample) {
  const std::vector<int> gt{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const auto r = miou(accumulate_confusion(pred, gt, 2, {}));
  EXPECT_EQ(*r.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.mean, 7.0 / 12.0);
}

TEST(Miou, BoundsAndExclusion) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_labels(rng, 50, 8), pred = random_labels(rng, 50, 5);
    const auto r = miou(accumulate_confusion(pred, gt, 8));
    double lo = 1.0, hi = 0.0;
    for (const auto& v : r.per_class) {
      if (!v) continue;
      EXPECT_GE(*v, 0.0);
      EXPECT_LE(*v, 1.0);
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
    EXPECT_GE(r.mean, lo - 1e-15);
    EXPECT_LE(r.mean, hi + 1e-15);
  }
  // A class absent from both prediction and ground truth is left out.
  const std::vector<int> gt{1, 1, 2}, pred{1, 2, 2};
  const auto r = miou(accumulate_confusion(pred, gt, 4));
  EXPECT_FALSE(r.per_class[3].has_value());
  EXPECT_DOUBLE_EQ(r.mean, 0.5);
}

TEST(Miou, ClassPermutationInvariant) {
  Rng rng(3);
  const std::vector<int> perm{0, 3, 1, 4, 2};
  for (int trial = 0; trial < 50; ++trial) {
    auto gt = random_labels(rng, 80, 5), pred = random_labels(rng, 80, 5);
    const auto a = miou(accumulate_confusion(pred, gt, 5));
    for (auto& x : gt) x = perm[static_cast<std::size_t>(x)];
    for (auto& x : pred) x = perm[static_cast<std::size_t>(x)];
    const auto b = miou(accumulate_confusion(pred, gt, 5));
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(a.per_class[c], b.per_class[static_cast<std::size_t>(perm[c])]);
    EXPECT_NEAR(a.mean, b.mean, 1e-15);
  }
}

TEST(Confusion, OrderIndependentAndShardMerge) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto gt = random_labels(rng, 200, 6), pred = random_labels(rng, 200, 6);
    const auto whole = accumulate_confusion(pred, gt, 6);
    std::vector<std::size_t> order(gt.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::vector<int> g2, p2;
    for (auto i : order) {
      g2.push_back(gt[i]);
      p2.push_back(pred[i]);
    }
    EXPECT_EQ(accumulate_confusion(p2, g2, 6), whole);

    ConfusionMatrix merged(6);
    std::size_t start = 0;
    while (start < gt.size()) {
      const std::size_t len = std::min<std::size_t>(gt.size() - start, rng.below(60));
      merged.merge(accumulate_confusion(std::span(pred).subspan(start, len), std::span(gt).subspan(start, len), 6));
      start += len;
    }
    EXPECT_EQ(merged, whole);
  }
  EXPECT_THROW(ConfusionMatrix(3).merge(ConfusionMatrix(4)), Error);
}

TEST(IouTable, PerClassColumnsThenMean) {
  const std::vector<int> gt{1, 1, 2, 2, 3}, pred{1, 2, 2, 2, 3};
  const auto r = miou(accumulate_confusion(pred, gt, 4));
  const std::vector<std::string> names{"unlabeled", "car", "motorcyclist", "road"};
  const auto table = format_iou_table(r, names, "ours");
  std::istringstream in(table);
  std::string header, row, extra;
  ASSERT_TRUE(std::getline(in, header));
  ASSERT_TRUE(std::getline(in, row));
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header, "Methods |      car | motorcyclist |     road |     mIoU");
  EXPECT_EQ(row, "ours    |     50.0 |         66.7 |    100.0 |     72.2");
  EXPECT_EQ(header.size(), row.size());
}
