#include "lgn/eval.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace lgn;

namespace {

// Probability that a random abnormal frame outscores a random normal one; ties count half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!l[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST(Roc, PerfectAndInvertedScores) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  EXPECT_DOUBLE_EQ(eval::roc_auc(s, std::vector<int>{0, 0, 1, 1}).auc, 1.0);
  EXPECT_DOUBLE_EQ(eval::roc_auc(s, std::vector<int>{1, 1, 0, 0}).auc, 0.0);
  EXPECT_DOUBLE_EQ(eval::roc_auc(std::vector<double>(4, 0.3), std::vector<int>{1, 0, 1, 0}).auc, 0.5);
}

TEST(Roc, CurveIsMonotoneFromOriginToOne) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(50);
  std::vector<int> l(50);
  for (int i = 0; i < 50; ++i) {
    l[i] = i % 3 == 0;
    s[i] = std::round(u(rng) * 10) / 10 + 0.2 * l[i];
  }
  const auto roc = eval::roc_auc(s, l);
  EXPECT_TRUE(std::isinf(roc.thresholds.front()));
  EXPECT_EQ(roc.fpr.front(), 0.0);
  EXPECT_EQ(roc.tpr.front(), 0.0);
  EXPECT_EQ(roc.fpr.back(), 1.0);
  EXPECT_EQ(roc.tpr.back(), 1.0);
  for (std::size_t i = 1; i < roc.fpr.size(); ++i) {
    EXPECT_GE(roc.fpr[i], roc.fpr[i - 1]);
    EXPECT_GE(roc.tpr[i], roc.tpr[i - 1]);
    EXPECT_LT(roc.thresholds[i], roc.thresholds[i - 1]);
  }
}

TEST(Roc, TrapezoidEqualsPairwiseOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + int(rng() % 80);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (int i = 0; i < n; ++i) {
      l[i] = u(rng) < 0.3;
      s[i] = std::round(u(rng) * 20) / 20 + 0.1 * l[i];  // coarse grid forces ties
    }
    l[0] = 0;
    l[1] = 1;
    EXPECT_NEAR(eval::roc_auc(s, l).auc, pairwise_auc(s, l), 1e-9) << "trial " << trial;
  }
}

TEST(Roc, SingleClassIsAnError) {
  EXPECT_THROW(eval::roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), UserError);
  EXPECT_THROW(eval::roc_auc(std::vector<double>{0.1}, std::vector<int>{0, 1}), UserError);
}

TEST(ErrorMap, NormalizedPerFrame) {
  Tensor3<double> pred(Shape{2, 2, 2}), target(Shape{2, 2, 2});
  pred(0, 0, 1) = 3.0;
  pred(1, 0, 1) = 4.0;
  pred(0, 1, 0) = 1.0;
  const auto m = eval::error_map(pred, target);
  ASSERT_EQ(m.rows(), 2);
  EXPECT_DOUBLE_EQ(m(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(m(1, 0), 0.2);
  EXPECT_DOUBLE_EQ(m(0, 0), 0.0);
  EXPECT_EQ(eval::error_map(target, target).cwiseAbs().maxCoeff(), 0.0);
}

TEST(RocCsv, WritesHeaderAndRows) {
  const auto roc = eval::roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1});
  const auto dir = lgn::testing::scratch_dir("roc_csv");
  eval::write_roc_csv(roc, dir / "roc.csv");
  std::ifstream in(dir / "roc.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "threshold,fpr,tpr");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, int(roc.fpr.size()));
}
