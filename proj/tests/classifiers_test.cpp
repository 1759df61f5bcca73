#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rae/classifiers.hpp"

using namespace rae;

TEST(Knn, MatchesBruteForce) {
  for (std::uint64_t seed : {1, 2, 3}) EXPECT_EQ(oracle::knn_agreement(seed * 10), 1.0);
}

TEST(Knn, TiesGoToSmallestLabel) {
  // Two neighbours, one of each label, equidistant.
  const Matrix x = Matrix::from_rows({{-1.0}, {1.0}});
  const std::vector<int> y{2, 1};
  EXPECT_EQ(fit(KnnParams{2}, x, y, 3).predict(Matrix::from_rows({{0.0}})), (std::vector<int>{1}));
}

TEST(Knn, SinglePointAndSelfRecall) {
  const FittedClassifier one = fit(KnnParams{5}, Matrix::from_rows({{1.0, 2.0}}), std::vector<int>{3}, 4);
  EXPECT_EQ(one.predict(oracle::normal_points(10, 2, 4)), std::vector<int>(10, 3));
  const Matrix x = oracle::normal_points(50, 3, 5);
  const std::vector<int> y = oracle::random_labels(50, 4, 6);
  EXPECT_EQ(fit(KnnParams{1}, x, y, 4).predict(x), y);
}

TEST(Tree, SolvesXorAtDepthTwo) {
  EXPECT_EQ(oracle::tree_xor_accuracy(), 1.0);
  const oracle::Labeled d = oracle::xor_corners();
  const FittedClassifier f = fit(TreeParams{2, 2}, d.x, d.y);
  const auto& m = std::get<TreeModel>(f.state());
  EXPECT_LE(m.depth, 2u);
}

TEST(Tree, MemorizesWithoutDepthLimit) {
  const Matrix x = oracle::normal_points(100, 3, 7);
  const std::vector<int> y = oracle::random_labels(100, 4, 8);
  EXPECT_EQ(fit(TreeParams{100, 1}, x, y, 4).predict(x), y);
}

TEST(Tree, RespectsLimits) {
  const Matrix x = oracle::normal_points(200, 3, 9);
  const std::vector<int> y = oracle::random_labels(200, 3, 10);
  const FittedClassifier f = fit(TreeParams{3, 10}, x, y, 3);
  const auto& m = std::get<TreeModel>(f.state());
  EXPECT_LE(m.depth, 3u);
  // Count training rows reaching each leaf.
  std::vector<std::size_t> reach(m.nodes.size(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    int node = 0;
    while (m.nodes[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& n = m.nodes[static_cast<std::size_t>(node)];
      node = x(i, static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right;
    }
    ++reach[static_cast<std::size_t>(node)];
  }
  for (std::size_t k = 0; k < m.nodes.size(); ++k) {
    if (m.nodes[k].feature < 0) EXPECT_GE(reach[k], 10u);
  }
}

TEST(Tree, SingleClassIsLeaf) {
  const FittedClassifier f = fit(TreeParams{}, oracle::normal_points(10, 2, 11), std::vector<int>(10, 1), 3);
  EXPECT_EQ(std::get<TreeModel>(f.state()).nodes.size(), 1u);
  EXPECT_EQ(f.predict(oracle::normal_points(5, 2, 12)), std::vector<int>(5, 1));
}

TEST(Lda, SeparableClusters) {
  for (std::uint64_t seed : {13, 14}) EXPECT_GE(oracle::separable_accuracy(LdaParams{}, seed), 0.99);
}

TEST(Lda, ShiftInvariant) {
  const Matrix x = oracle::normal_points(150, 4, 15);
  const std::vector<int> y = oracle::random_labels(150, 3, 16);
  const Matrix q = oracle::normal_points(80, 4, 17);
  Matrix xs = x, qs = q;
  for (Matrix* m : {&xs, &qs}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      (*m)(i, 1) += 7.5;
      (*m)(i, 3) -= 2.0;
    }
  }
  EXPECT_EQ(fit(LdaParams{}, x, y, 3).predict(q), fit(LdaParams{}, xs, y, 3).predict(qs));
}

TEST(Lda, Errors) {
  EXPECT_THROW(fit(LdaParams{}, oracle::normal_points(10, 2, 18), std::vector<int>(10, 0)), ArgumentError);
  Matrix zero(10, 2, 0.0);
  std::vector<int> y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  EXPECT_THROW(fit(LdaParams{0.0}, zero, y), NumericError);
}

TEST(LogReg, SeparableClusters) {
  for (std::uint64_t seed : {19, 20}) EXPECT_GE(oracle::separable_accuracy(LogRegParams{}, seed), 0.99);
}

TEST(LogReg, LossNonIncreasing) {
  const Matrix x = oracle::normal_points(200, 4, 21);
  const std::vector<int> y = oracle::random_labels(200, 4, 22);
  const FittedClassifier f = fit(LogRegParams{}, x, y, 4);
  const auto& m = std::get<LogRegModel>(f.state());
  ASSERT_EQ(m.loss_history.size(), 501u);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) {
    EXPECT_LE(m.loss_history[i], m.loss_history[i - 1] + 1e-12) << i;
  }
}

TEST(Mlp, LearnsSeparableClusters) {
  MlpParams p;
  p.epochs = 300;
  EXPECT_GE(oracle::separable_accuracy(p, 23), 0.99);
}

TEST(AllKinds, DeterministicAndInRange) {
  for (const ClassifierKind& k :
       {ClassifierKind{MlpParams{}}, ClassifierKind{KnnParams{}}, ClassifierKind{TreeParams{}},
        ClassifierKind{LdaParams{}}, ClassifierKind{LogRegParams{}}}) {
    EXPECT_TRUE(oracle::deterministic(k, 24)) << kind_tag(k);
    const FittedClassifier f = fit(k, oracle::normal_points(60, 3, 25), oracle::random_labels(60, 3, 26), 3);
    for (int v : f.predict(oracle::normal_points(40, 3, 27))) {
      EXPECT_GE(v, 0);
      EXPECT_LT(v, 3);
    }
    EXPECT_THROW(f.predict(oracle::normal_points(4, 2, 28)), ArgumentError);
  }
}

TEST(AllKinds, ParseAndValidate) {
  for (const char* tag : {"mlp", "knn", "tree", "lda", "logreg"}) EXPECT_EQ(kind_tag(parse_classifier_kind(tag)), tag);
  EXPECT_THROW(parse_classifier_kind("svm"), ConfigError);
  EXPECT_THROW(validate(KnnParams{0}), ConfigError);
  EXPECT_THROW(validate(TreeParams{0, 1}), ConfigError);
  EXPECT_THROW(validate(LogRegParams{1e-4, 0, 0.1}), ConfigError);
  EXPECT_THROW(fit(KnnParams{}, Matrix(0, 2), std::vector<int>{}), ArgumentError);
}
