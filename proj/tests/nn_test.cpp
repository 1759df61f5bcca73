#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rae/grad_check.hpp"
#include "rae/matrix.hpp"
#include "rae/nn.hpp"
#include "rae/optimizer.hpp"

using namespace rae;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

std::vector<int> random_targets(std::size_t n, int classes, Rng& rng) {
  std::uniform_int_distribution<int> u(0, classes - 1);
  std::vector<int> t(n);
  for (int& v : t) v = u(rng);
  return t;
}

}  // namespace

TEST(Dense, IdentityLayerPassesInputThrough) {
  DenseLayer layer(Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), {0, 0, 0}, Activation::identity);
  const Matrix out = layer.forward(Matrix::from_rows({{1, 2, 3}}));
  EXPECT_EQ(out, Matrix::from_rows({{1, 2, 3}}));
}

TEST(Dense, RectifierClampsNegativePreActivations) {
  DenseLayer layer(Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), {0, 0, 0}, Activation::rectifier);
  EXPECT_EQ(layer.forward(Matrix::from_rows({{-1, 0, 2}})), Matrix::from_rows({{0, 0, 2}}));
}

TEST(Dense, RandomLayerMatchesDirectProduct) {
  Rng rng(11);
  DenseLayer layer = DenseLayer::glorot(3, 4, Activation::identity, rng);
  layer.bias() = {0.1, -0.2, 0.3, 0.0};
  const Matrix x = random_matrix(5, 3, rng);
  const Matrix y = layer.forward(x);
  ASSERT_EQ(y.rows(), 5u);
  ASSERT_EQ(y.cols(), 4u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t o = 0; o < 4; ++o) {
      double expect = layer.bias()[o];
      for (std::size_t k = 0; k < 3; ++k) expect += x(i, k) * layer.weights()(o, k);
      EXPECT_NEAR(y(i, o), expect, 1e-14);
      EXPECT_TRUE(std::isfinite(y(i, o)));
    }
  }
}

TEST(Dense, ShapeMismatchIsDimensionError) {
  Rng rng(1);
  DenseLayer layer = DenseLayer::glorot(3, 2, Activation::identity, rng);
  EXPECT_THROW(layer.forward(Matrix(1, 4)), DimensionError);
}

TEST(Dense, GlorotInitIsBounded) {
  Rng rng(2);
  const DenseLayer layer = DenseLayer::glorot(7, 15, Activation::rectifier, rng);
  const double limit = std::sqrt(6.0 / 22.0);
  for (double w : layer.weights().values()) EXPECT_LE(std::abs(w), limit);
  for (double b : layer.bias()) EXPECT_EQ(b, 0.0);
}

TEST(Dense, BackwardWithoutForwardIsStateError) {
  Rng rng(3);
  const DenseLayer layer = DenseLayer::glorot(2, 2, Activation::identity, rng);
  EXPECT_THROW(layer.backward(Matrix(1, 2)), StateError);
}

TEST(Dense, ScalarSquareGradient) {
  // y = w * 1, loss = y^2, d loss / d w = 2w = 6 at w = 3.
  DenseLayer layer(Matrix(1, 1, 3.0), {0.0}, Activation::identity);
  const Matrix x(1, 1, 1.0);
  const Matrix y = layer.forward(x);
  const DenseBackward g = layer.backward(Matrix(1, 1, 2.0 * y(0, 0)));
  EXPECT_DOUBLE_EQ(g.params.weights(0, 0), 6.0);

  const double h = 1e-4;
  const auto loss_at = [&](double w) {
    DenseLayer l(Matrix(1, 1, w), {0.0}, Activation::identity);
    const double v = l.infer(x)(0, 0);
    return v * v;
  };
  const double numeric = (loss_at(3.0 + h) - loss_at(3.0 - h)) / (2 * h);
  EXPECT_NEAR(g.params.weights(0, 0), numeric, 1e-7);
}

TEST(Dense, RectifierBlocksGradientOfInactiveNode) {
  DenseLayer layer(Matrix::from_rows({{1.0}, {-1.0}}), {0.0, 0.0}, Activation::rectifier);
  layer.forward(Matrix(1, 1, 2.0));  // pre-activations (2, -2)
  const DenseBackward g = layer.backward(Matrix::from_rows({{1.0, 1.0}}));
  EXPECT_EQ(g.params.weights(1, 0), 0.0);
  EXPECT_EQ(g.params.bias[1], 0.0);
  EXPECT_EQ(g.params.weights(0, 0), 2.0);
  EXPECT_EQ(g.input(0, 0), 1.0);
}

TEST(Dense, RandomNetworkGradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    Sequential net = make_two_layer(4, 6, 3, rng);
    for (std::size_t i = 0; i < net.depth(); ++i) {
      for (double& b : net.layer(i).bias()) b = std::normal_distribution<double>(0.0, 0.1)(rng);
    }
    const Matrix x = random_matrix(5, 4, rng);
    const Matrix target = random_matrix(5, 3, rng);
    std::vector<ParamSlot> slots;
    net.collect_params("net", slots);
    const auto loss = [&] { return mse_loss(net.infer(x), target).loss; };
    const auto loss_and_grad = [&] {
      net.zero_grad();
      LossResult l = mse_loss(net.forward(x), target);
      net.backward(l.grad);
      return l.loss;
    };
    const GradCheckReport r = grad_check(slots, loss_and_grad, loss, {});
    EXPECT_TRUE(r.passed) << "seed " << seed << " max rel err " << r.max_relative_error;
    EXPECT_EQ(r.entries.size(), net.parameter_count());
  }
}

TEST(Dense, AllForwardPassesOnFiniteInputsAreFinite) {
  Rng rng(9);
  Sequential net = make_two_layer(7, 15, 15, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(16, 7, rng, 100.0);
    EXPECT_TRUE(all_finite(net.infer(x).values()));
  }
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogL) {
  const LossResult r = softmax_cross_entropy(Matrix(3, 4, 0.7), std::vector<int>{0, 2, 3});
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, SaturatedCorrectLogit) {
  Matrix logits(1, 4, 0.0);
  logits(0, 2) = 100.0;
  EXPECT_LT(softmax_cross_entropy(logits, std::vector<int>{2}).loss, 1e-6);
}

TEST(SoftmaxCrossEntropy, MatchesLogSumExpOracle) {
  Rng rng(21);
  const Matrix logits = random_matrix(8, 4, rng, 3.0);
  const std::vector<int> t = random_targets(8, 4, rng);
  const LossResult r = softmax_cross_entropy(logits, t);
  double loss = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < 4; ++j) z += std::exp(logits(i, j));
    loss += std::log(z) - logits(i, static_cast<std::size_t>(t[i]));
    for (std::size_t j = 0; j < 4; ++j) {
      const double expect = (std::exp(logits(i, j)) / z - (static_cast<int>(j) == t[i] ? 1.0 : 0.0)) / 8.0;
      EXPECT_NEAR(r.grad(i, j), expect, 1e-10);
    }
  }
  EXPECT_NEAR(r.loss, loss / 8.0, 1e-10);
}

TEST(SoftmaxCrossEntropy, ShiftInvariant) {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix logits = random_matrix(4, 5, rng, 5.0);
    const std::vector<int> t = random_targets(4, 5, rng);
    const double before = softmax_cross_entropy(logits, t).loss;
    const double shift = std::normal_distribution<double>(0.0, 50.0)(rng);
    for (std::size_t j = 0; j < 5; ++j) logits(1, j) += shift;
    EXPECT_LT(std::abs(softmax_cross_entropy(logits, t).loss - before), 1e-10);
  }
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(23);
  Matrix logits = random_matrix(6, 3, rng);
  const std::vector<int> t = random_targets(6, 3, rng);
  const LossResult r = softmax_cross_entropy(logits, t);
  const double h = 1e-4;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double saved = logits.values()[k];
    logits.values()[k] = saved + h;
    const double up = softmax_cross_entropy(logits, t).loss;
    logits.values()[k] = saved - h;
    const double down = softmax_cross_entropy(logits, t).loss;
    logits.values()[k] = saved;
    EXPECT_LE(relative_error(r.grad.values()[k], (up - down) / (2 * h), 1e-6), 1e-5);
  }
}

TEST(SoftmaxCrossEntropy, TargetOutOfRangeIsArgumentError) {
  EXPECT_THROW(softmax_cross_entropy(Matrix(1, 4), std::vector<int>{4}), ArgumentError);
  EXPECT_THROW(softmax_cross_entropy(Matrix(1, 4), std::vector<int>{-1}), ArgumentError);
}

TEST(Mse, ZeroForEqualInputs) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(mse_loss(a, a).loss, 0.0);
}

TEST(Mse, UnitDifferenceGivesOne) {
  EXPECT_DOUBLE_EQ(mse_loss(Matrix(3, 2, 2.0), Matrix(3, 2, 1.0)).loss, 1.0);
}

TEST(Mse, MatchesElementwiseOracle) {
  Rng rng(31);
  const Matrix a = random_matrix(6, 5, rng);
  const Matrix b = random_matrix(6, 5, rng);
  const LossResult r = mse_loss(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
      EXPECT_NEAR(r.grad(i, j), 2.0 * (a(i, j) - b(i, j)) / 30.0, 1e-12);
    }
  }
  EXPECT_NEAR(r.loss, s / 30.0, 1e-12);
}

TEST(Mse, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(mse_loss(Matrix(2, 3), Matrix(3, 2)), DimensionError);
}

TEST(Optimizer, PlainSgdStep) {
  std::vector<double> w{1.0};
  const std::vector<double> g{0.5};
  Optimizer opt({OptimizerKind::plain_sgd, 0.1});
  opt.step(std::vector<ParamSlot>{{"w", w, g}});
  EXPECT_DOUBLE_EQ(w[0], 0.95);
}

TEST(Optimizer, ZeroGradientIsIdentity) {
  for (auto kind : {OptimizerKind::plain_sgd, OptimizerKind::adaptive_moment}) {
    std::vector<double> w{1.5, -2.0, 0.25};
    const std::vector<double> before = w;
    const std::vector<double> g(3, 0.0);
    Optimizer opt({kind, 0.01});
    for (int i = 0; i < 5; ++i) opt.step(std::vector<ParamSlot>{{"w", w, g}});
    EXPECT_EQ(w, before);
  }
}

TEST(Optimizer, AdaptiveMomentMatchesScalarRecurrence) {
  std::vector<double> w{0.3};
  const std::vector<double> g{0.7};
  Optimizer opt({OptimizerKind::adaptive_moment, 0.01, 0.9, 0.999, 1e-8});
  double ow = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    opt.step(std::vector<ParamSlot>{{"w", w, g}});
    m = 0.9 * m + 0.1 * 0.7;
    v = 0.999 * v + 0.001 * 0.49;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    ow -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(w[0], ow, 1e-12) << "step " << t;
  }
}

TEST(Optimizer, NonFiniteGradientNamesParameter) {
  std::vector<double> w{1.0, 2.0};
  const std::vector<double> g{0.0, std::numeric_limits<double>::quiet_NaN()};
  Optimizer opt;
  try {
    opt.step(std::vector<ParamSlot>{{"encoder.W1", w, g}});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.W1"), std::string::npos);
  }
  EXPECT_EQ(w, (std::vector<double>{1.0, 2.0}));
}

TEST(GradCheck, CorruptedGradientFails) {
  Rng rng(41);
  Sequential net = make_two_layer(3, 4, 2, rng);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix target = random_matrix(4, 2, rng);
  std::vector<ParamSlot> slots;
  net.collect_params("net", slots);
  const auto loss = [&] { return mse_loss(net.infer(x), target).loss; };
  const auto corrupted = [&] {
    net.zero_grad();
    LossResult l = mse_loss(net.forward(x), target);
    for (double& g : l.grad.values()) g *= 1.01;
    net.backward(l.grad);
    return l.loss;
  };
  const GradCheckReport r = grad_check(slots, corrupted, loss, {});
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_relative_error, 1e-3);
}
