#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "segdiscover/numcore/functions.hpp"
#include "segdiscover/numcore/gradcheck.hpp"
#include "segdiscover/numcore/optim.hpp"
#include "segdiscover/numcore/parallel.hpp"
#include "segdiscover/numcore/rng.hpp"
#include "segdiscover/numcore/tape.hpp"

using namespace segdiscover;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

TEST(Affine, IdentityWeights) {
  Vector x(2);
  x << 1, 2;
  EXPECT_EQ(affine(x, Matrix::Identity(2, 2), Vector::Zero(2)), x);
}

TEST(Affine, ZeroWeightsReturnBias) {
  Vector b(2);
  b << 3, 4;
  Vector x(2);
  x << -7, 11;
  EXPECT_EQ(affine(x, Matrix::Zero(2, 2), b), b);
}

TEST(Affine, HandMultiply) {
  Matrix W(2, 2);
  W << 1, 1, 0, 2;
  Vector b(2), x(2), want(2);
  b << 0, 1;
  x << 1, 2;
  want << 3, 5;
  EXPECT_EQ(affine(x, W, b), want);
}

TEST(Affine, DimensionMismatchThrows) {
  EXPECT_THROW(affine(Vector::Zero(3), Matrix::Zero(2, 2), Vector::Zero(2)), InvalidArgument);
  EXPECT_THROW(affine(Vector::Zero(2), Matrix::Zero(2, 2), Vector::Zero(3)), InvalidArgument);
}

TEST(Softmax, EqualLogits) {
  Vector l = Vector::Constant(3, 4.2);
  Vector p = softmax(l);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p(i), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LogThree) {
  Vector l(2);
  l << 0.0, std::log(3.0);
  Vector p = softmax(l);
  EXPECT_NEAR(p(0), 0.25, 1e-12);
  EXPECT_NEAR(p(1), 0.75, 1e-12);
}

TEST(Softmax, DominantLogitIsStable) {
  Vector l(2);
  l << 0.0, 100.0;
  Vector p = softmax(l);
  EXPECT_LT(p(0), 1e-40);
  EXPECT_NEAR(p(1), 1.0, 1e-15);
  EXPECT_TRUE(p.allFinite());
}

TEST(Softmax, EmptyThrows) { EXPECT_THROW(softmax(Vector(0)), InvalidArgument); }

TEST(Softmax, RandomRowsAreDistributions) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Vector l = random_matrix(6, 1, rng, 10.0);
    Vector p = softmax(l);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_TRUE((p.array() > 0.0).all() && (p.array() < 1.0).all());
  }
}

TEST(CrossEntropy, Examples) {
  Vector certain(3);
  certain << 1, 0, 0;
  EXPECT_EQ(cross_entropy(certain, 0), 0.0);
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(cross_entropy(Vector::Constant(4, 0.25), t), 1.38629436111989, 1e-12);
  Vector half(2);
  half << 0.5, 0.5;
  EXPECT_NEAR(cross_entropy(half, 1), 0.693147180559945, 1e-12);
}

TEST(CrossEntropy, ClampsZeroProbability) {
  Vector p(2);
  p << 1, 0;
  EXPECT_NEAR(cross_entropy(p, 1), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, OutOfRangeThrows) {
  EXPECT_THROW(cross_entropy(Vector::Constant(2, 0.5), 2), InvalidArgument);
  EXPECT_THROW(cross_entropy(Vector::Constant(2, 0.5), -1), InvalidArgument);
}

TEST(Gumbel, HardIsOneHotSoftSumsToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    Vector l = random_matrix(4, 1, rng, 5.0);
    GumbelSample s = gumbel_softmax_sample(l, 0.5 + rng.uniform(), rng);
    EXPECT_EQ(s.hard.sum(), 1.0);
    EXPECT_EQ((s.hard.array() == 1.0).count(), 1);
    EXPECT_EQ(s.hard(s.index), 1.0);
    EXPECT_EQ(argmax(s.soft), s.index);
    EXPECT_NEAR(s.soft.sum(), 1.0, 1e-9);
  }
}

TEST(Gumbel, StronglyPreferredIndex) {
  Rng rng(11);
  Vector l(2);
  l << 10, -10;
  int zero = 0;
  for (int i = 0; i < 10000; ++i) zero += gumbel_softmax_sample(l, 1.0, rng).index == 0;
  EXPECT_GT(zero / 1e4, 0.999);
}

TEST(Gumbel, SymmetricLogits) {
  Rng rng(12);
  Vector l = Vector::Zero(2);
  int zero = 0;
  for (int i = 0; i < 10000; ++i) zero += gumbel_softmax_sample(l, 1.0, rng).index == 0;
  EXPECT_GE(zero / 1e4, 0.47);
  EXPECT_LE(zero / 1e4, 0.53);
}

TEST(Gumbel, NonPositiveTemperatureThrows) {
  Rng rng(1);
  EXPECT_THROW(gumbel_softmax_sample(Vector::Zero(2), 0.0, rng), InvalidArgument);
  EXPECT_THROW(gumbel_softmax_sample(Vector::Zero(2), -1.0, rng), InvalidArgument);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(c.normal(), d.normal());
    ASSERT_EQ(c.gumbel(), d.gumbel());
    ASSERT_EQ(c.index(17), d.index(17));
  }
}

TEST(Rng, SplitIsIndependentOfParentDraws) {
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) b();
  Rng sa = a.split(3), sb = b.split(3);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(sa(), sb());
  EXPECT_NE(a.split(3)(), a.split(4)());
}

TEST(CosineLr, Examples) {
  EXPECT_EQ(cosine_lr(0, 100, 0.1), 0.1);
  EXPECT_EQ(cosine_lr(100, 100, 0.1), 0.0);
  EXPECT_NEAR(cosine_lr(50, 100, 0.1), 0.05, 1e-15);
  EXPECT_THROW(cosine_lr(101, 100, 0.1), InvalidArgument);
}

TEST(CosineLr, NonIncreasingAndMatchesFormula) {
  double prev = cosine_lr(0, 37, 0.3);
  for (int s = 1; s <= 37; ++s) {
    const double lr = cosine_lr(s, 37, 0.3);
    EXPECT_LE(lr, prev);
    EXPECT_NEAR(lr, 0.3 * 0.5 * (1 + std::cos(std::numbers::pi * s / 37.0)), 1e-15);
    prev = lr;
  }
}

TEST(Sgd, ZeroGradientZeroVelocityKeepsParams) {
  Matrix p = Matrix::Constant(2, 3, 1.5);
  const Matrix before = p;
  OptimState opt = make_optim_state({&p}, 0.1, 0.9, 10);
  sgd_momentum_step({&p}, {Matrix::Zero(2, 3)}, opt);
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step, 1);
}

TEST(Sgd, NoMomentumIsPlainSgd) {
  Matrix p = Matrix::Constant(1, 2, 1.0);
  OptimState opt = make_optim_state({&p}, 0.1, 0.0, 1000);
  Matrix g(1, 2);
  g << 2, -4;
  const double lr = sgd_momentum_step({&p}, {g}, opt);
  EXPECT_EQ(lr, 0.1);
  EXPECT_NEAR(p(0, 0), 1.0 - 0.2, 1e-15);
  EXPECT_NEAR(p(0, 1), 1.0 + 0.4, 1e-15);
}

TEST(Sgd, MomentumCarriesVelocity) {
  Matrix p = Matrix::Zero(1, 1);
  OptimState opt = make_optim_state({&p}, 0.1, 0.9, 1000000);
  opt.velocity[0](0, 0) = 1.0;
  sgd_momentum_step({&p}, {Matrix::Zero(1, 1)}, opt);
  EXPECT_NEAR(p(0, 0), -0.09, 1e-9);
}

TEST(Sgd, ShapeMismatchThrows) {
  Matrix p = Matrix::Zero(2, 2);
  OptimState opt = make_optim_state({&p}, 0.1, 0.9, 10);
  EXPECT_THROW(sgd_momentum_step({&p}, {Matrix::Zero(2, 3)}, opt), InvalidArgument);
}

TEST(ClipGradNorm, RescalesOnlyAboveThreshold) {
  std::vector<Matrix> g{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  EXPECT_NEAR(clip_grad_norm(g, 10.0), 5.0, 1e-15);
  EXPECT_EQ(g[0](0, 0), 3.0);
  EXPECT_NEAR(clip_grad_norm(g, 1.0), 5.0, 1e-15);
  EXPECT_NEAR(std::hypot(g[0](0, 0), g[1](0, 0)), 1.0, 1e-15);
}

TEST(FiniteDiff, Square) {
  Vector p(1);
  p << 3.0;
  Vector a(1);
  a << 6.0;
  const double err = finite_diff_check([](const Vector& v) { return v(0) * v(0); }, p, a, 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(FiniteDiff, Constant) {
  Vector p = Vector::Ones(3);
  EXPECT_EQ(finite_diff_check([](const Vector&) { return 2.0; }, p, Vector::Zero(3), 1e-5), 0.0);
}

TEST(FiniteDiff, RejectsBadEpsilonAndNonFinite) {
  Vector p = Vector::Ones(1);
  auto f = [](const Vector& v) { return v(0); };
  EXPECT_THROW(finite_diff_check(f, p, Vector::Ones(1), 1e-3), InvalidArgument);
  auto bad = [](const Vector& v) { return v(0) > 1.0 ? std::nan("") : v(0); };
  EXPECT_THROW(finite_diff_check(bad, p, Vector::Ones(1), 1e-5), NumericError);
}

// A two-layer network with cross-entropy on a batch, built on the tape and
// checked against central differences in extended precision.
TEST(Tape, ComposedNetworkGradientMatchesFiniteDifferences) {
  Rng rng(2024);
  const int N = 5, D = 4, H = 6, C = 3;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix X = random_matrix(N, D, rng);
    const Matrix W1 = random_matrix(H, D, rng), b1 = random_matrix(1, H, rng);
    const Matrix W2 = random_matrix(C, H, rng), b2 = random_matrix(1, C, rng);
    std::vector<Eigen::Index> y;
    for (int i = 0; i < N; ++i) y.push_back(static_cast<Eigen::Index>(rng.index(C)));

    auto loss = [&](auto& tape, auto w1, auto bb1, auto w2, auto bb2) {
      using S = typename std::decay_t<decltype(tape)>::Mat::Scalar;
      auto x = tape.constant(X.cast<S>());
      auto h = tape.tanh(tape.affine(x, w1, bb1));
      auto p = tape.softmax_rows(tape.affine(h, w2, bb2));
      return tape.cross_entropy_rows(p, y);
    };

    Tape<double> tape;
    auto vw1 = tape.variable(W1), vb1 = tape.variable(b1), vw2 = tape.variable(W2), vb2 = tape.variable(b2);
    tape.backward(loss(tape, vw1, vb1, vw2, vb2));
    Vector params(W1.size() + b1.size() + W2.size() + b2.size()), grad(params.size());
    Eigen::Index at = 0;
    for (auto [m, v] : {std::pair{&W1, vw1}, std::pair{&b1, vb1}, std::pair{&W2, vw2}, std::pair{&b2, vb2}}) {
      params.segment(at, m->size()) = m->reshaped<Eigen::RowMajor>();
      grad.segment(at, m->size()) = tape.grad(v).reshaped<Eigen::RowMajor>();
      at += m->size();
    }
    auto f = [&](const VectorX<long double>& q) {
      Tape<long double> t;
      Eigen::Index o = 0;
      auto take = [&](Eigen::Index r, Eigen::Index c) {
        MatrixX<long double> m = q.segment(o, r * c).reshaped<Eigen::RowMajor>(r, c);
        o += r * c;
        return t.variable(m);
      };
      auto a = take(H, D);
      auto b = take(1, H);
      auto c = take(C, H);
      auto d = take(1, C);
      return t.scalar(loss(t, a, b, c, d));
    };
    worst = std::max(worst, finite_diff_check<long double>(f, params, grad, 1e-6));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Tape, UnusedVariableHasZeroGradient) {
  Tape<double> t;
  auto a = t.variable(Matrix::Constant(2, 2, 1.0));
  auto unused = t.variable(Matrix::Constant(3, 1, 2.0));
  t.backward(t.sum(t.tanh(a)));
  EXPECT_EQ(t.grad(unused), Matrix::Zero(3, 1));
}

TEST(Tape, MaskedCrossEntropyRowsIgnoreNegativeTargets) {
  Tape<double> t;
  Matrix p(2, 2);
  p << 0.5, 0.5, 0.25, 0.75;
  auto v = t.variable(p);
  auto ce = t.cross_entropy_rows(v, {-1, 1});
  EXPECT_NEAR(t.scalar(ce), -std::log(0.75), 1e-15);
  t.backward(ce);
  EXPECT_EQ(t.grad(v).row(0).norm(), 0.0);
}

TEST(FastTanh, AgreesWithStdTanh) {
  Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(2001, -20.0, 20.0);
  Eigen::ArrayXd y = fast_tanh(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) EXPECT_NEAR(y(i), std::tanh(x(i)), 1e-15);
}

TEST(ParallelFor, RunsEveryIndexAndRethrowsLowestFailure) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  try {
    parallel_for(50, [](std::size_t i) {
      if (i == 7 || i == 30) throw std::runtime_error("index " + std::to_string(i));
    });
    FAIL() << "expected a throw";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "index 7");
  }
}
