#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "segdiscover/model/checkpoint.hpp"
#include "segdiscover/model/model.hpp"
#include "segdiscover/numcore/errors.hpp"
#include "support/loss_check.hpp"
#include "test_util.hpp"

using namespace segdiscover;
using segdiscover::testing::read_file_bytes;
using segdiscover::testing::TempDir;
using segdiscover::testing::write_file_bytes;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_states = 7;
  c.rules_per_state = 3;
  c.k = 4;
  c.state_dim = 5;
  c.hidden_dim = 6;
  c.feature_dim = 3;
  c.M = 8;
  return c;
}

Matrix random_features(int T, int D, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(T, D);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  return X;
}

ModelParams make_params(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  return init_model(c, rng);
}

}  // namespace

TEST(InitModel, SameSeedSameParams) {
  const ModelConfig c = small_config();
  EXPECT_EQ(make_params(c, 3), make_params(c, 3));
  EXPECT_FALSE(make_params(c, 3) == make_params(c, 4));
}

TEST(InitModel, DefaultTableHas150EntriesInRange) {
  ModelConfig c;
  const ModelParams p = make_params(c, 1);
  ASSERT_EQ(p.next_state_table.size(), 150u);
  for (int s : p.next_state_table) {
    EXPECT_GE(s, 0);
    EXPECT_LT(s, c.n_states);
  }
}

TEST(InitModel, ShapesAndScales) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 2);
  EXPECT_EQ(p.state_embeddings.rows(), c.n_states);
  EXPECT_EQ(p.rule_embeddings.rows(), c.n_states * c.rules_per_state);
  EXPECT_EQ(p.action_head.W1.cols(), 2 * c.state_dim + c.feature_dim);
  EXPECT_EQ(p.action_head.W2.rows(), c.num_symbols());
  EXPECT_EQ(p.classification_head.W1.cols(), c.feature_dim);
  const double fan = 1.0 / std::sqrt(2.0 * c.state_dim + c.feature_dim);
  EXPECT_LE(p.action_head.W1.cwiseAbs().maxCoeff(), fan);
  EXPECT_LE(p.state_embeddings.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(c.state_dim));
  EXPECT_EQ(p.action_head.b1.norm(), 0.0);
  EXPECT_EQ(p.classification_head.b2.norm(), 0.0);
}

TEST(InitModel, NullAddsOneSymbol) {
  ModelConfig c = small_config();
  c.use_null = true;
  EXPECT_EQ(make_params(c, 1).action_head.W2.rows(), c.k + 1);
}

TEST(Step, GreedyIsDeterministic) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 5);
  const Vector f = random_features(1, c.feature_dim, 9).row(0).transpose();
  const StepResult a = step(p, c, 2, f, nullptr, false);
  const StepResult b = step(p, c, 2, f, nullptr, false);
  EXPECT_EQ(a.rule, b.rule);
  EXPECT_EQ(a.next_state, b.next_state);
  EXPECT_EQ(a.action_dist, b.action_dist);
  EXPECT_NEAR(a.action_dist.sum(), 1.0, 1e-9);
}

TEST(Step, StronglyPreferredRule) {
  const ModelConfig c = small_config();
  ModelParams p = make_params(c, 5);
  p.rule_selector.W2.setZero();
  p.rule_selector.b2 << 10, -10, -10;
  const Vector f = Vector::Zero(c.feature_dim);
  Rng rng(17);
  int zero = 0;
  for (int i = 0; i < 10000; ++i) zero += step(p, c, 1, f, &rng, true).rule == 0;
  EXPECT_GT(zero / 1e4, 0.999);
}

TEST(Step, NextStateComesFromTable) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 6);
  Rng rng(4);
  const Matrix X = random_features(50, c.feature_dim, 1);
  for (int t = 0; t < 50; ++t) {
    const int state = t % c.n_states;
    const StepResult r = step(p, c, state, X.row(t).transpose(), &rng, true);
    EXPECT_EQ(r.next_state, p.next_state_table[static_cast<std::size_t>(state * c.rules_per_state + r.rule)]);
  }
}

TEST(Step, InvalidStateThrows) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 6);
  EXPECT_THROW(step(p, c, c.n_states, Vector::Zero(c.feature_dim), nullptr, false), InvalidArgument);
  EXPECT_THROW(step(p, c, -1, Vector::Zero(c.feature_dim), nullptr, false), InvalidArgument);
}

TEST(Rollouts, EngineMatchesStepByStep) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 8);
  const Matrix X = random_features(40, c.feature_dim, 2);
  const Rollout r = generate_candidates(p, c, X, 1, Rng(5))[0];
  Rng rng = Rng(5).split(0);
  int state = 0;
  for (int t = 0; t < X.rows(); ++t) {
    const StepResult s = step(p, c, state, X.row(t).transpose(), &rng, true);
    ASSERT_EQ(r.rule_choices[static_cast<std::size_t>(t)], s.rule);
    ASSERT_EQ(r.state_path[static_cast<std::size_t>(t)], state);
    EXPECT_LT((r.action_dists.row(t).transpose() - s.action_dist).cwiseAbs().maxCoeff(), 1e-12);
    state = s.next_state;
  }
  EXPECT_EQ(r.state_path.back(), state);
}

TEST(Rollouts, CandidateCountsLengthsAndRange) {
  ModelConfig c = small_config();
  c.M = 32;
  c.use_null = true;
  const ModelParams p = make_params(c, 9);
  const Matrix X = random_features(25, c.feature_dim, 3);
  const auto cands = generate_candidates(p, c, X, c.M, Rng(1));
  ASSERT_EQ(cands.size(), 32u);
  for (const Rollout& r : cands) {
    EXPECT_EQ(r.length(), 25);
    EXPECT_EQ(r.state_path.size(), 26u);
    for (int t = 0; t < 25; ++t) {
      const int s = r.symbols[static_cast<std::size_t>(t)];
      EXPECT_GE(s, 0);
      EXPECT_LT(s, c.num_symbols());
      EXPECT_NEAR(r.action_dists.row(t).sum(), 1.0, 1e-9);
      EXPECT_EQ(s, argmax(r.action_dists.row(t)));
    }
  }
}

TEST(Rollouts, SeedsReproduceAndIndicesDiffer) {
  const ModelConfig c = small_config();
  ModelParams p = make_params(c, 10);
  p.rule_selector.W2 *= 0.0;  // uniform rule choice makes divergence likely
  const Matrix X = random_features(30, c.feature_dim, 4);
  const auto a = generate_candidates(p, c, X, 4, Rng(2));
  const auto b = generate_candidates(p, c, X, 4, Rng(2));
  for (std::size_t m = 0; m < a.size(); ++m) {
    EXPECT_EQ(a[m].rule_choices, b[m].rule_choices);
    EXPECT_EQ(a[m].action_dists, b[m].action_dists);
  }
  EXPECT_NE(a[0].rule_choices, a[1].rule_choices);
}

TEST(Rollouts, ArgmaxRulesDegenerateToGreedy) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 11);
  const Matrix X = random_features(30, c.feature_dim, 5);
  const Rollout g = greedy_segment(p, c, X);
  for (const Rollout& r : generate_candidates(p, c, X, 8, Rng(3), false)) EXPECT_EQ(r.symbols, g.symbols);
}

TEST(Greedy, DeterministicAndArgmax) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 12);
  const Matrix X = random_features(30, c.feature_dim, 6);
  const Rollout a = greedy_segment(p, c, X), b = greedy_segment(p, c, X);
  EXPECT_EQ(a.symbols, b.symbols);
  EXPECT_EQ(a.action_dists, b.action_dists);
  for (int t = 0; t < a.length(); ++t) EXPECT_EQ(a.symbols[static_cast<std::size_t>(t)], argmax(a.action_dists.row(t)));
}

TEST(Classify, RowsSumToOneAndPermuteWithFrames) {
  const ModelConfig c = small_config();
  const ModelParams p = make_params(c, 13);
  const Matrix X = random_features(12, c.feature_dim, 7);
  const Matrix P = classify_frames(p, X);
  for (int t = 0; t < 12; ++t) EXPECT_NEAR(P.row(t).sum(), 1.0, 1e-9);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(12);
  perm.setIdentity();
  std::reverse(perm.indices().data(), perm.indices().data() + 12);
  const Matrix Pp = classify_frames(p, perm * X);
  EXPECT_LT((Pp - perm * P).cwiseAbs().maxCoeff(), 1e-15);
}

// Fits the classification head alone on one-hot features and checks the
// predictions saturate.
TEST(Classify, SaturatesOnOneHotFeatures) {
  ModelConfig c = small_config();
  c.feature_dim = c.k;
  ModelParams p = make_params(c, 14);
  const Matrix X = Matrix::Identity(c.k, c.k);
  std::vector<Eigen::Index> y(static_cast<std::size_t>(c.k));
  for (int i = 0; i < c.k; ++i) y[static_cast<std::size_t>(i)] = i;
  auto& ch = p.classification_head;
  for (int it = 0; it < 3000; ++it) {
    Tape<double> t;
    auto W1 = t.variable(ch.W1), b1 = t.variable(ch.b1), W2 = t.variable(ch.W2), b2 = t.variable(ch.b2);
    auto h = t.tanh(t.affine(t.constant(X), W1, b1));
    auto loss = t.cross_entropy_rows(t.softmax_rows(t.affine(h, W2, b2)), y);
    t.backward(loss);
    ch.W1 -= 0.5 * t.grad(W1);
    ch.b1 -= 0.5 * t.grad(b1);
    ch.W2 -= 0.5 * t.grad(W2);
    ch.b2 -= 0.5 * t.grad(b2);
  }
  const Matrix P = classify_frames(p, X);
  for (int i = 0; i < c.k; ++i) EXPECT_GT(P(i, i), 0.99);
}

TEST(SelfLabelLoss, UniformDistributionsGiveTwoLogFour) {
  Tape<double> t;
  RolloutVars<double> rv;
  rv.action_probs = t.variable(Matrix::Constant(5, 4, 0.25));
  rv.class_probs = t.variable(Matrix::Constant(5, 4, 0.25));
  auto l = self_label_loss(t, rv, {0, 1, 2, 3, 0});
  EXPECT_NEAR(t.scalar(l), 2 * std::log(4.0), 1e-12);
}

TEST(SelfLabelLoss, PerfectPredictionsGiveZeroLossAndGradient) {
  Tape<double> t;
  RolloutVars<double> rv;
  Matrix onehot = Matrix::Zero(3, 3);
  onehot(0, 2) = onehot(1, 0) = onehot(2, 1) = 1;
  rv.action_probs = t.variable(onehot);
  rv.class_probs = t.variable(onehot);
  auto l = self_label_loss(t, rv, {2, 0, 1});
  EXPECT_EQ(t.scalar(l), 0.0);
}

TEST(Gradient, FullLossMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = segdiscover::testing::full_loss_gradient_check(seed);
    EXPECT_LT(r.max_rel_error, 1e-5) << "seed " << seed;
    EXPECT_GT(r.triplets, 0u);
  }
}

TEST(Gradient, RuleSelectorReceivesGradient) {
  ModelConfig c = small_config();
  const ModelParams p = make_params(c, 15);
  const Matrix X = random_features(10, c.feature_dim, 8);
  const Rollout r = generate_candidates(p, c, X, 1, Rng(1))[0];
  Tape<double> t;
  auto pv = bind_params(t, p);
  auto rv = replay_rollout(t, pv, c, X, r);
  EXPECT_LT((t.value(rv.action_probs) - r.action_dists).cwiseAbs().maxCoeff(), 1e-12);
  std::vector<int> y(10, 1);
  t.backward(self_label_loss(t, rv, y));
  EXPECT_GT(t.grad(pv.rule_selector.W2).norm(), 0.0);
  EXPECT_GT(t.grad(pv.rule_embeddings).norm(), 0.0);
}

TEST(ModelFile, RoundTripIsBitwise) {
  TempDir dir;
  ModelConfig c = small_config();
  c.use_null = true;
  c.temperature = 0.7;
  const ModelParams p = make_params(c, 16);
  save_model(dir / "m.uavm", c, p);
  ModelConfig c2;
  ModelParams p2;
  load_model(dir / "m.uavm", c2, p2);
  EXPECT_EQ(c2, c);
  EXPECT_EQ(p2, p);
  save_model(dir / "m2.uavm", c2, p2);
  EXPECT_EQ(read_file_bytes(dir / "m.uavm"), read_file_bytes(dir / "m2.uavm"));
}

TEST(ModelFile, HeaderAndCorruption) {
  TempDir dir;
  const ModelConfig c = small_config();
  save_model(dir / "m.uavm", c, make_params(c, 17));
  std::string bytes = read_file_bytes(dir / "m.uavm");
  EXPECT_EQ(bytes.substr(0, 4), "UAVM");
  EXPECT_EQ(bytes[4], 1);
  ModelConfig c2;
  ModelParams p2;
  std::string bad = bytes;
  bad[1] = 'X';
  write_file_bytes(dir / "bad.uavm", bad);
  EXPECT_THROW(load_model(dir / "bad.uavm", c2, p2), FormatError);
  write_file_bytes(dir / "short.uavm", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_model(dir / "short.uavm", c2, p2), FormatError);
  bad = bytes;
  bad[4] = 9;
  write_file_bytes(dir / "ver.uavm", bad);
  EXPECT_THROW(load_model(dir / "ver.uavm", c2, p2), FormatError);
}
