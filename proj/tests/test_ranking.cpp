#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/ranking/ranking.hpp"

using namespace segdiscover;

namespace {

// Builds a labeling from (symbol, length) runs.
Labeling runs_of(std::initializer_list<std::pair<int, int>> runs, int k) {
  Labeling s;
  s.k = k;
  for (auto [sym, len] : runs) s.symbols.insert(s.symbols.end(), static_cast<std::size_t>(len), sym);
  return s;
}

Matrix uniform_probs(int T, int K) { return Matrix::Constant(T, K, 1.0 / K); }

RankingConfig weights(double g1, double g2, double g3) {
  RankingConfig c;
  c.gamma1 = g1;
  c.gamma2 = g2;
  c.gamma3 = g3;
  return c;
}

}  // namespace

TEST(Labeling, RunsPartitionTheSequence) {
  const Labeling s = runs_of({{0, 2}, {3, 1}, {1, 3}, {0, 1}}, 3);
  const auto r = s.runs();
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[1].action, 3);
  int covered = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) {
      EXPECT_EQ(r[i].start, r[i - 1].end);
    }
    covered += r[i].length();
  }
  EXPECT_EQ(covered, s.length());
  EXPECT_EQ(s.action_lengths(), (std::vector<int>{3, 3, 0}));
  EXPECT_EQ(s.run_counts(), (std::vector<int>{2, 1, 0}));
  EXPECT_EQ(s.non_null_frames(), 6);
  EXPECT_EQ(segments_from_labeling(s)[1].action, kNullAction);
  EXPECT_EQ(labeling_from_segments(segments_from_labeling(s), s.length(), 3), s);
}

TEST(Occurrence, Examples) {
  EXPECT_EQ(cost_occurrence(runs_of({{0, 2}, {1, 2}, {2, 2}, {3, 2}, {4, 2}}, 5)), 0.0);
  EXPECT_EQ(cost_occurrence(runs_of({{0, 2}, {1, 2}, {2, 2}}, 5)), 2.0);
  EXPECT_EQ(cost_occurrence(runs_of({{0, 2}, {1, 2}, {0, 2}}, 3)), 2.0);
}

TEST(Occurrence, NullRunsAreIgnored) {
  EXPECT_EQ(cost_occurrence(runs_of({{0, 2}, {2, 1}, {1, 2}, {2, 3}}, 2)), 0.0);
  EXPECT_EQ(cost_occurrence(runs_of({{0, 2}, {2, 1}, {0, 2}}, 2)), 2.0);
}

TEST(Occurrence, ZeroIffEveryActionOnceContiguous) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(rng.index(4));
    Labeling s;
    s.k = k;
    const int T = 1 + static_cast<int>(rng.index(12));
    for (int t = 0; t < T; ++t) s.symbols.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(k) + 1)));
    bool once = true;
    for (int c : s.run_counts()) once = once && c == 1;
    EXPECT_EQ(cost_occurrence(s) == 0.0, once);
  }
}

TEST(LengthAverage, Examples) {
  EXPECT_EQ(cost_length_avg(runs_of({{0, 10}, {1, 10}, {2, 10}}, 3)), 0.0);
  EXPECT_NEAR(cost_length_avg(runs_of({{0, 10}, {1, 20}}, 2)), 5.0, 1e-9);
  EXPECT_EQ(cost_length_avg(runs_of({{0, 7}}, 1)), 0.0);
}

TEST(LengthAverage, MissingActionCountsAsZeroAndNullIsExcluded) {
  // lengths [10, 0], mean 5 -> sqrt((25 + 25) / 2) = 5
  EXPECT_NEAR(cost_length_avg(runs_of({{0, 10}, {2, 30}}, 2)), 5.0, 1e-12);
}

TEST(LengthAverage, ZeroIffEqualCounts) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.index(3));
    Labeling s;
    s.k = k;
    for (int t = 0; t < 12; ++t) s.symbols.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(k) + 1)));
    const auto len = s.action_lengths();
    const bool equal = std::all_of(len.begin(), len.end(), [&](int l) { return l == len[0]; });
    EXPECT_EQ(cost_length_avg(s) < 1e-12, equal);
  }
}

TEST(LengthDist, PoissonAndGaussianExamples) {
  LengthModel lm;
  lm.learned = true;
  lm.variant = LengthVariant::poisson;
  lm.reset(1, 1.0);
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 1}}, 1), lm), 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 1}}, 1), lm), 0.63212, 1e-5);
  lm.reset(1, 10.0);
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 10}}, 1), lm), 0.87489, 1e-5);
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 10}}, 1), lm), 1.0 - std::pow(10.0, 10) * std::exp(-10.0) / 3628800.0,
              1e-12);

  lm.variant = LengthVariant::gaussian;
  lm.reset(1, 7.0);
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 7}}, 1), lm), 1.0 - 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 7}}, 1), lm), 0.60106, 1e-5);
}

TEST(LengthDist, StaticParametersSplitTheVideoEqually) {
  LengthModel lm;  // poisson, not learned
  // T = 20, k = 2 -> lambda 10 for both actions
  const double expected = 2.0 * (1.0 - poisson_pmf(10, 10.0));
  EXPECT_NEAR(cost_length_dist(runs_of({{0, 10}, {1, 10}}, 2), lm), expected, 1e-12);
}

TEST(LengthDist, PoissonStableForLongLengths) {
  const double p = poisson_pmf(10000, 10000.0);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_NEAR(p, 1.0 / std::sqrt(2.0 * std::numbers::pi * 10000.0), 1e-5);
}

TEST(LengthDist, PoissonMinimizedNearLambda) {
  for (int lambda = 1; lambda <= 30; ++lambda) {
    LengthModel lm;
    lm.learned = true;
    lm.reset(1, lambda);
    int best = 0;
    double best_cost = 1e9;
    for (int L = 1; L <= 3 * lambda; ++L) {
      const double c = cost_length_dist(runs_of({{0, L}}, 1), lm);
      if (c < best_cost - 1e-15) {
        best_cost = c;
        best = L;
      }
    }
    EXPECT_TRUE(best == lambda || best == lambda - 1) << "lambda " << lambda << " argmin " << best;
  }
}

TEST(Probability, Examples) {
  const Labeling s = runs_of({{0, 4}, {1, 6}}, 2);
  Matrix perfect = Matrix::Zero(10, 3);
  for (int t = 0; t < 10; ++t) perfect(t, s.symbols[static_cast<std::size_t>(t)]) = 1.0;
  EXPECT_EQ(cost_probability(s, perfect), 0.0);

  Matrix half = Matrix::Constant(10, 3, 0.25);
  for (int t = 0; t < 10; ++t) half(t, s.symbols[static_cast<std::size_t>(t)]) = 0.5;
  EXPECT_NEAR(cost_probability(s, half), 5.0, 1e-12);

  EXPECT_EQ(cost_probability(runs_of({{2, 10}}, 2), uniform_probs(10, 3)), 0.0);
  EXPECT_THROW(cost_probability(s, uniform_probs(9, 3)), InvalidArgument);
}

TEST(Total, DefaultGammaArithmetic) {
  // k=5, T=100 non-null frames. C1 = 2 (actions 3 and 4 missing).
  Labeling s = runs_of({{0, 50}, {1, 25}, {2, 25}}, 5);
  Matrix p = Matrix::Zero(100, 6);
  for (int t = 0; t < 100; ++t) p(t, s.symbols[static_cast<std::size_t>(t)]) = 0.9;
  RankingConfig cfg;
  cfg.length_model.variant = LengthVariant::average;
  const CostBreakdown c = cost_total(s, p, cfg);
  EXPECT_NEAR(c.occurrence, 2.0, 1e-12);
  EXPECT_NEAR(c.probability, 10.0, 1e-9);
  EXPECT_NEAR(c.total, c.occurrence / 5.0 + c.length / 100.0 + c.probability / 100.0, 1e-12);

  // The stated components C1=2, C2=5, C3=10 give 0.55 under the defaults.
  EXPECT_NEAR(2.0 / 5.0 + 5.0 / 100.0 + 10.0 / 100.0, 0.55, 1e-12);
}

TEST(Total, AllZeroComponentsGiveZero) {
  const Labeling s = runs_of({{0, 5}, {1, 5}}, 2);
  Matrix p = Matrix::Zero(10, 3);
  for (int t = 0; t < 10; ++t) p(t, s.symbols[static_cast<std::size_t>(t)]) = 1.0;
  RankingConfig cfg;
  cfg.length_model.variant = LengthVariant::average;
  EXPECT_EQ(cost_total(s, p, cfg).total, 0.0);
}

TEST(Total, CrossVideoTermIsAdded) {
  const Labeling s = runs_of({{0, 5}, {1, 5}}, 2);
  const RankingConfig cfg = weights(1, 1, 1);
  const Matrix p = uniform_probs(10, 3);
  EXPECT_NEAR(cost_total(s, p, cfg, 0.75).total - cost_total(s, p, cfg).total, 0.75, 1e-12);
}

TEST(Total, ScalingGammasPreservesArgmin) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3;
    const int T = 15;
    std::vector<Labeling> cands;
    for (int m = 0; m < 6; ++m) {
      Labeling s;
      s.k = k;
      for (int t = 0; t < T; ++t) s.symbols.push_back(static_cast<int>(rng.index(4)));
      cands.push_back(s);
    }
    Matrix logits(T, 4);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.normal();
    const Matrix p = softmax_rows(logits);
    const RankingConfig one = weights(0.3, 0.05, 0.07);
    const RankingConfig two = weights(0.6, 0.1, 0.14);
    const Selected a = select_best(cands, p, one);
    const Selected b = select_best(cands, p, two);
    EXPECT_EQ(a.index, b.index);
    EXPECT_NEAR(b.cost.total, 2.0 * a.cost.total, 1e-12);
  }
}

TEST(Select, Examples) {
  const Matrix p = uniform_probs(4, 3);
  const RankingConfig cfg = weights(1, 0, 0);
  const Labeling clean = runs_of({{0, 2}, {1, 2}}, 2);       // C1 0
  const Labeling missing = runs_of({{0, 4}}, 2);              // C1 1
  const Labeling split = runs_of({{0, 1}, {1, 1}, {0, 2}}, 2);  // C1 1
  const Labeling worst = runs_of({{0, 1}, {1, 1}, {0, 1}, {1, 1}}, 2);  // C1 2

  EXPECT_EQ(select_best({missing}, p, cfg).index, 0u);
  const Selected s = select_best({worst, clean, missing}, p, cfg);
  EXPECT_EQ(s.index, 1u);
  EXPECT_EQ(s.labeling, clean);
  EXPECT_EQ(select_best({worst, missing, split}, p, cfg).index, 1u);
  EXPECT_THROW(select_best(std::vector<Labeling>{}, p, cfg), InvalidArgument);
}

TEST(Select, ExtraCostDecides) {
  const Matrix p = uniform_probs(4, 3);
  const RankingConfig cfg = weights(1, 0, 0);
  const Labeling a = runs_of({{0, 2}, {1, 2}}, 2);
  EXPECT_EQ(select_best({a, a, a}, p, cfg, nullptr, {3.0, 1.0, 2.0}).index, 1u);
  EXPECT_THROW(select_best({a, a}, p, cfg, nullptr, {1.0}), InvalidArgument);
}

TEST(Select, RolloutIndexMatchesLabelingOverload) {
  std::vector<Rollout> rollouts(3);
  rollouts[0].symbols = {0, 1, 0, 1};
  rollouts[1].symbols = {0, 0, 1, 1};
  rollouts[2].symbols = {1, 1, 0, 0};
  const Selected s = select_best(rollouts, uniform_probs(4, 3), weights(1, 0, 0), 2);
  EXPECT_EQ(s.index, 1u);
  EXPECT_EQ(s.labeling.k, 2);
}

TEST(Select, RandomRuleNeedsRngAndIsDeterministic) {
  const Matrix p = uniform_probs(4, 3);
  RankingConfig cfg = weights(1, 0, 0);
  cfg.selection = SelectionRule::random;
  const std::vector<Labeling> cands(5, runs_of({{0, 2}, {1, 2}}, 2));
  EXPECT_THROW(select_best(cands, p, cfg), InvalidArgument);
  Rng a(7), b(7);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(select_best(cands, p, cfg, &a).index, select_best(cands, p, cfg, &b).index);
}

TEST(Select, WinnerCostIsMinimal) {
  Rng rng(21);
  RankingConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 10;
    std::vector<Labeling> cands;
    for (int m = 0; m < 5; ++m) {
      Labeling s;
      s.k = 3;
      for (int t = 0; t < T; ++t) s.symbols.push_back(static_cast<int>(rng.index(4)));
      cands.push_back(s);
    }
    Matrix logits(T, 4);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.normal();
    const Matrix p = softmax_rows(logits);
    const Selected best = select_best(cands, p, cfg);
    for (const Labeling& c : cands) EXPECT_LE(best.cost.total, cost_total(c, p, cfg).total);
  }
}

TEST(Relabel, OccurrenceAndLengthInvariantProbabilityNot) {
  Rng rng(13);
  const int k = 4;
  const std::vector<int> perm{2, 0, 3, 1};
  LengthModel poisson;
  poisson.learned = true;
  poisson.reset(k, 4.0);
  LengthModel avg;
  avg.variant = LengthVariant::average;
  int probability_changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 16;
    Labeling s;
    s.k = k;
    for (int t = 0; t < T; ++t) s.symbols.push_back(static_cast<int>(rng.index(k + 1)));
    Labeling r = s;
    for (int& sym : r.symbols) {
      if (!s.is_null(sym)) sym = perm[static_cast<std::size_t>(sym)];
    }
    EXPECT_EQ(cost_occurrence(r), cost_occurrence(s));
    EXPECT_NEAR(cost_length(r, poisson), cost_length(s, poisson), 1e-12);
    EXPECT_NEAR(cost_length(r, avg), cost_length(s, avg), 1e-12);

    Matrix logits(T, k + 1);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 3.0 * rng.normal();
    const Matrix p = softmax_rows(logits);
    if (std::abs(cost_probability(r, p) - cost_probability(s, p)) > 1e-9) ++probability_changed;
  }
  EXPECT_GT(probability_changed, 90);
}

TEST(LengthUpdate, Examples) {
  LengthModel lm;
  lm.learned = true;
  lm.ema_rate = 0.0;
  lm.reset(2, 3.0);
  const std::vector<Labeling> segs{runs_of({{0, 10}, {2, 4}}, 2), runs_of({{2, 1}, {0, 10}}, 2)};
  const LengthModel out = update_length_params(lm, segs);
  EXPECT_EQ(out.lambda[0], 10.0);
  EXPECT_EQ(out.mu[0], 10.0);
  EXPECT_EQ(out.sigma[0], 1.0);  // sample sd 0 is floored
  EXPECT_EQ(out.lambda[1], 3.0);  // absent everywhere

  LengthModel ema;
  ema.learned = true;
  ema.ema_rate = 0.9;
  ema.reset(1, 10.0);
  EXPECT_NEAR(update_length_params(ema, {runs_of({{0, 20}}, 1)}).lambda[0], 11.0, 1e-12);
}

TEST(LengthUpdate, SampleStandardDeviation) {
  LengthModel lm;
  lm.learned = true;
  lm.ema_rate = 0.0;
  lm.reset(1, 5.0);
  const LengthModel out = update_length_params(lm, {runs_of({{0, 4}}, 1), runs_of({{0, 8}}, 1)});
  EXPECT_NEAR(out.mu[0], 6.0, 1e-12);
  EXPECT_NEAR(out.sigma[0], std::sqrt(8.0), 1e-12);
}

TEST(LengthUpdate, UninitializedModelStartsFromEqualSplit) {
  LengthModel lm;
  lm.learned = true;
  lm.ema_rate = 0.5;
  const LengthModel out = update_length_params(lm, {runs_of({{0, 12}, {1, 0}}, 3)});
  ASSERT_TRUE(out.has_parameters(3));
  EXPECT_NEAR(out.lambda[0], 0.5 * 4.0 + 0.5 * 12.0, 1e-12);
  EXPECT_NEAR(out.lambda[1], 4.0, 1e-12);
}

TEST(LengthVariantNames, RoundTrip) {
  for (LengthVariant v : {LengthVariant::average, LengthVariant::poisson, LengthVariant::gaussian}) {
    EXPECT_EQ(length_variant_from_string(to_string(v)), v);
  }
  EXPECT_THROW(length_variant_from_string("exponential"), InvalidArgument);
}
