#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segdiscover/model/model.hpp"
#include "segdiscover/numcore/matrix.hpp"
#include "segdiscover/numcore/rng.hpp"
#include "segdiscover/ranking/labeling.hpp"

namespace segdiscover {

enum class LengthVariant { average, poisson, gaussian };

std::string to_string(LengthVariant v);
LengthVariant length_variant_from_string(const std::string& s);

/// Expected action durations. Static models use T / k for every action
/// (sigma 1); learned models carry per-action parameters that are refit
/// from greedy segmentations during training.
struct LengthModel {
  LengthVariant variant = LengthVariant::poisson;
  bool learned = false;
  std::vector<double> lambda;  // poisson, per action
  std::vector<double> mu;      // gaussian, per action
  std::vector<double> sigma;   // gaussian, per action
  double ema_rate = 0.9;

  /// Per-action parameters all set to `expected_length` (sigma 1).
  void reset(int k, double expected_length);
  bool has_parameters(int k) const;

  friend bool operator==(const LengthModel&, const LengthModel&) = default;
};

enum class SelectionRule { argmin, random };

/// Weights of the ranking cost. An unset gamma takes its default
/// normalizer: 1/k for occurrence, 1/(non-null frames) for length and
/// frame probability.
struct RankingConfig {
  std::optional<double> gamma1, gamma2, gamma3;
  LengthModel length_model;
  SelectionRule selection = SelectionRule::argmin;

  friend bool operator==(const RankingConfig&, const RankingConfig&) = default;
};

struct CostBreakdown {
  double occurrence = 0.0;   // C1
  double length = 0.0;       // C2
  double probability = 0.0;  // C3
  double cross_video = 0.0;  // already weighted
  double total = 0.0;
};

/// Missing actions plus extra disconnected runs of present ones.
double cost_occurrence(const Labeling& s);

/// Root-mean-square deviation of per-action frame counts from their mean.
double cost_length_avg(const Labeling& s);

/// Sum over actions of 1 - p(L(a, S)) under a Poisson pmf or Gaussian
/// density.
double cost_length_dist(const Labeling& s, const LengthModel& lm);

/// Dispatches on lm.variant.
double cost_length(const Labeling& s, const LengthModel& lm);

/// Sum over non-null frames of 1 - P(t, S[t]).
double cost_probability(const Labeling& s, const Matrix& class_probs);

double poisson_pmf(int x, double lambda);
double gaussian_density(double x, double mu, double sigma);

CostBreakdown cost_total(const Labeling& s, const Matrix& class_probs, const RankingConfig& cfg,
                         double cross_video_term = 0.0);

struct Selected {
  std::size_t index = 0;
  Labeling labeling;
  CostBreakdown cost;
};

/// Lowest total cost wins, ties to the earlier candidate. With
/// SelectionRule::random a uniformly drawn candidate is returned instead
/// (rng required). `extra_cost`, when non-empty, is added per candidate.
Selected select_best(const std::vector<Rollout>& candidates, const Matrix& class_probs, const RankingConfig& cfg,
                     int k, Rng* rng = nullptr, const std::vector<double>& extra_cost = {});

Selected select_best(const std::vector<Labeling>& candidates, const Matrix& class_probs, const RankingConfig& cfg,
                     Rng* rng = nullptr, const std::vector<double>& extra_cost = {});

/// Refits per-action lengths from segmentations of the training videos.
/// Actions missing from every segmentation keep their parameters.
LengthModel update_length_params(const LengthModel& lm, const std::vector<Labeling>& segmentations);

}  // namespace segdiscover
