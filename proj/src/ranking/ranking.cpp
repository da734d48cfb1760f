#include "segdiscover/ranking/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

namespace {
constexpr double kSigmaFloor = 1.0;
}

std::string to_string(LengthVariant v) {
  switch (v) {
    case LengthVariant::average:
      return "average";
    case LengthVariant::poisson:
      return "poisson";
    case LengthVariant::gaussian:
      return "gaussian";
  }
  return "average";
}

LengthVariant length_variant_from_string(const std::string& s) {
  if (s == "average") return LengthVariant::average;
  if (s == "poisson") return LengthVariant::poisson;
  if (s == "gaussian") return LengthVariant::gaussian;
  throw InvalidArgument("unknown length model '" + s + "' (expected average, poisson or gaussian)");
}

void LengthModel::reset(int k, double expected_length) {
  lambda.assign(static_cast<std::size_t>(k), expected_length);
  mu.assign(static_cast<std::size_t>(k), expected_length);
  sigma.assign(static_cast<std::size_t>(k), 1.0);
}

bool LengthModel::has_parameters(int k) const {
  const auto n = static_cast<std::size_t>(k);
  return lambda.size() == n && mu.size() == n && sigma.size() == n;
}

double poisson_pmf(int x, double lambda) {
  if (x < 0) return 0.0;
  if (!(lambda > 0.0)) throw InvalidArgument("poisson_pmf: lambda must be > 0");
  return std::exp(x * std::log(lambda) - lambda - std::lgamma(x + 1.0));
}

double gaussian_density(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_density: sigma must be > 0");
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double cost_occurrence(const Labeling& s) {
  double cost = 0.0;
  for (int runs : s.run_counts()) cost += runs == 0 ? 1.0 : static_cast<double>(runs - 1);
  return cost;
}

double cost_length_avg(const Labeling& s) {
  if (s.k <= 0) return 0.0;
  const std::vector<int> len = s.action_lengths();
  double mean = 0.0;
  for (int l : len) mean += l;
  mean /= s.k;
  double var = 0.0;
  for (int l : len) var += (l - mean) * (l - mean);
  return std::sqrt(var / s.k);
}

double cost_length_dist(const Labeling& s, const LengthModel& lm) {
  const std::vector<int> len = s.action_lengths();
  const bool per_action = lm.learned && lm.has_parameters(s.k);
  const double fallback = std::max(1.0, static_cast<double>(s.length()) / std::max(1, s.k));
  double cost = 0.0;
  for (int a = 0; a < s.k; ++a) {
    const auto i = static_cast<std::size_t>(a);
    double p = 0.0;
    if (lm.variant == LengthVariant::gaussian) {
      p = per_action ? gaussian_density(len[i], lm.mu[i], lm.sigma[i]) : gaussian_density(len[i], fallback, 1.0);
    } else {
      p = poisson_pmf(len[i], per_action ? lm.lambda[i] : fallback);
    }
    cost += 1.0 - p;
  }
  return cost;
}

double cost_length(const Labeling& s, const LengthModel& lm) {
  return lm.variant == LengthVariant::average ? cost_length_avg(s) : cost_length_dist(s, lm);
}

double cost_probability(const Labeling& s, const Matrix& class_probs) {
  if (class_probs.rows() != s.length()) {
    throw InvalidArgument("cost_probability: labeling has " + std::to_string(s.length()) + " frames, P has " +
                          std::to_string(class_probs.rows()) + " rows");
  }
  double cost = 0.0;
  for (int t = 0; t < s.length(); ++t) {
    const int sym = s.symbols[static_cast<std::size_t>(t)];
    if (s.is_null(sym)) continue;
    if (sym >= class_probs.cols()) throw InvalidArgument("cost_probability: symbol outside P columns");
    cost += 1.0 - class_probs(t, sym);
  }
  return cost;
}

CostBreakdown cost_total(const Labeling& s, const Matrix& class_probs, const RankingConfig& cfg,
                         double cross_video_term) {
  const double frames = std::max(1, s.non_null_frames());
  const double g1 = cfg.gamma1.value_or(1.0 / std::max(1, s.k));
  const double g2 = cfg.gamma2.value_or(1.0 / frames);
  const double g3 = cfg.gamma3.value_or(1.0 / frames);
  CostBreakdown c;
  if (g1 != 0.0) c.occurrence = cost_occurrence(s);
  if (g2 != 0.0) c.length = cost_length(s, cfg.length_model);
  if (g3 != 0.0) c.probability = cost_probability(s, class_probs);
  c.cross_video = cross_video_term;
  c.total = g1 * c.occurrence + g2 * c.length + g3 * c.probability + cross_video_term;
  return c;
}

Selected select_best(const std::vector<Labeling>& candidates, const Matrix& class_probs, const RankingConfig& cfg,
                     Rng* rng, const std::vector<double>& extra_cost) {
  if (candidates.empty()) throw InvalidArgument("select_best: no candidates");
  if (!extra_cost.empty() && extra_cost.size() != candidates.size()) {
    throw InvalidArgument("select_best: extra_cost size differs from candidate count");
  }
  Selected best;
  bool have = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    CostBreakdown c = cost_total(candidates[i], class_probs, cfg, extra_cost.empty() ? 0.0 : extra_cost[i]);
    if (!have || c.total < best.cost.total) {
      best.index = i;
      best.cost = c;
      have = true;
    }
  }
  if (cfg.selection == SelectionRule::random) {
    if (rng == nullptr) throw InvalidArgument("select_best: random selection needs an rng");
    best.index = rng->index(candidates.size());
    best.cost = cost_total(candidates[best.index], class_probs, cfg,
                           extra_cost.empty() ? 0.0 : extra_cost[best.index]);
  }
  best.labeling = candidates[best.index];
  return best;
}

Selected select_best(const std::vector<Rollout>& candidates, const Matrix& class_probs, const RankingConfig& cfg,
                     int k, Rng* rng, const std::vector<double>& extra_cost) {
  std::vector<Labeling> labelings;
  labelings.reserve(candidates.size());
  for (const Rollout& r : candidates) labelings.push_back(Labeling{r.symbols, k});
  return select_best(labelings, class_probs, cfg, rng, extra_cost);
}

LengthModel update_length_params(const LengthModel& lm, const std::vector<Labeling>& segmentations) {
  if (segmentations.empty()) return lm;
  const int k = segmentations.front().k;
  LengthModel out = lm;
  if (!out.has_parameters(k)) {
    double total = 0.0;
    for (const Labeling& s : segmentations) total += s.length();
    out.reset(k, std::max(1.0, total / segmentations.size() / k));
  }
  std::vector<std::vector<int>> lengths;
  lengths.reserve(segmentations.size());
  for (const Labeling& s : segmentations) lengths.push_back(s.action_lengths());
  const double rate = lm.ema_rate;
  for (int a = 0; a < k; ++a) {
    std::vector<double> observed;
    for (const auto& len : lengths) {
      if (len[static_cast<std::size_t>(a)] > 0) observed.push_back(len[static_cast<std::size_t>(a)]);
    }
    if (observed.empty()) continue;
    double mean = 0.0;
    for (double v : observed) mean += v;
    mean /= static_cast<double>(observed.size());
    double var = 0.0;
    for (double v : observed) var += (v - mean) * (v - mean);
    const double sd = observed.size() > 1 ? std::sqrt(var / static_cast<double>(observed.size() - 1)) : 0.0;
    const auto i = static_cast<std::size_t>(a);
    out.lambda[i] = rate * out.lambda[i] + (1.0 - rate) * mean;
    out.mu[i] = rate * out.mu[i] + (1.0 - rate) * mean;
    out.sigma[i] = std::max(kSigmaFloor, rate * out.sigma[i] + (1.0 - rate) * sd);
  }
  return out;
}

}  // namespace segdiscover
