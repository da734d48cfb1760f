#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/numcore/matrix.hpp"
#include "segdiscover/numcore/rng.hpp"
#include "segdiscover/numcore/tape.hpp"
#include "segdiscover/ranking/labeling.hpp"

namespace segdiscover {

enum class MatchObjective { triplet, contrastive };
enum class MatchPlacement { none, cost, loss, both };

std::string to_string(MatchObjective o);
std::string to_string(MatchPlacement p);
MatchObjective match_objective_from_string(const std::string& s);
MatchPlacement match_placement_from_string(const std::string& s);

struct CrossVideoConfig {
  MatchObjective objective = MatchObjective::contrastive;
  MatchPlacement placement = MatchPlacement::loss;
  double margin = 1.0;
  double loss_weight = 0.1;
  int max_triplets_per_batch = 64;
  /// Clamp the triplet objective at zero. Off reproduces the unhinged form.
  bool hinge_triplet = true;

  bool in_cost() const { return placement == MatchPlacement::cost || placement == MatchPlacement::both; }
  bool in_loss() const { return placement == MatchPlacement::loss || placement == MatchPlacement::both; }
  void validate() const;

  friend bool operator==(const CrossVideoConfig&, const CrossVideoConfig&) = default;
};

/// max(0, ||a - p|| - ||a - n|| + margin), or the raw difference when
/// `hinge` is false.
template <typename DA, typename DP, typename DN>
typename DA::Scalar triplet_objective(const Eigen::MatrixBase<DA>& anchor, const Eigen::MatrixBase<DP>& positive,
                                      const Eigen::MatrixBase<DN>& negative, double margin, bool hinge = true) {
  using Scalar = typename DA::Scalar;
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw InvalidArgument("triplet_objective: dimension mismatch");
  }
  const Scalar v = (anchor - positive).norm() - (anchor - negative).norm() + Scalar(margin);
  return hinge ? std::max(Scalar(0), v) : v;
}

/// 0.5 ||a - p|| + 0.5 max(0, margin - ||a - n||).
template <typename DA, typename DP, typename DN>
typename DA::Scalar contrastive_objective(const Eigen::MatrixBase<DA>& anchor, const Eigen::MatrixBase<DP>& positive,
                                          const Eigen::MatrixBase<DN>& negative, double margin) {
  using Scalar = typename DA::Scalar;
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw InvalidArgument("contrastive_objective: dimension mismatch");
  }
  return Scalar(0.5) * (anchor - positive).norm() +
         Scalar(0.5) * std::max(Scalar(0), Scalar(margin) - (anchor - negative).norm());
}

/// A labeled, non-null run of one video in the batch.
struct SegmentRef {
  int video = 0;
  int action = 0;
  int start = 0;
  int end = 0;
};

struct Triplet {
  SegmentRef anchor, positive, negative;
};

/// Non-null runs of every labeling, in (video, time) order.
std::vector<SegmentRef> labeled_segments(const std::vector<Labeling>& labelings);

/// For each action labeled in at least two videos, draws anchor and
/// positive segments from different videos and a negative of another
/// action from any video. Eligible actions are visited round-robin, one
/// triplet per visit, for max_triplets_per_batch draws in total. Null runs
/// never participate. `anchor_video` restricts anchors to one video.
std::vector<Triplet> sample_triplets(const std::vector<Labeling>& labelings, const CrossVideoConfig& cfg, Rng& rng,
                                     std::optional<int> anchor_video = std::nullopt);

double triplet_value(const Triplet& t, const std::vector<const Matrix*>& features, const CrossVideoConfig& cfg);

/// Mean objective over triplets, computed on mean-pooled raw frame
/// features. Unweighted; zero when no triplet exists.
double cross_video_cost(const std::vector<Labeling>& labelings, const std::vector<const Matrix*>& features,
                        const CrossVideoConfig& cfg, Rng& rng, std::optional<int> anchor_video = std::nullopt);

/// Differentiable mean objective over `triplets`, pooled from per-video
/// activations already on the tape. Unweighted; a constant zero when the
/// triplet list is empty.
template <typename Scalar>
typename Tape<Scalar>::Var cross_video_loss(Tape<Scalar>& tape,
                                            const std::vector<typename Tape<Scalar>::Var>& activations,
                                            const std::vector<Triplet>& triplets, const CrossVideoConfig& cfg) {
  using Var = typename Tape<Scalar>::Var;
  if (triplets.empty()) return tape.constant(MatrixX<Scalar>::Zero(1, 1));
  std::vector<Var> anchors, positives, negatives;
  auto pool = [&](const SegmentRef& s) {
    if (s.video < 0 || s.video >= static_cast<int>(activations.size())) {
      throw InvalidArgument("cross_video_loss: triplet references a video outside the batch");
    }
    return tape.segment_mean(activations[static_cast<std::size_t>(s.video)], {{s.start, s.end}});
  };
  for (const Triplet& t : triplets) {
    anchors.push_back(pool(t.anchor));
    positives.push_back(pool(t.positive));
    negatives.push_back(pool(t.negative));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(triplets.size());
  const MatrixX<Scalar> margin = MatrixX<Scalar>::Constant(1, 1, Scalar(cfg.margin));
  Var total = tape.constant(MatrixX<Scalar>::Zero(1, 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Var d_pos = tape.row_distance(anchors[ui], positives[ui]);
    Var d_neg = tape.row_distance(anchors[ui], negatives[ui]);
    Var term;
    if (cfg.objective == MatchObjective::triplet) {
      term = tape.add_constant(tape.sub(d_pos, d_neg), margin);
      if (cfg.hinge_triplet) term = tape.relu(term);
    } else {
      Var pull = tape.scale(d_pos, Scalar(0.5));
      Var push = tape.scale(tape.relu(tape.add_constant(tape.scale(d_neg, Scalar(-1)), margin)), Scalar(0.5));
      term = tape.add(pull, push);
    }
    total = tape.add(total, term);
  }
  return tape.scale(total, Scalar(1) / Scalar(n));
}

}  // namespace segdiscover
