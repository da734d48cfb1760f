#include "segdiscover/crossvideo/crossvideo.hpp"

#include <map>
#include <set>

namespace segdiscover {

std::string to_string(MatchObjective o) { return o == MatchObjective::triplet ? "triplet" : "contrastive"; }

std::string to_string(MatchPlacement p) {
  switch (p) {
    case MatchPlacement::none:
      return "none";
    case MatchPlacement::cost:
      return "cost";
    case MatchPlacement::loss:
      return "loss";
    case MatchPlacement::both:
      return "both";
  }
  return "none";
}

MatchObjective match_objective_from_string(const std::string& s) {
  if (s == "triplet") return MatchObjective::triplet;
  if (s == "contrastive") return MatchObjective::contrastive;
  throw InvalidArgument("unknown cross-video objective '" + s + "' (expected triplet or contrastive)");
}

MatchPlacement match_placement_from_string(const std::string& s) {
  if (s == "none") return MatchPlacement::none;
  if (s == "cost") return MatchPlacement::cost;
  if (s == "loss") return MatchPlacement::loss;
  if (s == "both") return MatchPlacement::both;
  throw InvalidArgument("unknown cross-video placement '" + s + "' (expected none, cost, loss or both)");
}

void CrossVideoConfig::validate() const {
  if (!(margin > 0.0)) throw InvalidArgument("CrossVideoConfig: margin must be > 0");
  if (!(loss_weight >= 0.0)) throw InvalidArgument("CrossVideoConfig: loss_weight must be >= 0");
  if (max_triplets_per_batch < 0) throw InvalidArgument("CrossVideoConfig: max_triplets_per_batch must be >= 0");
}

std::vector<SegmentRef> labeled_segments(const std::vector<Labeling>& labelings) {
  std::vector<SegmentRef> out;
  for (std::size_t v = 0; v < labelings.size(); ++v) {
    for (const Segment& r : labelings[v].runs()) {
      if (labelings[v].is_null(r.action)) continue;
      out.push_back({static_cast<int>(v), r.action, r.start, r.end});
    }
  }
  return out;
}

std::vector<Triplet> sample_triplets(const std::vector<Labeling>& labelings, const CrossVideoConfig& cfg, Rng& rng,
                                     std::optional<int> anchor_video) {
  std::vector<Triplet> out;
  if (labelings.size() < 2 || cfg.max_triplets_per_batch == 0) return out;
  const std::vector<SegmentRef> segs = labeled_segments(labelings);

  std::map<int, std::vector<std::size_t>> by_action;
  for (std::size_t i = 0; i < segs.size(); ++i) by_action[segs[i].action].push_back(i);

  std::vector<int> eligible;
  for (const auto& [action, idx] : by_action) {
    std::set<int> videos;
    bool in_anchor_video = !anchor_video;
    for (std::size_t i : idx) {
      videos.insert(segs[i].video);
      if (anchor_video && segs[i].video == *anchor_video) in_anchor_video = true;
    }
    const bool has_negative = idx.size() < segs.size();
    if (videos.size() >= 2 && in_anchor_video && has_negative) eligible.push_back(action);
  }
  if (eligible.empty()) return out;

  auto pick = [&](const std::vector<std::size_t>& pool) { return segs[pool[rng.index(pool.size())]]; };
  for (int draw = 0; draw < cfg.max_triplets_per_batch; ++draw) {
    const int action = eligible[static_cast<std::size_t>(draw) % eligible.size()];
    const auto& same = by_action[action];
    std::vector<std::size_t> anchors;
    for (std::size_t i : same) {
      if (!anchor_video || segs[i].video == *anchor_video) anchors.push_back(i);
    }
    const SegmentRef anchor = pick(anchors);
    std::vector<std::size_t> positives, negatives;
    for (std::size_t i : same) {
      if (segs[i].video != anchor.video) positives.push_back(i);
    }
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (segs[i].action != action) negatives.push_back(i);
    }
    const SegmentRef positive = pick(positives);
    out.push_back({anchor, positive, pick(negatives)});
  }
  return out;
}

namespace {

RowVector pooled(const SegmentRef& s, const std::vector<const Matrix*>& features) {
  const Matrix& f = *features.at(static_cast<std::size_t>(s.video));
  return f.middleRows(s.start, s.end - s.start).colwise().mean();
}

}  // namespace

double triplet_value(const Triplet& t, const std::vector<const Matrix*>& features, const CrossVideoConfig& cfg) {
  const RowVector a = pooled(t.anchor, features);
  const RowVector p = pooled(t.positive, features);
  const RowVector n = pooled(t.negative, features);
  return cfg.objective == MatchObjective::triplet ? triplet_objective(a, p, n, cfg.margin, cfg.hinge_triplet)
                                                  : contrastive_objective(a, p, n, cfg.margin);
}

double cross_video_cost(const std::vector<Labeling>& labelings, const std::vector<const Matrix*>& features,
                        const CrossVideoConfig& cfg, Rng& rng, std::optional<int> anchor_video) {
  if (features.size() != labelings.size()) throw InvalidArgument("cross_video_cost: one feature matrix per labeling");
  const std::vector<Triplet> triplets = sample_triplets(labelings, cfg, rng, anchor_video);
  if (triplets.empty()) return 0.0;
  double total = 0.0;
  for (const Triplet& t : triplets) total += triplet_value(t, features, cfg);
  return total / static_cast<double>(triplets.size());
}

}  // namespace segdiscover
