#include "segdiscover/eval/eval.hpp"

#include <algorithm>
#include <sstream>

#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

namespace {

void check_lengths(const Labeling& pred, const std::vector<int>& gt, const char* who) {
  if (pred.length() != static_cast<int>(gt.size())) {
    throw InvalidArgument(std::string(who) + ": prediction has " + std::to_string(pred.length()) +
                          " frames, ground truth " + std::to_string(gt.size()));
  }
}

/// Classes needed to hold both the ground truth and every mapped symbol.
int class_count(const std::vector<int>& gt, const Mapping& mapping) {
  int k = 0;
  for (int g : gt) k = std::max(k, g + 1);
  for (int c : mapping.to_class) k = std::max(k, c + 1);
  return k;
}

}  // namespace

CountMatrix overlap_matrix(const Labeling& pred, const std::vector<int>& gt, int k_true) {
  check_lengths(pred, gt, "overlap_matrix");
  CountMatrix m = CountMatrix::Zero(pred.k, k_true);
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const int p = pred.symbols[t];
    const int g = gt[t];
    if (pred.is_null(p) || g < 0) continue;
    if (g >= k_true) throw InvalidArgument("overlap_matrix: ground-truth class outside k_true");
    ++m(p, g);
  }
  return m;
}

CountMatrix confusion(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping, int k_true) {
  check_lengths(pred, gt, "confusion");
  CountMatrix c = CountMatrix::Zero(k_true, k_true + 1);
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const int g = gt[t];
    if (g < 0) continue;
    if (g >= k_true) throw InvalidArgument("confusion: ground-truth class outside k_true");
    const int mapped = mapping(pred.symbols[t]);
    ++c(g, mapped == kUnmatched || mapped >= k_true ? k_true : mapped);
  }
  return c;
}

CountMatrix background_row(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping, int k_true) {
  check_lengths(pred, gt, "background_row");
  CountMatrix b = CountMatrix::Zero(1, k_true + 1);
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (gt[t] >= 0) continue;
    const int mapped = mapping(pred.symbols[t]);
    ++b(0, mapped == kUnmatched || mapped >= k_true ? k_true : mapped);
  }
  return b;
}

double mof_from_confusion(const CountMatrix& c) {
  const std::int64_t total = c.sum();
  if (total == 0) return 0.0;
  const Eigen::Index k = c.rows();
  return static_cast<double>(c.leftCols(k).diagonal().sum()) / static_cast<double>(total);
}

double jaccard_from_confusion(const CountMatrix& c, const CountMatrix& background) {
  const Eigen::Index k = c.rows();
  if (background.rows() != 1 || background.cols() != c.cols()) {
    throw InvalidArgument("jaccard_from_confusion: background row has the wrong shape");
  }
  double sum = 0.0;
  int classes = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::int64_t inter = c(i, i);
    const std::int64_t uni = c.row(i).sum() + c.col(i).sum() + background(0, i) - inter;
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++classes;
  }
  return classes ? sum / classes : 0.0;
}

double mof(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping) {
  check_lengths(pred, gt, "mof");
  return mof_from_confusion(confusion(pred, gt, mapping, class_count(gt, mapping)));
}

double jaccard(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping) {
  check_lengths(pred, gt, "jaccard");
  const int k = class_count(gt, mapping);
  return jaccard_from_confusion(confusion(pred, gt, mapping, k), background_row(pred, gt, mapping, k));
}

double F1Counts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

F1Counts& F1Counts::operator+=(const F1Counts& o) {
  true_positives += o.true_positives;
  predicted += o.predicted;
  ground_truth += o.ground_truth;
  return *this;
}

F1Counts interval_matches(const std::vector<Segment>& pred, const std::vector<Segment>& gt, const Mapping& mapping,
                          F1Rule rule) {
  F1Counts c;
  std::vector<const Segment*> gt_segs;
  for (const Segment& g : gt) {
    if (g.action != kNullAction) gt_segs.push_back(&g);
  }
  c.ground_truth = static_cast<int>(gt_segs.size());
  std::vector<char> claimed(gt_segs.size(), 0);
  for (const Segment& p : pred) {
    if (p.action == kNullAction) continue;
    ++c.predicted;
    const int cls = mapping(p.action);
    if (cls == kUnmatched) continue;
    std::ptrdiff_t best = -1;
    int best_overlap = 0;
    for (std::size_t j = 0; j < gt_segs.size(); ++j) {
      const Segment& g = *gt_segs[j];
      if (claimed[j] || g.action != cls) continue;
      const int overlap = std::min(p.end, g.end) - std::max(p.start, g.start);
      bool hit = false;
      if (rule == F1Rule::midpoint) {
        const int mid = (p.start + p.end) / 2;
        hit = mid >= g.start && mid < g.end;
      } else {
        hit = 2 * overlap >= p.end - p.start;
      }
      if (hit && overlap > best_overlap) {
        best = static_cast<std::ptrdiff_t>(j);
        best_overlap = overlap;
      }
    }
    if (best >= 0) {
      claimed[static_cast<std::size_t>(best)] = 1;
      ++c.true_positives;
    }
  }
  return c;
}

double interval_f1(const std::vector<Segment>& pred, const std::vector<Segment>& gt, const Mapping& mapping,
                   F1Rule rule) {
  return interval_matches(pred, gt, mapping, rule).f1();
}

namespace {

EvalReport report_for(const Labeling& pred, const std::vector<Segment>& gt_segs, const std::vector<int>& gt,
                      const Mapping& mapping, int k_true, F1Rule rule) {
  EvalReport r;
  r.mapping = mapping;
  r.confusion = confusion(pred, gt, mapping, k_true);
  r.mof = mof_from_confusion(r.confusion);
  r.background = background_row(pred, gt, mapping, k_true);
  r.jaccard = jaccard_from_confusion(r.confusion, r.background);
  r.f1_counts = interval_matches(segments_from_labeling(pred), gt_segs, mapping, rule);
  r.f1 = r.f1_counts.f1();
  return r;
}

}  // namespace

TaskEval evaluate_task(const std::vector<std::string>& ids, const std::vector<Labeling>& preds,
                       const std::vector<std::vector<Segment>>& gts, int k_true, const EvalOptions& options) {
  if (ids.size() != preds.size() || preds.size() != gts.size()) {
    throw InvalidArgument("evaluate_task: ids, predictions and ground truth differ in count");
  }
  if (k_true < 1) throw InvalidArgument("evaluate_task: k_true must be >= 1");
  const int k_pred = preds.empty() ? 0 : preds.front().k;
  std::vector<std::vector<int>> frames(preds.size());
  CountMatrix pooled = CountMatrix::Zero(k_pred, k_true);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].k != k_pred) throw InvalidArgument("evaluate_task: predictions use different k");
    frames[i] = frames_from_segments(gts[i], preds[i].length());
    pooled += overlap_matrix(preds[i], frames[i], k_true);
  }

  TaskEval out;
  out.video_ids = ids;
  out.aggregate.confusion = CountMatrix::Zero(k_true, k_true + 1);
  out.aggregate.background = CountMatrix::Zero(1, k_true + 1);
  if (!options.per_video) out.aggregate.mapping = hungarian_match(pooled).mapping;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Mapping mapping = options.per_video
                                ? hungarian_match(overlap_matrix(preds[i], frames[i], k_true)).mapping
                                : out.aggregate.mapping;
    EvalReport r = report_for(preds[i], gts[i], frames[i], mapping, k_true, options.f1_rule);
    out.aggregate.confusion += r.confusion;
    out.aggregate.background += r.background;
    out.aggregate.f1_counts += r.f1_counts;
    out.videos.push_back(std::move(r));
  }
  out.aggregate.mof = mof_from_confusion(out.aggregate.confusion);
  out.aggregate.jaccard = jaccard_from_confusion(out.aggregate.confusion, out.aggregate.background);
  out.aggregate.f1 = out.aggregate.f1_counts.f1();
  return out;
}

Labeling uniform_labeling(int T, int k) {
  if (T < 0 || k < 1) throw InvalidArgument("uniform_labeling: need T >= 0 and k >= 1");
  Labeling l{std::vector<int>(static_cast<std::size_t>(T)), k};
  const int base = T / k;
  for (int t = 0; t < T; ++t) l.symbols[static_cast<std::size_t>(t)] = base > 0 ? std::min(k - 1, t / base) : t;
  return l;
}

nlohmann::json to_json(const EvalReport& r, const std::vector<std::string>& metrics) {
  nlohmann::json j;
  j["mapping"] = r.mapping.to_class;
  for (const std::string& m : metrics) {
    if (m == "mof") j["mof"] = r.mof;
    else if (m == "jaccard") j["jaccard"] = r.jaccard;
    else if (m == "f1") {
      j["f1"] = r.f1;
      j["f1_counts"] = {{"true_positives", r.f1_counts.true_positives},
                        {"predicted", r.f1_counts.predicted},
                        {"ground_truth", r.f1_counts.ground_truth}};
    } else {
      throw InvalidArgument("unknown metric '" + m + "' (expected mof, jaccard or f1)");
    }
  }
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    std::vector<std::int64_t> row(r.confusion.row(i).begin(), r.confusion.row(i).end());
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

nlohmann::json to_json(const TaskEval& t, const std::vector<std::string>& metrics) {
  nlohmann::json videos = nlohmann::json::object();
  for (std::size_t i = 0; i < t.videos.size(); ++i) videos[t.video_ids[i]] = to_json(t.videos[i], metrics);
  return {{"aggregate", to_json(t.aggregate, metrics)}, {"videos", videos}};
}

std::string confusion_csv(const CountMatrix& c) {
  std::ostringstream os;
  os << "gt_class";
  for (Eigen::Index j = 0; j + 1 < c.cols(); ++j) os << ",pred_" << j;
  os << ",unmatched\n";
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < c.cols(); ++j) os << ',' << c(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace segdiscover
