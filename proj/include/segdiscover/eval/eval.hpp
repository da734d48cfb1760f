#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "segdiscover/data/dataset.hpp"
#include "segdiscover/eval/hungarian.hpp"
#include "segdiscover/ranking/labeling.hpp"

namespace segdiscover {

// Ground truth is handled frame-wise (frames_from_segments) as class
// indices with kNullAction for background frames. Predictions are Labelings; their null symbol never
// maps to a class.

/// pred.k x k_true counts of frames where both sides are non-null.
CountMatrix overlap_matrix(const Labeling& pred, const std::vector<int>& gt, int k_true);

/// Fraction of non-background ground-truth frames whose mapped prediction
/// equals the ground truth.
double mof(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping);

/// Per-class frame IoU averaged over classes present in either side.
/// Predictions on background frames count towards their class's union.
double jaccard(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping);

enum class F1Rule {
  midpoint,  // the predicted interval's midpoint frame lies inside the GT interval
  overlap    // at least half of the predicted interval lies inside the GT interval
};

struct F1Counts {
  int true_positives = 0;
  int predicted = 0;
  int ground_truth = 0;

  double precision() const { return predicted ? static_cast<double>(true_positives) / predicted : 0.0; }
  double recall() const { return ground_truth ? static_cast<double>(true_positives) / ground_truth : 0.0; }
  double f1() const;
  F1Counts& operator+=(const F1Counts& o);
};

/// Detection counts over non-null segments. Each GT segment is claimed by
/// at most one prediction, in prediction order.
F1Counts interval_matches(const std::vector<Segment>& pred, const std::vector<Segment>& gt, const Mapping& mapping,
                          F1Rule rule = F1Rule::midpoint);

double interval_f1(const std::vector<Segment>& pred, const std::vector<Segment>& gt, const Mapping& mapping,
                   F1Rule rule = F1Rule::midpoint);

/// k_true x (k_true + 1). Entry (i, j < k_true) counts frames of class i
/// whose prediction maps to j; the last column collects predictions that
/// are null or unmatched. Background GT frames are not counted.
CountMatrix confusion(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping, int k_true);

/// 1 x (k_true + 1): background GT frames by mapped prediction, in the
/// column layout of confusion().
CountMatrix background_row(const Labeling& pred, const std::vector<int>& gt, const Mapping& mapping, int k_true);

struct EvalReport {
  Mapping mapping;
  double mof = 0.0;
  double jaccard = 0.0;
  double f1 = 0.0;
  F1Counts f1_counts;
  CountMatrix confusion;
  CountMatrix background;
};

/// MoF and Jaccard read off a confusion matrix.
double mof_from_confusion(const CountMatrix& c);
double jaccard_from_confusion(const CountMatrix& c, const CountMatrix& background);

struct EvalOptions {
  /// Match each video separately instead of once over the pooled
  /// overlap of the whole task.
  bool per_video = false;
  F1Rule f1_rule = F1Rule::midpoint;
};

struct TaskEval {
  EvalReport aggregate;
  std::vector<std::string> video_ids;
  std::vector<EvalReport> videos;
};

TaskEval evaluate_task(const std::vector<std::string>& ids, const std::vector<Labeling>& preds,
                       const std::vector<std::vector<Segment>>& gts, int k_true, const EvalOptions& options = {});

/// k equal-length segments, the last absorbing the remainder.
Labeling uniform_labeling(int T, int k);

/// `metrics` selects which of "mof", "jaccard", "f1" are written; the
/// mapping and confusion matrix are always included.
nlohmann::json to_json(const EvalReport& r, const std::vector<std::string>& metrics);
nlohmann::json to_json(const TaskEval& t, const std::vector<std::string>& metrics);
std::string confusion_csv(const CountMatrix& c);

}  // namespace segdiscover
