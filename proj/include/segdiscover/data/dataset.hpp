#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segdiscover/numcore/matrix.hpp"

namespace segdiscover {

/// Action id used for background frames in segment lists and files.
inline constexpr int kNullAction = -1;

/// Half-open frame interval [start, end) carrying one action.
struct Segment {
  int action = kNullAction;
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool is_null() const { return action == kNullAction; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// One video: T x D per-frame features.
struct FeatureSequence {
  std::string video_id;
  std::string task_id;
  Matrix features;

  int length() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

struct Dataset {
  std::string task_id;
  int feature_dim = 0;
  std::vector<FeatureSequence> videos;
  /// Parallel to `videos`; empty when the dataset carries no ground truth.
  std::vector<std::optional<std::vector<Segment>>> ground_truth;
  std::optional<int> k_true;

  bool has_ground_truth() const;
};

bool operator==(const Dataset& a, const Dataset& b);

struct Violation {
  std::string video_id;
  std::string rule;
};

/// Checks every structural invariant; never throws.
std::vector<Violation> validate(const Dataset& ds);

/// Checks one segment list against a video of length T. Empty when valid.
std::vector<std::string> segment_violations(const std::vector<Segment>& segments, int T,
                                            std::optional<int> k_true);

/// Per-frame action ids (kNullAction for background) from a segment list.
std::vector<int> frames_from_segments(const std::vector<Segment>& segments, int T);

/// Maximal constant runs of a per-frame action list.
std::vector<Segment> segments_from_frames(const std::vector<int>& frames);

/// Per-dimension affine map x -> (x - mean) * inv_std applied to every frame.
struct FeatureScaler {
  RowVector mean;
  RowVector inv_std;

  int dim() const { return static_cast<int>(mean.size()); }
  Matrix apply(const Matrix& features) const;
  friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;
};

/// The map that leaves D-dimensional features unchanged.
FeatureScaler identity_scaler(int dim);

/// Z-scores every dimension over all frames of the dataset. Dimensions with
/// standard deviation below 1e-12 are only centred.
FeatureScaler fit_scaler(const Dataset& ds);

}  // namespace segdiscover
