#include "segdiscover/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

bool Dataset::has_ground_truth() const {
  for (const auto& gt : ground_truth) {
    if (gt) return true;
  }
  return false;
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.task_id != b.task_id || a.feature_dim != b.feature_dim || a.k_true != b.k_true ||
      a.videos.size() != b.videos.size() || a.ground_truth != b.ground_truth) {
    return false;
  }
  for (std::size_t i = 0; i < a.videos.size(); ++i) {
    const auto& va = a.videos[i];
    const auto& vb = b.videos[i];
    if (va.video_id != vb.video_id || va.task_id != vb.task_id ||
        va.features.rows() != vb.features.rows() || va.features.cols() != vb.features.cols() ||
        va.features != vb.features) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> segment_violations(const std::vector<Segment>& segments, int T,
                                            std::optional<int> k_true) {
  std::vector<std::string> out;
  if (segments.empty()) {
    out.push_back("ground truth has no segments");
    return out;
  }
  int cursor = 0;
  for (const Segment& s : segments) {
    if (s.start >= s.end) out.push_back("empty or inverted segment [" + std::to_string(s.start) + "," +
                                        std::to_string(s.end) + ")");
    if (s.start != cursor) {
      out.push_back((s.start < cursor ? "overlapping" : "gap before") + std::string(" segment at frame ") +
                    std::to_string(s.start));
    }
    if (s.action < kNullAction || (k_true && s.action >= *k_true)) {
      out.push_back("action " + std::to_string(s.action) + " out of range");
    }
    cursor = s.end;
  }
  if (cursor != T) {
    out.push_back("segments end at " + std::to_string(cursor) + " but video has " + std::to_string(T) +
                  " frames");
  }
  return out;
}

std::vector<Violation> validate(const Dataset& ds) {
  std::vector<Violation> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const FeatureSequence& v = ds.videos[i];
    if (!ids.insert(v.video_id).second) out.push_back({v.video_id, "duplicate video id"});
    if (v.length() < 1) out.push_back({v.video_id, "video has no frames"});
    if (v.dim() != ds.feature_dim) {
      out.push_back({v.video_id, "feature dim " + std::to_string(v.dim()) + " != dataset dim " +
                                     std::to_string(ds.feature_dim)});
    }
    if (!v.features.allFinite()) out.push_back({v.video_id, "non-finite feature value"});
  }
  if (!ds.ground_truth.empty()) {
    if (ds.ground_truth.size() != ds.videos.size()) {
      out.push_back({"", "ground truth list does not match the video list"});
    } else {
      for (std::size_t i = 0; i < ds.videos.size(); ++i) {
        if (!ds.ground_truth[i]) continue;
        for (auto& rule : segment_violations(*ds.ground_truth[i], ds.videos[i].length(), ds.k_true)) {
          out.push_back({ds.videos[i].video_id, rule});
        }
      }
    }
  }
  return out;
}

std::vector<int> frames_from_segments(const std::vector<Segment>& segments, int T) {
  std::vector<int> frames(static_cast<std::size_t>(T), kNullAction);
  for (const Segment& s : segments) {
    for (int t = std::max(0, s.start); t < std::min(T, s.end); ++t) frames[static_cast<std::size_t>(t)] = s.action;
  }
  return frames;
}

std::vector<Segment> segments_from_frames(const std::vector<int>& frames) {
  std::vector<Segment> out;
  for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
    const int a = frames[static_cast<std::size_t>(t)];
    if (out.empty() || out.back().action != a) {
      out.push_back({a, t, t + 1});
    } else {
      out.back().end = t + 1;
    }
  }
  return out;
}

Matrix FeatureScaler::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) {
    throw InvalidArgument("feature scaler expects dim " + std::to_string(mean.size()) + ", got " +
                          std::to_string(features.cols()));
  }
  return ((features.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
}

FeatureScaler identity_scaler(int dim) {
  return {RowVector::Zero(dim), RowVector::Ones(dim)};
}

FeatureScaler fit_scaler(const Dataset& ds) {
  const int D = ds.feature_dim;
  RowVector sum = RowVector::Zero(D);
  double frames = 0.0;
  for (const auto& v : ds.videos) {
    sum += v.features.colwise().sum();
    frames += static_cast<double>(v.features.rows());
  }
  if (frames == 0.0) return identity_scaler(D);
  const RowVector mean = sum / frames;
  RowVector sq = RowVector::Zero(D);
  for (const auto& v : ds.videos) sq += (v.features.rowwise() - mean).array().square().matrix().colwise().sum();
  RowVector inv_std(D);
  for (int d = 0; d < D; ++d) {
    const double sd = std::sqrt(sq[d] / frames);
    inv_std[d] = sd < 1e-12 ? 1.0 : 1.0 / sd;
  }
  return {mean, inv_std};
}

}  // namespace segdiscover
