#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segdiscover/crossvideo/crossvideo.hpp"
#include "segdiscover/data/dataset.hpp"
#include "segdiscover/model/model.hpp"
#include "segdiscover/numcore/optim.hpp"
#include "segdiscover/ranking/ranking.hpp"

namespace segdiscover {

struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  double base_lr = 0.1;
  double momentum = 0.9;
  double grad_clip = 10.0;
  ModelConfig model;
  RankingConfig ranking;
  CrossVideoConfig cross_video;
  std::uint64_t seed = 0;
  /// 0 disables periodic checkpoints.
  int checkpoint_every = 0;
  int length_update_every = 1;
  /// Null frames of a self-label are ordinary targets of both
  /// cross-entropy terms; false masks them out of the loss.
  bool null_as_target = true;
  /// Z-score features with statistics of the training set before they
  /// reach the model. The fitted map is part of the checkpoint.
  bool standardize_features = true;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_cost = 0.0;
  double mean_loss = 0.0;
  double lr = 0.0;  // rate used by the last step of the epoch
  double mean_runs = 0.0;
  int skipped_videos = 0;
  LengthModel lengths;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// Everything needed to resume training at an epoch boundary.
struct TrainState {
  ModelConfig model_config;
  ModelParams params;
  OptimState opt;
  LengthModel lengths;
  FeatureScaler scaler;
  int epochs_done = 0;
};

struct VideoSelection {
  bool skipped = false;  // fewer than 2 frames
  Rollout rollout;
  Labeling labeling;
  CostBreakdown cost;
};

/// E-step for one batch. `videos` are the batch members, `global_index`
/// their positions in the dataset (used to derive per-video random
/// streams). `ranking` carries the current length model.
std::vector<VideoSelection> self_label_batch(const ModelParams& params, const std::vector<const Matrix*>& videos,
                                             const std::vector<int>& global_index, const TrainConfig& cfg,
                                             const RankingConfig& ranking, const Rng& rng);

/// M-step: one clipped SGD-momentum update on the mean self-labeling loss
/// (plus the weighted cross-video loss when configured). Returns the loss.
/// `ids` name the videos in diagnostics.
double optimize_step(ModelParams& params, OptimState& opt, const std::vector<const Matrix*>& videos,
                     const std::vector<std::string>& ids, const std::vector<VideoSelection>& selections,
                     const TrainConfig& cfg, const Rng& rng);

/// Fresh state: initialized params, zero velocities, initial lengths and
/// the feature scaler fitted on `ds` (identity when disabled).
TrainState initial_state(const Dataset& ds, const TrainConfig& cfg);

struct TrainOptions {
  std::optional<TrainState> resume;
  /// Periodic checkpoints go to "<checkpoint_prefix>.epoch<N>".
  std::optional<std::filesystem::path> checkpoint_prefix;
  /// Called after every completed epoch.
  std::function<void(const EpochRecord&)> on_epoch;
  /// Print per-video warnings (skipped videos) to stderr.
  bool verbose = false;
};

struct TrainResult {
  TrainState state;
  TrainLog log;
};

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const TrainOptions& options = {});

/// Model section followed by optimizer, length-model and progress sections.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const TrainState& state);

/// Greedy segmentation of raw features through the state's scaler.
Labeling segment_video(const TrainState& state, const Matrix& features);

/// segment_video over every video of the dataset.
std::vector<Labeling> segment_dataset(const TrainState& state, const Dataset& ds);

}  // namespace segdiscover
