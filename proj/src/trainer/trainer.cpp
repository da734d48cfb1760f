#include "segdiscover/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <utility>

#include "segdiscover/data/io.hpp"
#include "segdiscover/model/checkpoint.hpp"
#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/numcore/parallel.hpp"

namespace segdiscover {

namespace {

// Sub-stream keys of the training seed.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kEStepStream = 0x65737470;
constexpr std::uint64_t kMStepStream = 0x6d737470;
// Keys below a video's stream; candidate m already uses key m.
constexpr std::uint64_t kSelectKey = 1ull << 40;
constexpr std::uint64_t kCostTripletKey = (1ull << 40) + 1;

constexpr char kOptimMagic[4] = {'O', 'P', 'T', 'M'};
constexpr char kLengthMagic[4] = {'L', 'E', 'N', 'M'};
constexpr char kScalerMagic[4] = {'N', 'O', 'R', 'M'};
constexpr char kProgressMagic[4] = {'P', 'R', 'O', 'G'};

std::int64_t total_steps(const TrainConfig& cfg, std::size_t n_videos) {
  const auto per_epoch = static_cast<std::int64_t>((n_videos + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                                   static_cast<std::size_t>(cfg.batch_size));
  return std::max<std::int64_t>(1, per_epoch * cfg.epochs);
}

std::vector<Matrix> zeros_like(const ModelParams& p) {
  std::vector<Matrix> out;
  for (const Matrix* m : param_pointers(p)) out.push_back(Matrix::Zero(m->rows(), m->cols()));
  return out;
}

void write_doubles(ByteWriter& out, const std::vector<double>& v) {
  out.u32(static_cast<std::uint32_t>(v.size()));
  for (double x : v) out.f64(x);
}

std::vector<double> read_doubles(ByteReader& in) {
  std::vector<double> v(in.u32());
  for (double& x : v) x = in.f64();
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("TrainConfig: " + what);
  };
  need(epochs >= 0, "epochs must be >= 0");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(base_lr > 0, "base_lr must be > 0");
  need(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  need(grad_clip > 0, "grad_clip must be > 0");
  need(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  need(length_update_every >= 1, "length_update_every must be >= 1");
  need(!(ranking.gamma1 == 0.0 && ranking.gamma2 == 0.0 && ranking.gamma3 == 0.0),
       "at least one gamma must be positive");
  model.validate();
  cross_video.validate();
}

std::vector<VideoSelection> self_label_batch(const ModelParams& params, const std::vector<const Matrix*>& videos,
                                             const std::vector<int>& global_index, const TrainConfig& cfg,
                                             const RankingConfig& ranking, const Rng& rng) {
  if (videos.empty()) throw InvalidArgument("self_label_batch: empty batch");
  if (global_index.size() != videos.size()) throw InvalidArgument("self_label_batch: index count mismatch");
  const std::size_t n = videos.size();
  const int k = cfg.model.k;
  std::vector<VideoSelection> out(n);
  std::vector<std::vector<Rollout>> candidates(n);
  std::vector<Matrix> probs(n);
  auto video_rng = [&](std::size_t i) { return rng.split(static_cast<std::uint64_t>(global_index[i])); };

  parallel_for(n, [&](std::size_t i) {
    if (videos[i]->rows() < 2) {
      out[i].skipped = true;
      out[i].labeling.k = k;
      return;
    }
    const Rng vr = video_rng(i);
    probs[i] = classify_frames(params, *videos[i]);
    candidates[i] = generate_candidates(params, cfg.model, *videos[i], cfg.model.M, vr, true);
    Rng select = vr.split(kSelectKey);
    Selected s = select_best(candidates[i], probs[i], ranking, k, &select);
    out[i].rollout = candidates[i][s.index];
    out[i].labeling = std::move(s.labeling);
    out[i].cost = s.cost;
  });

  if (!cfg.cross_video.in_cost()) return out;

  // Re-rank each video's candidates by their agreement with the other
  // videos' first-pass selections.
  std::vector<Labeling> first(n);
  for (std::size_t i = 0; i < n; ++i) first[i] = out[i].labeling;
  std::vector<VideoSelection> second = out;
  parallel_for(n, [&](std::size_t i) {
    if (out[i].skipped) return;
    const Rng vr = video_rng(i);
    std::vector<Labeling> labelings = first;
    std::vector<double> extra(candidates[i].size());
    for (std::size_t m = 0; m < candidates[i].size(); ++m) {
      labelings[i] = Labeling{candidates[i][m].symbols, k};
      Rng triplet_rng = vr.split(kCostTripletKey);
      extra[m] = cfg.cross_video.loss_weight *
                 cross_video_cost(labelings, videos, cfg.cross_video, triplet_rng, static_cast<int>(i));
    }
    Rng select = vr.split(kSelectKey);
    Selected s = select_best(candidates[i], probs[i], ranking, k, &select, extra);
    second[i].rollout = candidates[i][s.index];
    second[i].labeling = std::move(s.labeling);
    second[i].cost = s.cost;
  });
  return second;
}

double optimize_step(ModelParams& params, OptimState& opt, const std::vector<const Matrix*>& videos,
                     const std::vector<std::string>& ids, const std::vector<VideoSelection>& selections,
                     const TrainConfig& cfg, const Rng& rng) {
  if (videos.size() != selections.size() || ids.size() != videos.size()) {
    throw InvalidArgument("optimize_step: batch size mismatch");
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (!selections[i].skipped) active.push_back(i);
  }
  if (active.empty()) return 0.0;

  const std::size_t n = active.size();
  std::vector<std::vector<Matrix>> grads(n);
  std::vector<double> losses(n);
  parallel_for(n, [&](std::size_t a) {
    const std::size_t i = active[a];
    const VideoSelection& sel = selections[i];
    Tape<double> tape;
    const ParamVars<double> pv = bind_params(tape, params);
    const RolloutVars<double> rv = replay_rollout(tape, pv, cfg.model, *videos[i], sel.rollout);
    std::vector<int> targets = sel.labeling.symbols;
    if (!cfg.null_as_target) {
      for (int& t : targets) {
        if (sel.labeling.is_null(t)) t = -1;
      }
    }
    auto loss = self_label_loss(tape, rv, targets);
    losses[a] = tape.scalar(loss);
    if (!std::isfinite(losses[a])) {
      throw NumericError("non-finite self-labeling loss on video '" + ids[i] + "'");
    }
    tape.backward(loss);
    for (const auto& v : pv.all()) grads[a].push_back(tape.grad(v));
  });

  std::vector<Matrix> total = zeros_like(params);
  double loss = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < total.size(); ++p) total[p] += grads[a][p];
    loss += losses[a];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (Matrix& g : total) g *= inv;
  loss *= inv;

  const CrossVideoConfig& cv = cfg.cross_video;
  if (cv.in_loss() && cv.loss_weight > 0.0) {
    std::vector<Labeling> labelings;
    for (std::size_t i : active) labelings.push_back(selections[i].labeling);
    Rng triplet_rng = rng;
    const std::vector<Triplet> triplets = sample_triplets(labelings, cv, triplet_rng);
    if (!triplets.empty()) {
      Tape<double> tape;
      const ParamVars<double> pv = bind_params(tape, params);
      std::vector<Tape<double>::Var> hidden;
      for (std::size_t i : active) {
        const auto& ch = pv.classification_head;
        hidden.push_back(tape.tanh(tape.affine(tape.constant(*videos[i]), ch.W1, ch.b1)));
      }
      auto term = cross_video_loss(tape, hidden, triplets, cv);
      const double value = tape.scalar(term);
      if (!std::isfinite(value)) throw NumericError("non-finite cross-video loss in batch");
      auto weighted = tape.scale(term, cv.loss_weight);
      tape.backward(weighted);
      const auto vars = pv.all();
      for (std::size_t p = 0; p < total.size(); ++p) total[p] += tape.grad(vars[p]);
      loss += cv.loss_weight * value;
    }
  }

  clip_grad_norm(total, cfg.grad_clip);
  sgd_momentum_step(param_pointers(params), total, opt);
  return loss;
}

TrainState initial_state(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.model_config = cfg.model;
  Rng init = Rng(cfg.seed).split(kInitStream);
  st.params = init_model(cfg.model, init);
  st.opt = make_optim_state(param_pointers(std::as_const(st.params)), cfg.base_lr, cfg.momentum,
                            total_steps(cfg, ds.videos.size()));
  st.scaler = cfg.standardize_features ? fit_scaler(ds) : identity_scaler(cfg.model.feature_dim);
  st.lengths = cfg.ranking.length_model;
  if (st.lengths.learned && !st.lengths.has_parameters(cfg.model.k)) {
    double frames = 0.0;
    for (const auto& v : ds.videos) frames += static_cast<double>(v.features.rows());
    const double mean_T = ds.videos.empty() ? 1.0 : frames / static_cast<double>(ds.videos.size());
    st.lengths.reset(cfg.model.k, std::max(1.0, mean_T / cfg.model.k));
  }
  return st;
}

Labeling segment_video(const TrainState& state, const Matrix& features) {
  const ModelConfig& mc = state.model_config;
  return Labeling{greedy_segment(state.params, mc, state.scaler.apply(features)).symbols, mc.k};
}

std::vector<Labeling> segment_dataset(const TrainState& state, const Dataset& ds) {
  std::vector<Labeling> out(ds.videos.size());
  parallel_for(ds.videos.size(), [&](std::size_t i) { out[i] = segment_video(state, ds.videos[i].features); });
  return out;
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (ds.feature_dim != cfg.model.feature_dim) {
    throw InvalidArgument("train: dataset feature dim " + std::to_string(ds.feature_dim) +
                          " differs from model feature_dim " + std::to_string(cfg.model.feature_dim));
  }
  for (const auto& v : ds.videos) {
    if (v.features.cols() != cfg.model.feature_dim) {
      throw InvalidArgument("train: video '" + v.video_id + "' has feature dim " + std::to_string(v.features.cols()));
    }
  }

  TrainResult result;
  TrainState& st = result.state;
  if (options.resume) {
    st = *options.resume;
    if (!(st.model_config == cfg.model)) throw InvalidArgument("train: checkpoint model config differs from config");
    if (st.opt.total_steps != total_steps(cfg, ds.videos.size())) {
      throw InvalidArgument("train: checkpoint step schedule differs from config (epochs or batch size changed)");
    }
    if (st.epochs_done > cfg.epochs) throw InvalidArgument("train: checkpoint is past the configured epochs");
    if (st.scaler.dim() != cfg.model.feature_dim) throw InvalidArgument("train: checkpoint scaler has the wrong dim");
  } else {
    st = initial_state(ds, cfg);
  }

  std::vector<Matrix> features;
  features.reserve(ds.videos.size());
  for (const auto& v : ds.videos) features.push_back(st.scaler.apply(v.features));

  const std::size_t n = ds.videos.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const Rng root(cfg.seed);

  for (int epoch = st.epochs_done; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = static_cast<std::uint64_t>(epoch);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = root.split(kShuffleStream).split(e);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    RankingConfig ranking = cfg.ranking;
    ranking.length_model = st.lengths;

    EpochRecord rec;
    rec.epoch = epoch + 1;
    double cost_sum = 0.0, runs_sum = 0.0, loss_sum = 0.0;
    int selected = 0, batches = 0;
    for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
      const std::size_t end = std::min(n, start + bs);
      std::vector<const Matrix*> videos;
      std::vector<int> index;
      std::vector<std::string> ids;
      for (std::size_t j = start; j < end; ++j) {
        const auto& v = ds.videos[static_cast<std::size_t>(order[j])];
        videos.push_back(&features[static_cast<std::size_t>(order[j])]);
        index.push_back(order[j]);
        ids.push_back(v.video_id);
      }
      const Rng e_rng = root.split(kEStepStream).split(e).split(b);
      const std::vector<VideoSelection> sel = self_label_batch(st.params, videos, index, cfg, ranking, e_rng);
      for (std::size_t j = 0; j < sel.size(); ++j) {
        if (sel[j].skipped) {
          ++rec.skipped_videos;
          if (options.verbose) std::cerr << "warning: skipping video '" << ids[j] << "' (fewer than 2 frames)\n";
          continue;
        }
        cost_sum += sel[j].cost.total;
        runs_sum += static_cast<double>(sel[j].labeling.runs().size());
        ++selected;
      }
      const Rng m_rng = root.split(kMStepStream).split(e).split(b);
      loss_sum += optimize_step(st.params, st.opt, videos, ids, sel, cfg, m_rng);
      rec.lr = cosine_lr(st.opt.step - 1, st.opt.total_steps, st.opt.base_lr);
      ++batches;
    }
    st.epochs_done = epoch + 1;

    if (st.lengths.learned && st.epochs_done % cfg.length_update_every == 0 && n > 0) {
      st.lengths = update_length_params(st.lengths, segment_dataset(st, ds));
    }

    rec.mean_cost = selected > 0 ? cost_sum / selected : 0.0;
    rec.mean_runs = selected > 0 ? runs_sum / selected : 0.0;
    rec.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
    rec.lengths = st.lengths;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (cfg.checkpoint_every > 0 && options.checkpoint_prefix && st.epochs_done % cfg.checkpoint_every == 0) {
      std::filesystem::path p = *options.checkpoint_prefix;
      p += ".epoch" + std::to_string(st.epochs_done);
      save_checkpoint(st, p);
    }
  }
  return result;
}

std::string checkpoint_bytes(const TrainState& st) {
  ByteWriter out;
  write_model(out, st.model_config, st.params);

  out.bytes(std::string(kOptimMagic, 4));
  out.u64(static_cast<std::uint64_t>(st.opt.step));
  out.u64(static_cast<std::uint64_t>(st.opt.total_steps));
  out.f64(st.opt.base_lr);
  out.f64(st.opt.momentum);
  out.u32(static_cast<std::uint32_t>(st.opt.velocity.size()));
  for (const Matrix& v : st.opt.velocity) out.array(v);

  out.bytes(std::string(kLengthMagic, 4));
  out.u32(static_cast<std::uint32_t>(st.lengths.variant));
  out.u32(st.lengths.learned ? 1u : 0u);
  out.f64(st.lengths.ema_rate);
  write_doubles(out, st.lengths.lambda);
  write_doubles(out, st.lengths.mu);
  write_doubles(out, st.lengths.sigma);

  out.bytes(std::string(kScalerMagic, 4));
  out.array(st.scaler.mean);
  out.array(st.scaler.inv_std);

  out.bytes(std::string(kProgressMagic, 4));
  out.u32(static_cast<std::uint32_t>(st.epochs_done));
  return out.buffer();
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  write_file(path, checkpoint_bytes(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  ByteReader in(data, path.string());
  TrainState st;
  read_model(in, st.model_config, st.params);

  in.expect_magic(kOptimMagic);
  st.opt.step = static_cast<std::int64_t>(in.u64());
  st.opt.total_steps = static_cast<std::int64_t>(in.u64());
  st.opt.base_lr = in.f64();
  st.opt.momentum = in.f64();
  if (st.opt.total_steps < 1 || st.opt.step < 0 || st.opt.step > st.opt.total_steps) in.fail("bad optimizer steps");
  const std::vector<const Matrix*> params = param_pointers(std::as_const(st.params));
  const std::uint32_t nv = in.u32();
  if (nv != params.size()) in.fail("optimizer has the wrong number of velocity buffers");
  for (const Matrix* p : params) {
    Matrix v = in.array();
    if (v.rows() != p->rows() || v.cols() != p->cols()) in.fail("velocity shape differs from its parameter");
    st.opt.velocity.push_back(std::move(v));
  }

  in.expect_magic(kLengthMagic);
  const std::uint32_t variant = in.u32();
  if (variant > static_cast<std::uint32_t>(LengthVariant::gaussian)) in.fail("unknown length variant");
  st.lengths.variant = static_cast<LengthVariant>(variant);
  st.lengths.learned = in.u32() != 0;
  st.lengths.ema_rate = in.f64();
  st.lengths.lambda = read_doubles(in);
  st.lengths.mu = read_doubles(in);
  st.lengths.sigma = read_doubles(in);

  in.expect_magic(kScalerMagic);
  const auto D = static_cast<Eigen::Index>(st.model_config.feature_dim);
  for (RowVector* part : {&st.scaler.mean, &st.scaler.inv_std}) {
    const Matrix m = in.array();
    if (m.rows() != 1 || m.cols() != D) in.fail("feature scaler shape differs from the model feature dim");
    *part = m;
  }
  if (!st.scaler.mean.allFinite() || !st.scaler.inv_std.allFinite()) in.fail("non-finite feature scaler");

  in.expect_magic(kProgressMagic);
  st.epochs_done = static_cast<int>(in.u32());
  if (!in.at_end()) in.fail("trailing bytes after checkpoint");
  return st;
}

}  // namespace segdiscover
