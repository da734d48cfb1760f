#include "segdiscover/trainer/config.hpp"

#include <set>

#include "segdiscover/model/checkpoint.hpp"

namespace segdiscover {

using nlohmann::json;

namespace {

/// Reads typed fields out of one JSON object, naming failures by their
/// dotted path, and rejects keys it was never asked about.
class Fields {
 public:
  Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), std::string("wrong type (") + e.what() + ")");
    }
  }

  void mark(const char* key) { seen_.insert(key); }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!it->is_null() && !seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void read_enum(Fields& f, const char* key, E& out, Parse parse) {
  std::string s;
  f.read(key, s);
  if (s.empty()) return;
  try {
    out = parse(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(f.path(key), e.what());
  }
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace

json to_json(const SynthConfig& c) {
  return {{"k", c.k},
          {"D", c.D},
          {"n_videos", c.n_videos},
          {"mean_len", c.mean_len},
          {"len_jitter", c.len_jitter},
          {"noise_sigma", c.noise_sigma},
          {"ordering", to_string(c.ordering)},
          {"null_prob", c.null_prob},
          {"seed", c.seed},
          {"task_id", c.task_id}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  Fields f(j, "");
  if (!f.has("k")) throw ConfigError("k", "required field is missing");
  f.read("k", c.k);
  f.read("D", c.D);
  f.read("n_videos", c.n_videos);
  f.read("mean_len", c.mean_len);
  f.read("len_jitter", c.len_jitter);
  f.read("noise_sigma", c.noise_sigma);
  read_enum(f, "ordering", c.ordering, ordering_from_string);
  f.read("null_prob", c.null_prob);
  f.read("seed", c.seed);
  f.read("task_id", c.task_id);
  f.finish();
  require(c.k >= 2, "k", "must be >= 2");
  require(c.D >= 1, "D", "must be >= 1");
  require(c.n_videos >= 1, "n_videos", "must be >= 1");
  require(c.mean_len >= 2, "mean_len", "must be >= 2");
  require(c.len_jitter >= 0, "len_jitter", "must be >= 0");
  require(c.noise_sigma >= 0, "noise_sigma", "must be >= 0");
  require(c.null_prob >= 0 && c.null_prob <= 1, "null_prob", "must lie in [0, 1]");
  return c;
}

json to_json(const LengthModel& lm) {
  json j = {{"variant", to_string(lm.variant)}, {"learned", lm.learned}, {"ema_rate", lm.ema_rate}};
  if (!lm.lambda.empty()) j["lambda"] = lm.lambda;
  if (!lm.mu.empty()) j["mu"] = lm.mu;
  if (!lm.sigma.empty()) j["sigma"] = lm.sigma;
  return j;
}

LengthModel length_model_from_json(const json& j) {
  LengthModel lm;
  Fields f(j, "ranking.length_model");
  read_enum(f, "variant", lm.variant, length_variant_from_string);
  f.read("learned", lm.learned);
  f.read("ema_rate", lm.ema_rate);
  f.read("lambda", lm.lambda);
  f.read("mu", lm.mu);
  f.read("sigma", lm.sigma);
  f.finish();
  require(lm.ema_rate >= 0 && lm.ema_rate <= 1, "ranking.length_model.ema_rate", "must lie in [0, 1]");
  for (double v : lm.lambda) require(v > 0, "ranking.length_model.lambda", "entries must be > 0");
  for (double v : lm.sigma) require(v > 0, "ranking.length_model.sigma", "entries must be > 0");
  return lm;
}

json to_json(const RankingConfig& c) {
  json j = {{"length_model", to_json(c.length_model)},
            {"selection", c.selection == SelectionRule::argmin ? "argmin" : "random"}};
  if (c.gamma1) j["gamma1"] = *c.gamma1;
  if (c.gamma2) j["gamma2"] = *c.gamma2;
  if (c.gamma3) j["gamma3"] = *c.gamma3;
  return j;
}

RankingConfig ranking_config_from_json(const json& j) {
  RankingConfig c;
  Fields f(j, "ranking");
  for (auto [key, slot] : {std::pair{"gamma1", &c.gamma1}, std::pair{"gamma2", &c.gamma2},
                           std::pair{"gamma3", &c.gamma3}}) {
    if (f.has(key)) {
      double g = 0.0;
      f.read(key, g);
      require(g >= 0, f.path(key), "must be >= 0");
      *slot = g;
    }
  }
  if (f.has("length_model")) c.length_model = length_model_from_json(f.sub("length_model"));
  read_enum(f, "selection", c.selection, [](const std::string& s) {
    if (s == "argmin") return SelectionRule::argmin;
    if (s == "random") return SelectionRule::random;
    throw InvalidArgument("unknown selection '" + s + "' (expected argmin or random)");
  });
  f.finish();
  const bool all_zero = c.gamma1 == 0.0 && c.gamma2 == 0.0 && c.gamma3 == 0.0;
  require(!all_zero, "ranking", "at least one gamma must be positive");
  return c;
}

json to_json(const CrossVideoConfig& c) {
  return {{"objective", to_string(c.objective)},
          {"placement", to_string(c.placement)},
          {"margin", c.margin},
          {"loss_weight", c.loss_weight},
          {"max_triplets_per_batch", c.max_triplets_per_batch},
          {"hinge_triplet", c.hinge_triplet}};
}

CrossVideoConfig cross_video_config_from_json(const json& j) {
  CrossVideoConfig c;
  Fields f(j, "cross_video");
  read_enum(f, "objective", c.objective, match_objective_from_string);
  read_enum(f, "placement", c.placement, match_placement_from_string);
  f.read("margin", c.margin);
  f.read("loss_weight", c.loss_weight);
  f.read("max_triplets_per_batch", c.max_triplets_per_batch);
  f.read("hinge_triplet", c.hinge_triplet);
  f.finish();
  require(c.margin > 0, "cross_video.margin", "must be > 0");
  require(c.loss_weight >= 0, "cross_video.loss_weight", "must be >= 0");
  require(c.max_triplets_per_batch >= 1, "cross_video.max_triplets_per_batch", "must be >= 1");
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"momentum", c.momentum},
          {"grad_clip", c.grad_clip},
          {"model", to_json(c.model)},
          {"ranking", to_json(c.ranking)},
          {"cross_video", to_json(c.cross_video)},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"length_update_every", c.length_update_every},
          {"null_as_target", c.null_as_target},
          {"standardize_features", c.standardize_features}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Fields f(j, "");
  f.read("epochs", c.epochs);
  f.read("batch_size", c.batch_size);
  f.read("base_lr", c.base_lr);
  f.read("momentum", c.momentum);
  f.read("grad_clip", c.grad_clip);
  if (f.has("model")) {
    const json& m = f.sub("model");
    Fields mf(m, "model");
    for (const char* key : {"n_states", "rules_per_state", "k", "use_null", "state_dim", "hidden_dim", "feature_dim",
                            "temperature", "M"}) {
      mf.mark(key);
    }
    mf.finish();
    try {
      c.model = model_config_from_json(m);
    } catch (const json::exception& e) {
      throw ConfigError("model", std::string("wrong type (") + e.what() + ")");
    }
  }
  if (f.has("ranking")) c.ranking = ranking_config_from_json(f.sub("ranking"));
  if (f.has("cross_video")) c.cross_video = cross_video_config_from_json(f.sub("cross_video"));
  f.read("seed", c.seed);
  f.read("checkpoint_every", c.checkpoint_every);
  f.read("length_update_every", c.length_update_every);
  f.read("null_as_target", c.null_as_target);
  f.read("standardize_features", c.standardize_features);
  f.finish();
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError("<root>", e.what());
  }
  return c;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"mean_cost", r.mean_cost},
          {"mean_loss", r.mean_loss},
          {"lr", r.lr},
          {"mean_runs", r.mean_runs},
          {"skipped_videos", r.skipped_videos},
          {"lengths", to_json(r.lengths)},
          {"wall_seconds", r.wall_seconds}};
}

}  // namespace segdiscover
