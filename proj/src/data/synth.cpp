#include "segdiscover/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/numcore/rng.hpp"

namespace segdiscover {

namespace {

constexpr int kMaxPrototypeTries = 1000;
constexpr double kPartialSwapProb = 0.3;

void check_config(const SynthConfig& cfg) {
  if (cfg.k < 2) throw InvalidArgument("SynthConfig: k must be >= 2");
  if (cfg.D < 1) throw InvalidArgument("SynthConfig: D must be >= 1");
  if (cfg.n_videos < 1) throw InvalidArgument("SynthConfig: n_videos must be >= 1");
  if (!(cfg.mean_len >= 2.0)) throw InvalidArgument("SynthConfig: mean_len must be >= 2");
  if (!(cfg.len_jitter >= 0.0)) throw InvalidArgument("SynthConfig: len_jitter must be >= 0");
  if (!(cfg.noise_sigma >= 0.0)) throw InvalidArgument("SynthConfig: noise_sigma must be >= 0");
  if (!(cfg.null_prob >= 0.0 && cfg.null_prob <= 1.0)) {
    throw InvalidArgument("SynthConfig: null_prob must lie in [0, 1]");
  }
}

int draw_length(const SynthConfig& cfg, Rng& rng) {
  const double jitter = cfg.len_jitter > 0.0 ? rng.uniform(-cfg.len_jitter, cfg.len_jitter) : 0.0;
  return std::max(1, static_cast<int>(std::lround(cfg.mean_len + jitter)));
}

std::vector<int> draw_order(const SynthConfig& cfg, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(cfg.k));
  std::iota(order.begin(), order.end(), 0);
  switch (cfg.ordering) {
    case Ordering::fixed:
      break;
    case Ordering::partial:
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        if (rng.uniform() < kPartialSwapProb) std::swap(order[i], order[i + 1]);
      }
      break;
    case Ordering::random:
      std::shuffle(order.begin(), order.end(), rng);
      break;
  }
  return order;
}

}  // namespace

std::string to_string(Ordering o) {
  switch (o) {
    case Ordering::fixed:
      return "fixed";
    case Ordering::partial:
      return "partial";
    case Ordering::random:
      return "random";
  }
  return "fixed";
}

Ordering ordering_from_string(const std::string& s) {
  if (s == "fixed") return Ordering::fixed;
  if (s == "partial") return Ordering::partial;
  if (s == "random") return Ordering::random;
  throw InvalidArgument("unknown ordering '" + s + "' (expected fixed, partial or random)");
}

Matrix synthetic_prototypes(const SynthConfig& cfg) {
  check_config(cfg);
  Rng rng = Rng(cfg.seed).split(0x70726f746fULL);
  const double min_sep = 4.0 * cfg.noise_sigma;
  Matrix protos(cfg.k, cfg.D);
  for (int attempt = 0; attempt < kMaxPrototypeTries; ++attempt) {
    for (int a = 0; a < cfg.k; ++a) {
      RowVector v(cfg.D);
      do {
        for (int d = 0; d < cfg.D; ++d) v(d) = rng.normal();
      } while (v.norm() == 0.0);
      protos.row(a) = v / v.norm();
    }
    // storage is float32; round now so saved datasets reload bitwise
    protos = protos.cast<float>().cast<double>();
    double closest = INFINITY;
    for (int a = 0; a < cfg.k; ++a) {
      for (int b = a + 1; b < cfg.k; ++b) closest = std::min(closest, (protos.row(a) - protos.row(b)).norm());
    }
    if (closest >= min_sep) return protos;
  }
  throw GenerationError("could not place " + std::to_string(cfg.k) + " prototypes in " +
                        std::to_string(cfg.D) + " dims with separation " + std::to_string(min_sep));
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  const Matrix protos = synthetic_prototypes(cfg);
  Dataset ds;
  ds.task_id = cfg.task_id;
  ds.feature_dim = cfg.D;
  ds.k_true = cfg.k;
  for (int v = 0; v < cfg.n_videos; ++v) {
    Rng rng = Rng(cfg.seed).split(0x766964ULL + static_cast<std::uint64_t>(v));
    const std::vector<int> order = draw_order(cfg, rng);
    std::vector<Segment> segments;
    int cursor = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i > 0 && cfg.null_prob > 0.0 && rng.uniform() < cfg.null_prob) {
        const int len = draw_length(cfg, rng);
        segments.push_back({kNullAction, cursor, cursor + len});
        cursor += len;
      }
      const int len = draw_length(cfg, rng);
      segments.push_back({order[i], cursor, cursor + len});
      cursor += len;
    }
    FeatureSequence seq;
    char id[32];
    std::snprintf(id, sizeof(id), "video_%03d", v);
    seq.video_id = id;
    seq.task_id = cfg.task_id;
    seq.features.resize(cursor, cfg.D);
    for (const Segment& s : segments) {
      for (int t = s.start; t < s.end; ++t) {
        for (int d = 0; d < cfg.D; ++d) {
          const double mean = s.is_null() ? 0.0 : protos(s.action, d);
          const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0;
          seq.features(t, d) = static_cast<double>(static_cast<float>(mean + noise));
        }
      }
    }
    ds.videos.push_back(std::move(seq));
    ds.ground_truth.emplace_back(std::move(segments));
  }
  return ds;
}

}  // namespace segdiscover
