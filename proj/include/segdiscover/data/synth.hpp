#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "segdiscover/data/dataset.hpp"

namespace segdiscover {

enum class Ordering { fixed, partial, random };

std::string to_string(Ordering o);
Ordering ordering_from_string(const std::string& s);

/// Parameters of the synthetic instructional-video generator. Each video
/// performs every action exactly once; frames are noisy copies of a
/// per-action prototype.
struct SynthConfig {
  int k = 5;
  int D = 16;
  int n_videos = 30;
  double mean_len = 20.0;
  double len_jitter = 0.0;
  double noise_sigma = 0.25;
  Ordering ordering = Ordering::partial;
  double null_prob = 0.0;
  std::uint64_t seed = 0;
  std::string task_id = "synthetic";

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws InvalidArgument for an invalid config and GenerationError when the
/// prototype separation cannot be met.
Dataset generate_synthetic(const SynthConfig& cfg);

/// The k prototype vectors (k x D) used for a config, unit norm, pairwise
/// at least 4 * noise_sigma apart.
Matrix synthetic_prototypes(const SynthConfig& cfg);

}  // namespace segdiscover
