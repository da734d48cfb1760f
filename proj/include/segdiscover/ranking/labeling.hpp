#pragma once

#include <vector>

#include "segdiscover/data/dataset.hpp"

namespace segdiscover {

/// A per-frame symbol sequence over k actions. Any symbol outside [0, k)
/// (by convention k itself) is the null symbol.
struct Labeling {
  std::vector<int> symbols;
  int k = 0;

  int length() const { return static_cast<int>(symbols.size()); }
  bool is_null(int symbol) const { return symbol < 0 || symbol >= k; }
  int null_symbol() const { return k; }

  /// Maximal constant runs; null runs included, carrying the null symbol.
  std::vector<Segment> runs() const;
  /// Number of frames per action, size k.
  std::vector<int> action_lengths() const;
  /// Number of disconnected runs per action, size k.
  std::vector<int> run_counts() const;
  int non_null_frames() const;

  friend bool operator==(const Labeling&, const Labeling&) = default;
};

/// Segment list (null = kNullAction) to a Labeling (null = k).
Labeling labeling_from_segments(const std::vector<Segment>& segments, int T, int k);

/// Labeling to a segment list with null runs written as kNullAction.
std::vector<Segment> segments_from_labeling(const Labeling& labeling);

}  // namespace segdiscover
