#include "segdiscover/ranking/labeling.hpp"

namespace segdiscover {

std::vector<Segment> Labeling::runs() const {
  std::vector<Segment> out;
  for (int t = 0; t < length(); ++t) {
    const int s = symbols[static_cast<std::size_t>(t)];
    if (out.empty() || out.back().action != s) {
      out.push_back({s, t, t + 1});
    } else {
      out.back().end = t + 1;
    }
  }
  return out;
}

std::vector<int> Labeling::action_lengths() const {
  std::vector<int> out(static_cast<std::size_t>(k), 0);
  for (int s : symbols) {
    if (!is_null(s)) ++out[static_cast<std::size_t>(s)];
  }
  return out;
}

std::vector<int> Labeling::run_counts() const {
  std::vector<int> out(static_cast<std::size_t>(k), 0);
  for (const Segment& r : runs()) {
    if (!is_null(r.action)) ++out[static_cast<std::size_t>(r.action)];
  }
  return out;
}

int Labeling::non_null_frames() const {
  int n = 0;
  for (int s : symbols) n += is_null(s) ? 0 : 1;
  return n;
}

Labeling labeling_from_segments(const std::vector<Segment>& segments, int T, int k) {
  Labeling l{frames_from_segments(segments, T), k};
  for (int& s : l.symbols) {
    if (s == kNullAction) s = k;
  }
  return l;
}

std::vector<Segment> segments_from_labeling(const Labeling& labeling) {
  std::vector<Segment> out = labeling.runs();
  for (Segment& s : out) {
    if (labeling.is_null(s.action)) s.action = kNullAction;
  }
  return out;
}

}  // namespace segdiscover
