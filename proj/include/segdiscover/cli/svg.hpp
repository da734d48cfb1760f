#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segdiscover/data/dataset.hpp"

namespace segdiscover {

/// Pixels per frame; bar width is proportional to the video length.
inline constexpr double kSvgFrameWidth = 4.0;

/// Fill colour of an action symbol, cycled from a fixed palette.
std::string palette_color(int action);

/// Timeline with the ground truth (grey shades) above the prediction
/// (palette colours) and a legend of the predicted symbols. Output bytes
/// depend only on the inputs.
std::string render_timeline(const std::vector<Segment>& prediction,
                            const std::optional<std::vector<Segment>>& ground_truth = std::nullopt);

}  // namespace segdiscover
