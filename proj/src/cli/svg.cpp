#include "segdiscover/cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>

namespace segdiscover {

namespace {

constexpr std::array<const char*, 12> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                                  "#e377c2", "#17becf", "#bcbd22", "#393b79", "#637939", "#843c39"};
constexpr std::array<const char*, 4> kGreys = {"#9e9e9e", "#c8c8c8", "#7a7a7a", "#b0b0b0"};
constexpr const char* kNullFill = "#f4f4f4";

constexpr double kMargin = 10.0;
constexpr double kLabelWidth = 48.0;
constexpr double kRowHeight = 24.0;
constexpr double kRowGap = 8.0;
constexpr double kLegendRow = 18.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

int length_of(const std::vector<Segment>& segs) {
  int T = 0;
  for (const Segment& s : segs) T = std::max(T, s.end);
  return T;
}

void bar(std::ostringstream& os, const std::vector<Segment>& segs, double y, bool grey) {
  for (const Segment& s : segs) {
    const char* fill = s.is_null() ? kNullFill
                       : grey      ? kGreys[static_cast<std::size_t>(s.action) % kGreys.size()]
                                   : kPalette[static_cast<std::size_t>(s.action) % kPalette.size()];
    os << "  <rect x=\"" << num(kMargin + kLabelWidth + s.start * kSvgFrameWidth) << "\" y=\"" << num(y)
       << "\" width=\"" << num(s.length() * kSvgFrameWidth) << "\" height=\"" << num(kRowHeight) << "\" fill=\""
       << fill << "\"><title>" << (s.is_null() ? std::string("null") : std::to_string(s.action)) << " [" << s.start
       << ", " << s.end << ")</title></rect>\n";
  }
}

}  // namespace

std::string palette_color(int action) {
  if (action < 0) return kNullFill;
  return kPalette[static_cast<std::size_t>(action) % kPalette.size()];
}

std::string render_timeline(const std::vector<Segment>& prediction,
                            const std::optional<std::vector<Segment>>& ground_truth) {
  const int T = std::max(length_of(prediction), ground_truth ? length_of(*ground_truth) : 0);
  std::set<int> symbols;
  for (const Segment& s : prediction) symbols.insert(s.action);

  const int rows = ground_truth ? 2 : 1;
  const double bars_bottom = kMargin + rows * kRowHeight + (rows - 1) * kRowGap;
  const double legend_top = bars_bottom + kRowGap;
  const double height = legend_top + static_cast<double>(symbols.size()) * kLegendRow + kMargin;
  const double width = std::max(kMargin * 2 + kLabelWidth + T * kSvgFrameWidth, 200.0);

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double y = kMargin;
  if (ground_truth) {
    os << "  <text x=\"" << num(kMargin) << "\" y=\"" << num(y + kRowHeight * 0.7) << "\">GT</text>\n";
    bar(os, *ground_truth, y, true);
    y += kRowHeight + kRowGap;
  }
  os << "  <text x=\"" << num(kMargin) << "\" y=\"" << num(y + kRowHeight * 0.7) << "\">Pred</text>\n";
  bar(os, prediction, y, false);

  double ly = legend_top;
  for (int sym : symbols) {
    os << "  <rect x=\"" << num(kMargin) << "\" y=\"" << num(ly + 3) << "\" width=\"12.00\" height=\"12.00\" fill=\""
       << palette_color(sym) << "\" stroke=\"#555555\"/>\n"
       << "  <text x=\"" << num(kMargin + 18) << "\" y=\"" << num(ly + 13) << "\">"
       << (sym < 0 ? std::string("null") : "symbol " + std::to_string(sym)) << "</text>\n";
    ly += kLegendRow;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace segdiscover
