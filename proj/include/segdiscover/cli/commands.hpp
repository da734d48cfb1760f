#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace segdiscover {

/// Bad invocation: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that load but do not fit together (ids, dimensions): exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace fs = std::filesystem;

struct GenSynthArgs {
  fs::path config, out;
};
struct TrainArgs {
  fs::path data, config, out;
  std::optional<fs::path> resume;
  bool quiet = false;
};
struct SegmentArgs {
  fs::path model;
  std::optional<fs::path> video, data;
  fs::path out;
};
struct EvalArgs {
  fs::path pred, gt, out;
  std::string metrics = "mof,jaccard,f1";
  bool per_video = false;
  std::string f1_rule = "midpoint";
  std::optional<int> k_true;
};
struct SweepArgs {
  fs::path data, config, out;
  std::string k_list = "5,7,9,11,13";
  bool quiet = false;
};
struct PlotArgs {
  fs::path seg, out;
  std::optional<fs::path> gt;
};

// Each command throws UsageError, DataError, ConfigError or a data-layer
// error on failure; run_cli turns those into exit codes.
void cmd_gen_synth(const GenSynthArgs& a, std::ostream& out);
void cmd_train(const TrainArgs& a, std::ostream& out);
void cmd_segment(const SegmentArgs& a, std::ostream& out);
void cmd_eval(const EvalArgs& a, std::ostream& out);
void cmd_sweep_k(const SweepArgs& a, std::ostream& out);
void cmd_plot(const PlotArgs& a, std::ostream& out);

/// Parses argv, dispatches to a command and returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "a,b , c" -> {"a", "b", "c"}; empty items are dropped.
std::vector<std::string> split_list(const std::string& s);

/// Path of the confusion CSV written next to an eval report.
fs::path confusion_csv_path(const fs::path& report);

}  // namespace segdiscover
