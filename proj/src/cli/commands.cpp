#include "segdiscover/cli/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "segdiscover/cli/svg.hpp"
#include "segdiscover/data/io.hpp"
#include "segdiscover/data/synth.hpp"
#include "segdiscover/eval/eval.hpp"
#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/trainer/config.hpp"
#include "segdiscover/trainer/trainer.hpp"

namespace segdiscover {

using nlohmann::json;

namespace {

json read_config_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

int last_end(const std::vector<Segment>& segs) {
  int T = 0;
  for (const Segment& s : segs) T = std::max(T, s.end);
  return T;
}

void check_covering(const std::vector<Segment>& segs, int T, const fs::path& file) {
  const std::vector<std::string> problems = segment_violations(segs, T, std::nullopt);
  if (!problems.empty()) throw FormatError(file.string(), -1, problems.front());
}

/// Segment files of a directory keyed by file stem, sorted.
std::map<std::string, fs::path> segment_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" && entry.path().filename() != "manifest.json") {
      out[entry.path().stem().string()] = entry.path();
    }
  }
  return out;
}

std::vector<Segment> labeling_segments(const Labeling& l) { return segments_from_labeling(l); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, text);
}

std::vector<int> parse_k_list(const std::string& s) {
  std::vector<int> ks;
  for (const std::string& item : split_list(s)) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw UsageError("--k-list: '" + item + "' is not a positive integer");
    }
  }
  if (ks.empty()) throw UsageError("--k-list is empty");
  return ks;
}

}  // namespace

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

fs::path confusion_csv_path(const fs::path& report) {
  fs::path p = report;
  p.replace_extension(".confusion.csv");
  return p;
}

void cmd_gen_synth(const GenSynthArgs& a, std::ostream& out) {
  const SynthConfig cfg = synth_config_from_json(read_config_json(a.config));
  const Dataset ds = generate_synthetic(cfg);
  save_dataset(ds, a.out);
  int tmin = ds.videos.empty() ? 0 : ds.videos.front().length(), tmax = tmin;
  for (const auto& v : ds.videos) {
    tmin = std::min(tmin, v.length());
    tmax = std::max(tmax, v.length());
  }
  out << "wrote " << ds.videos.size() << " videos (k=" << cfg.k << ", D=" << cfg.D << ", T in [" << tmin << ", "
      << tmax << "]) to " << a.out.string() << '\n';
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig cfg = train_config_from_json(read_config_json(a.config));
  const Dataset ds = load_dataset(a.data);
  if (ds.feature_dim != cfg.model.feature_dim) {
    throw DataError("dataset feature dim " + std::to_string(ds.feature_dim) + " differs from model.feature_dim " +
                    std::to_string(cfg.model.feature_dim));
  }
  TrainOptions options;
  if (a.resume) options.resume = load_checkpoint(*a.resume);
  options.checkpoint_prefix = a.out;
  options.verbose = !a.quiet;

  fs::path log_path = a.out;
  log_path += ".log.jsonl";
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  std::ofstream log(log_path, a.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write training log " + log_path.string());
  const int every = std::max(1, cfg.epochs / 10);
  options.on_epoch = [&](const EpochRecord& r) {
    log << to_json(r).dump() << '\n';
    log.flush();
    if (!a.quiet && (r.epoch % every == 0 || r.epoch == cfg.epochs)) {
      out << "epoch " << r.epoch << "/" << cfg.epochs << "  cost " << r.mean_cost << "  loss " << r.mean_loss
          << "  runs " << r.mean_runs << "  lr " << r.lr << '\n';
    }
  };
  try {
    const TrainResult result = train(ds, cfg, options);
    save_checkpoint(result.state, a.out);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  out << "wrote " << a.out.string() << " and " << log_path.string() << '\n';
}

void cmd_segment(const SegmentArgs& a, std::ostream& out) {
  if (a.video.has_value() == a.data.has_value()) throw UsageError("segment needs exactly one of --video or --data");
  const TrainState st = load_checkpoint(a.model);
  const ModelConfig& mc = st.model_config;
  auto segment_one = [&](const Matrix& features, const std::string& what) {
    if (features.cols() != mc.feature_dim) {
      throw DataError(what + " has feature dim " + std::to_string(features.cols()) + ", model expects " +
                      std::to_string(mc.feature_dim));
    }
    return labeling_segments(segment_video(st, features));
  };
  if (a.video) {
    write_segments(segment_one(read_features(*a.video), a.video->string()), a.out);
    out << "wrote " << a.out.string() << '\n';
    return;
  }
  const Dataset ds = load_dataset(*a.data);
  fs::create_directories(a.out);
  for (const auto& v : ds.videos) write_segments(segment_one(v.features, "video '" + v.video_id + "'"), a.out / (v.video_id + ".json"));
  out << "wrote " << ds.videos.size() << " segmentations to " << a.out.string() << '\n';
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const std::vector<std::string> metrics = split_list(a.metrics);
  if (metrics.empty()) throw UsageError("--metrics is empty (choose from mof, jaccard, f1)");
  for (const std::string& m : metrics) {
    if (m != "mof" && m != "jaccard" && m != "f1") throw UsageError("unknown metric '" + m + "'");
  }
  EvalOptions options;
  options.per_video = a.per_video;
  if (a.f1_rule == "midpoint") options.f1_rule = F1Rule::midpoint;
  else if (a.f1_rule == "overlap") options.f1_rule = F1Rule::overlap;
  else throw UsageError("unknown --f1-rule '" + a.f1_rule + "' (expected midpoint or overlap)");

  // Ground truth: a dataset directory or a directory of segment files.
  std::map<std::string, std::vector<Segment>> gt;
  std::optional<int> k_true = a.k_true;
  if (fs::exists(a.gt / "manifest.json")) {
    const Dataset ds = load_dataset(a.gt);
    if (!ds.has_ground_truth()) throw DataError(a.gt.string() + " has no ground truth");
    for (std::size_t i = 0; i < ds.videos.size(); ++i) {
      if (!ds.ground_truth[i]) throw DataError("video '" + ds.videos[i].video_id + "' has no ground truth");
      gt[ds.videos[i].video_id] = *ds.ground_truth[i];
    }
    if (!k_true) k_true = ds.k_true;
  } else {
    for (const auto& [id, path] : segment_files(a.gt)) {
      std::vector<Segment> segs = read_segments(path);
      check_covering(segs, last_end(segs), path);
      gt[id] = std::move(segs);
    }
  }
  const std::map<std::string, fs::path> pred_files = segment_files(a.pred);

  std::vector<std::string> missing;
  for (const auto& [id, _] : gt) {
    if (!pred_files.count(id)) missing.push_back("prediction for '" + id + "'");
  }
  for (const auto& [id, _] : pred_files) {
    if (!gt.count(id)) missing.push_back("ground truth for '" + id + "'");
  }
  if (!missing.empty()) {
    std::string msg = "video ids differ between --pred and --gt; missing:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }
  if (gt.empty()) throw DataError("no videos to evaluate");

  std::vector<std::string> ids;
  std::vector<std::vector<Segment>> gts, preds;
  int k_pred = 1, k_gt = 1;
  for (const auto& [id, segs] : gt) {
    const int T = last_end(segs);
    std::vector<Segment> p = read_segments(pred_files.at(id));
    check_covering(p, T, pred_files.at(id));
    for (const Segment& s : p) k_pred = std::max(k_pred, s.action + 1);
    for (const Segment& s : segs) k_gt = std::max(k_gt, s.action + 1);
    ids.push_back(id);
    gts.push_back(segs);
    preds.push_back(std::move(p));
  }
  if (!k_true) k_true = k_gt;
  if (*k_true < k_gt) throw DataError("ground truth uses class " + std::to_string(k_gt - 1) + " beyond k_true");
  std::vector<Labeling> labelings;
  for (std::size_t i = 0; i < ids.size(); ++i) labelings.push_back(labeling_from_segments(preds[i], last_end(gts[i]), k_pred));

  const TaskEval result = evaluate_task(ids, labelings, gts, *k_true, options);
  write_text(a.out, to_json(result, metrics).dump(2) + "\n");
  write_text(confusion_csv_path(a.out), confusion_csv(result.aggregate.confusion));
  for (const std::string& m : metrics) {
    const double v = m == "mof" ? result.aggregate.mof : m == "jaccard" ? result.aggregate.jaccard : result.aggregate.f1;
    out << m << ' ' << v << '\n';
  }
}

void cmd_sweep_k(const SweepArgs& a, std::ostream& out) {
  const std::vector<int> ks = parse_k_list(a.k_list);
  const TrainConfig base = train_config_from_json(read_config_json(a.config));
  const Dataset ds = load_dataset(a.data);
  if (!ds.has_ground_truth()) throw DataError(a.data.string() + " has no ground truth to evaluate against");
  if (ds.feature_dim != base.model.feature_dim) {
    throw DataError("dataset feature dim " + std::to_string(ds.feature_dim) + " differs from model.feature_dim " +
                    std::to_string(base.model.feature_dim));
  }
  std::vector<std::string> ids;
  std::vector<std::vector<Segment>> gts;
  int k_true = ds.k_true.value_or(0);
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    ids.push_back(ds.videos[i].video_id);
    gts.push_back(ds.ground_truth[i].value_or(std::vector<Segment>{}));
    for (const Segment& s : gts.back()) k_true = std::max(k_true, s.action + 1);
  }

  fs::create_directories(a.out);
  std::ostringstream csv;
  csv << "k,mof,jaccard,f1,final_cost,status\n";
  for (int k : ks) {
    TrainConfig cfg = base;
    cfg.model.k = k;
    try {
      const TrainResult r = train(ds, cfg);
      save_checkpoint(r.state, a.out / ("k" + std::to_string(k) + ".ckpt"));
      const TaskEval ev = evaluate_task(ids, segment_dataset(r.state, ds), gts, k_true);
      const double cost = r.log.epochs.empty() ? 0.0 : r.log.epochs.back().mean_cost;
      csv << k << ',' << ev.aggregate.mof << ',' << ev.aggregate.jaccard << ',' << ev.aggregate.f1 << ',' << cost
          << ",ok\n";
      if (!a.quiet) out << "k=" << k << "  mof " << ev.aggregate.mof << "  jaccard " << ev.aggregate.jaccard << "  f1 "
                        << ev.aggregate.f1 << '\n';
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      csv << k << ",,,,,error: " << msg << '\n';
      if (!a.quiet) out << "k=" << k << "  failed: " << e.what() << '\n';
    }
  }
  write_text(a.out / "sweep.csv", csv.str());
  out << "wrote " << (a.out / "sweep.csv").string() << '\n';
}

void cmd_plot(const PlotArgs& a, std::ostream& out) {
  const std::vector<Segment> pred = read_segments(a.seg);
  check_covering(pred, last_end(pred), a.seg);
  std::optional<std::vector<Segment>> gt;
  if (a.gt) {
    gt = read_segments(*a.gt);
    check_covering(*gt, last_end(*gt), *a.gt);
  }
  write_text(a.out, render_timeline(pred, gt));
  out << "wrote " << a.out.string() << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (const char* threads = std::getenv("SEGDISCOVER_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Unsupervised discovery of atomic actions in feature sequences", "segdiscover"};
  app.require_subcommand(1);

  GenSynthArgs gen;
  auto* c_gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  c_gen->add_option("--config", gen.config, "SynthConfig JSON")->required();
  c_gen->add_option("--out", gen.out, "Output dataset directory")->required();

  TrainArgs tr;
  std::string resume;
  auto* c_train = app.add_subcommand("train", "Train a model on a dataset");
  c_train->add_option("--data", tr.data, "Dataset directory")->required();
  c_train->add_option("--config", tr.config, "TrainConfig JSON")->required();
  c_train->add_option("--out", tr.out, "Final checkpoint path")->required();
  c_train->add_option("--resume", resume, "Checkpoint to resume from");
  c_train->add_flag("--quiet", tr.quiet, "No progress output");

  SegmentArgs sg;
  std::string video, data;
  auto* c_seg = app.add_subcommand("segment", "Greedy segmentation with a trained model");
  c_seg->add_option("--model", sg.model, "Checkpoint")->required();
  c_seg->add_option("--video", video, "Single feature file");
  c_seg->add_option("--data", data, "Dataset directory");
  c_seg->add_option("--out", sg.out, "Output file (--video) or directory (--data)")->required();

  EvalArgs ev;
  int k_true = 0;
  auto* c_eval = app.add_subcommand("eval", "Score predicted segmentations against ground truth");
  c_eval->add_option("--pred", ev.pred, "Directory of predicted segment files")->required();
  c_eval->add_option("--gt", ev.gt, "Dataset directory or directory of segment files")->required();
  c_eval->add_option("--metrics", ev.metrics, "Comma-separated subset of mof,jaccard,f1")->capture_default_str();
  c_eval->add_option("--out", ev.out, "Report JSON path")->required();
  c_eval->add_flag("--per-video", ev.per_video, "Hungarian matching per video instead of per task");
  c_eval->add_option("--f1-rule", ev.f1_rule, "midpoint or overlap")->capture_default_str();
  c_eval->add_option("--k-true", k_true, "Number of ground-truth classes");

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep-k", "Train and evaluate for several action counts");
  c_sweep->add_option("--data", sw.data, "Dataset directory")->required();
  c_sweep->add_option("--config", sw.config, "TrainConfig JSON")->required();
  c_sweep->add_option("--k-list", sw.k_list, "Comma-separated k values")->capture_default_str();
  c_sweep->add_option("--out", sw.out, "Output directory")->required();
  c_sweep->add_flag("--quiet", sw.quiet, "No progress output");

  PlotArgs pl;
  std::string plot_gt;
  auto* c_plot = app.add_subcommand("plot", "Render a segmentation timeline as SVG");
  c_plot->add_option("--seg", pl.seg, "Predicted segment file")->required();
  c_plot->add_option("--gt", plot_gt, "Ground-truth segment file");
  c_plot->add_option("--out", pl.out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_gen->parsed()) {
      cmd_gen_synth(gen, out);
    } else if (c_train->parsed()) {
      if (!resume.empty()) tr.resume = resume;
      cmd_train(tr, out);
    } else if (c_seg->parsed()) {
      if (!video.empty()) sg.video = video;
      if (!data.empty()) sg.data = data;
      cmd_segment(sg, out);
    } else if (c_eval->parsed()) {
      if (c_eval->count("--k-true")) ev.k_true = k_true;
      cmd_eval(ev, out);
    } else if (c_sweep->parsed()) {
      cmd_sweep_k(sw, out);
    } else if (c_plot->parsed()) {
      if (!plot_gt.empty()) pl.gt = plot_gt;
      cmd_plot(pl, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace segdiscover
