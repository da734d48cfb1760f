#include "segdiscover/data/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), static_cast<std::int64_t>(e.byte), "invalid JSON");
  }
}

template <typename T>
T required(const json& j, const char* key, const fs::path& path) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(path.string(), -1, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(path.string(), -1, std::string("key '") + key + "' has the wrong type");
  }
}

}  // namespace

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string(), -1, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string(), -1, "write failed");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), -1, "cannot open for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_features(const Matrix& features, const fs::path& path) {
  std::string out(kFeatureMagic, 4);
  put_u32(out, kFeatureVersion);
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  out.reserve(out.size() + 4 * static_cast<std::size_t>(features.size()));
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    for (Eigen::Index d = 0; d < features.cols(); ++d) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(features(t, d))));
    }
  }
  write_file(path, out);
}

Matrix read_features(const fs::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 16) throw FormatError(path.string(), static_cast<std::int64_t>(in.size()), "truncated header");
  if (std::memcmp(in.data(), kFeatureMagic, 4) != 0) throw FormatError(path.string(), 0, "bad magic (expected UAVF)");
  const std::uint32_t version = get_u32(in, 4);
  if (version != kFeatureVersion) {
    throw FormatError(path.string(), 4, "unsupported version " + std::to_string(version));
  }
  const std::uint64_t T = get_u32(in, 8);
  const std::uint64_t D = get_u32(in, 12);
  const std::uint64_t expected = 16 + 4 * T * D;
  if (in.size() != expected) {
    throw FormatError(path.string(), static_cast<std::int64_t>(std::min<std::uint64_t>(in.size(), expected)),
                      in.size() < expected ? "truncated feature data" : "trailing bytes after feature data");
  }
  Matrix m(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(D));
  std::size_t offset = 16;
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index d = 0; d < m.cols(); ++d, offset += 4) {
      m(t, d) = static_cast<double>(std::bit_cast<float>(get_u32(in, offset)));
    }
  }
  return m;
}

void write_segments(const std::vector<Segment>& segments, const fs::path& path) {
  json arr = json::array();
  for (const Segment& s : segments) arr.push_back({{"action", s.action}, {"start", s.start}, {"end", s.end}});
  write_file(path, json{{"segments", arr}}.dump(1) + "\n");
}

std::vector<Segment> read_segments(const fs::path& path) {
  const json j = parse_json_file(path);
  const json arr = required<json>(j, "segments", path);
  if (!arr.is_array()) throw FormatError(path.string(), -1, "'segments' is not an array");
  std::vector<Segment> out;
  for (const json& s : arr) {
    out.push_back({required<int>(s, "action", path), required<int>(s, "start", path), required<int>(s, "end", path)});
  }
  return out;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "features");
  json videos = json::array();
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const FeatureSequence& v = ds.videos[i];
    json entry = {{"video_id", v.video_id}, {"feature_file", "features/" + v.video_id + ".uavf"}};
    if (v.task_id != ds.task_id) entry["task_id"] = v.task_id;
    write_features(v.features, dir / "features" / (v.video_id + ".uavf"));
    if (i < ds.ground_truth.size() && ds.ground_truth[i]) {
      entry["gt_file"] = "gt/" + v.video_id + ".json";
      write_segments(*ds.ground_truth[i], dir / "gt" / (v.video_id + ".json"));
    }
    videos.push_back(entry);
  }
  json manifest = {{"task_id", ds.task_id}, {"D", ds.feature_dim}, {"videos", videos}};
  if (ds.k_true) manifest["k_true"] = *ds.k_true;
  write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw FormatError(manifest_path.string(), -1, "missing manifest");
  const json manifest = parse_json_file(manifest_path);
  Dataset ds;
  ds.task_id = required<std::string>(manifest, "task_id", manifest_path);
  ds.feature_dim = required<int>(manifest, "D", manifest_path);
  if (manifest.contains("k_true")) ds.k_true = required<int>(manifest, "k_true", manifest_path);
  const json videos = required<json>(manifest, "videos", manifest_path);
  if (!videos.is_array()) throw FormatError(manifest_path.string(), -1, "'videos' is not an array");
  bool any_gt = false;
  std::vector<std::optional<std::vector<Segment>>> gt;
  for (const json& entry : videos) {
    FeatureSequence seq;
    seq.video_id = required<std::string>(entry, "video_id", manifest_path);
    seq.task_id = entry.contains("task_id") ? required<std::string>(entry, "task_id", manifest_path) : ds.task_id;
    const fs::path feature_path = dir / required<std::string>(entry, "feature_file", manifest_path);
    seq.features = read_features(feature_path);
    if (seq.dim() != ds.feature_dim) {
      throw FormatError(feature_path.string(), 12, "feature dim " + std::to_string(seq.dim()) +
                                                       " does not match manifest D=" + std::to_string(ds.feature_dim));
    }
    if (entry.contains("gt_file")) {
      const fs::path gt_path = dir / required<std::string>(entry, "gt_file", manifest_path);
      std::vector<Segment> segs = read_segments(gt_path);
      const auto problems = segment_violations(segs, seq.length(), ds.k_true);
      if (!problems.empty()) throw FormatError(gt_path.string(), -1, "invalid ground truth: " + problems.front());
      gt.emplace_back(std::move(segs));
      any_gt = true;
    } else {
      gt.emplace_back(std::nullopt);
    }
    ds.videos.push_back(std::move(seq));
  }
  if (any_gt) ds.ground_truth = std::move(gt);
  const auto problems = validate(ds);
  if (!problems.empty()) {
    throw FormatError(manifest_path.string(), -1, problems.front().video_id + ": " + problems.front().rule);
  }
  return ds;
}

}  // namespace segdiscover
