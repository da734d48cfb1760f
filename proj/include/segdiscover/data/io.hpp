#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segdiscover/data/dataset.hpp"

namespace segdiscover {

// Feature file: "UAVF", u32 version (1), u32 T, u32 D, then T*D float32
// row-major, all little-endian.
inline constexpr char kFeatureMagic[4] = {'U', 'A', 'V', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_features(const Matrix& features, const std::filesystem::path& path);
Matrix read_features(const std::filesystem::path& path);

/// {"segments": [{"action": int (-1 = null), "start": int, "end": int}]}
void write_segments(const std::vector<Segment>& segments, const std::filesystem::path& path);
std::vector<Segment> read_segments(const std::filesystem::path& path);

/// Layout: dir/manifest.json, dir/features/<id>.uavf, dir/gt/<id>.json.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Loads and validates; any invariant violation is a FormatError.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes bytes atomically enough for our purposes: full buffer, then close.
void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace segdiscover
