#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "segdiscover/model/model.hpp"

namespace segdiscover {

inline constexpr char kModelMagic[4] = {'U', 'A', 'V', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

/// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(const std::string& s);
  /// u32 length prefix, then the bytes.
  void blob(const std::string& s);
  /// u32 rank (2), u32 rows, u32 cols, then rows*cols f64 row-major.
  void array(const Matrix& m);

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

/// Reads what ByteWriter wrote; every failure is a FormatError naming the
/// source and offset.
class ByteReader {
 public:
  ByteReader(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string bytes(std::size_t n);
  std::string blob();
  Matrix array();
  void expect_magic(const char (&magic)[4]);

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n) const;

  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Absent keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// "UAVM", u32 version, length-prefixed ModelConfig JSON, each learnable
/// array, then the next-state table as u32 entries.
void write_model(ByteWriter& out, const ModelConfig& cfg, const ModelParams& params);
void read_model(ByteReader& in, ModelConfig& cfg, ModelParams& params);

void save_model(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params);
void load_model(const std::filesystem::path& path, ModelConfig& cfg, ModelParams& params);

}  // namespace segdiscover
