#include "segdiscover/model/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "segdiscover/data/io.hpp"
#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

using nlohmann::json;

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(const std::string& s) { buf_ += s; }

void ByteWriter::blob(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_ += s;
}

void ByteWriter::array(const Matrix& m) {
  u32(2);
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
}

void ByteReader::fail(const std::string& what) const {
  throw FormatError(source_, static_cast<std::int64_t>(pos_), what);
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) fail("truncated: need " + std::to_string(n) + " more bytes");
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string ByteReader::blob() { return bytes(u32()); }

Matrix ByteReader::array() {
  const std::uint32_t rank = u32();
  if (rank != 2) fail("unsupported array rank " + std::to_string(rank));
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  need(8ull * rows * cols);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
  return m;
}

void ByteReader::expect_magic(const char (&magic)[4]) {
  const std::size_t at = pos_;
  const std::string got = bytes(4);
  if (std::memcmp(got.data(), magic, 4) != 0) {
    pos_ = at;
    fail("bad magic (expected " + std::string(magic, 4) + ")");
  }
}

json to_json(const ModelConfig& c) {
  return {{"n_states", c.n_states},   {"rules_per_state", c.rules_per_state},
          {"k", c.k},                 {"use_null", c.use_null},
          {"state_dim", c.state_dim}, {"hidden_dim", c.hidden_dim},
          {"feature_dim", c.feature_dim}, {"temperature", c.temperature},
          {"M", c.M}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.n_states = j.value("n_states", c.n_states);
  c.rules_per_state = j.value("rules_per_state", c.rules_per_state);
  c.k = j.value("k", c.k);
  c.use_null = j.value("use_null", c.use_null);
  c.state_dim = j.value("state_dim", c.state_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.temperature = j.value("temperature", c.temperature);
  c.M = j.value("M", c.M);
  return c;
}

void write_model(ByteWriter& out, const ModelConfig& cfg, const ModelParams& params) {
  out.bytes(std::string(kModelMagic, 4));
  out.u32(kModelVersion);
  out.blob(to_json(cfg).dump());
  params.visit([&](const std::string&, const Matrix& m) { out.array(m); });
  out.u32(static_cast<std::uint32_t>(params.next_state_table.size()));
  for (int s : params.next_state_table) out.u32(static_cast<std::uint32_t>(s));
}

void read_model(ByteReader& in, ModelConfig& cfg, ModelParams& params) {
  in.expect_magic(kModelMagic);
  const std::uint32_t version = in.u32();
  if (version != kModelVersion) in.fail("unsupported model version " + std::to_string(version));
  const std::string cfg_text = in.blob();
  ModelConfig c;
  try {
    c = model_config_from_json(json::parse(cfg_text));
    c.validate();
  } catch (const std::exception& e) {
    in.fail(std::string("bad model config: ") + e.what());
  }
  // Shapes come from a freshly initialized model of the same config.
  Rng shape_rng(0);
  ModelParams p = init_model(c, shape_rng);
  p.visit([&](const std::string& name, Matrix& m) {
    Matrix loaded = in.array();
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) in.fail("array " + name + " has the wrong shape");
    m = std::move(loaded);
  });
  const std::uint32_t n = in.u32();
  if (n != p.next_state_table.size()) in.fail("next-state table has the wrong size");
  for (int& s : p.next_state_table) {
    const std::uint32_t v = in.u32();
    if (v >= static_cast<std::uint32_t>(c.n_states)) in.fail("next-state entry out of range");
    s = static_cast<int>(v);
  }
  cfg = c;
  params = std::move(p);
}

void save_model(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params) {
  ByteWriter out;
  write_model(out, cfg, params);
  write_file(path, out.buffer());
}

void load_model(const std::filesystem::path& path, ModelConfig& cfg, ModelParams& params) {
  const std::string data = read_file(path);
  ByteReader in(data, path.string());
  read_model(in, cfg, params);
  if (!in.at_end()) in.fail("trailing bytes after model");
}

}  // namespace segdiscover
