#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tumornet/error.hpp"
#include "tumornet/model_spec.hpp"
#include "tumornet/network.hpp"

namespace tumornet {

/// Best-model snapshot: architecture, parameters, running statistics and
/// the label names they were trained against.
struct Checkpoint {
  ModelSpec model;
  ParameterSet<float> params;
  std::vector<std::string> class_names;
  std::uint64_t epoch = 0;
  double validation_loss = 0;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// File layout, all integers little-endian:
//
//   magic     8 bytes "TNETCKPT"
//   version   u32
//   model     u32 length + text (model_to_text)
//   classes   u32 count, then u32 length + bytes each
//   epoch     u64
//   val_loss  f64
//   metadata  u32 count, then key and value strings
//   table     u32 count, then per tensor: name string, u32 rank, rank x u64 extents
//   buffers   f32 values of every tensor in table order
//   checksum  u64 FNV-1a of all preceding bytes
inline constexpr char kCheckpointMagic[8] = {'T', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

class ByteWriter {
public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
  ByteReader(const std::vector<std::uint8_t>& b, std::string path) : b_(b), path_(std::move(path)) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  const std::uint8_t* take(std::size_t n) {
    need(n);
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint truncated at byte " + std::to_string(pos_) + ": " + path_);
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  const auto lay = parameter_layout(ck.model);
  check_parameters_match(lay, ck.params.params.size(), ck.params.buffers.size());
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(model_to_text(ck.model));
  w.u32(static_cast<std::uint32_t>(ck.class_names.size()));
  for (const auto& n : ck.class_names) w.str(n);
  w.u64(ck.epoch);
  w.f64(ck.validation_loss);
  w.u32(static_cast<std::uint32_t>(ck.metadata.size()));
  for (const auto& [k, v] : ck.metadata) {
    w.str(k);
    w.str(v);
  }
  std::vector<const Tensor<float>*> all;
  for (const auto& t : ck.params.params) all.push_back(&t);
  for (const auto& t : ck.params.buffers) all.push_back(&t);
  w.u32(static_cast<std::uint32_t>(all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) {
    require_shape(*all[i], lay.specs[i].shape, "checkpoint tensor");
    w.str(lay.specs[i].name);
    w.u32(static_cast<std::uint32_t>(all[i]->rank()));
    for (auto e : all[i]->shape()) w.u64(e);
  }
  for (const auto* t : all)
    for (float v : t->data()) w.f32(v);
  auto& bytes = w.bytes();
  const std::uint64_t sum = detail::fnv1a(bytes.data(), bytes.size());
  w.u64(sum);
  return std::move(bytes);
}

inline Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CheckpointError(Kind::Format, "not a checkpoint file (bad magic bytes): " + path);
  }
  detail::ByteReader r(bytes, path);
  r.take(sizeof kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::Version, "unsupported checkpoint version " + std::to_string(version) +
                                             " (expected " + std::to_string(kCheckpointVersion) + "): " + path);
  }
  Checkpoint ck;
  const std::string model_text = r.str();
  try {
    ck.model = model_from_text(model_text);
  } catch (const ShapeError& e) {
    throw CheckpointError(Kind::Format, std::string("corrupt model description in ") + path + ": " + e.what());
  }
  const std::uint32_t classes = r.u32();
  if (classes != ck.model.class_count) {
    throw CheckpointError(Kind::Format, "class table disagrees with model in " + path);
  }
  for (std::uint32_t i = 0; i < classes; ++i) ck.class_names.push_back(r.str());
  ck.epoch = r.u64();
  ck.validation_loss = r.f64();
  const std::uint32_t meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string k = r.str();
    ck.metadata[k] = r.str();
  }

  const auto lay = parameter_layout(ck.model);
  const std::uint32_t count = r.u32();
  if (count != lay.specs.size()) {
    throw CheckpointError(Kind::ShapeTable, "shape table lists " + std::to_string(count) + " tensors, model needs " +
                                                std::to_string(lay.specs.size()) + ": " + path);
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (name != lay.specs[i].name || rank != lay.specs[i].shape.size()) {
      throw CheckpointError(Kind::ShapeTable, "shape table entry " + std::to_string(i) + " ('" + name +
                                                  "') does not match the model: " + path);
    }
    for (std::uint32_t a = 0; a < rank; ++a) {
      if (r.u64() != lay.specs[i].shape[a]) {
        throw CheckpointError(Kind::ShapeTable, "shape table extent mismatch for '" + name + "': " + path);
      }
    }
  }
  for (const auto& spec : lay.specs) {
    Tensor<float> t(spec.shape);
    for (auto& v : t.data()) v = r.f32();
    (spec.buffer ? ck.params.buffers : ck.params.params).push_back(std::move(t));
  }
  const std::size_t body = r.pos();
  const std::uint64_t stored = r.u64();
  if (r.remaining() != 0) {
    throw CheckpointError(Kind::Format, "trailing bytes after checkpoint payload: " + path);
  }
  if (stored != detail::fnv1a(bytes.data(), body)) {
    throw CheckpointError(Kind::Checksum, "checkpoint checksum mismatch: " + path);
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointError::Kind::Io, "cannot move checkpoint into place: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path.string());
}

} // namespace tumornet
