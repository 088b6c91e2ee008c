#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "vasl/error.hpp"
#include "vasl/model.hpp"

namespace vasl {

inline constexpr char kCheckpointMagic[] = "VASL1";

/// Layout (all integers little-endian, values IEEE-754 binary64 LE):
///   "VASL1"
///   u64 config length, config text (canonical key = value form)
///   u64 epoch, u64 adam step
///   u64 count, then per parameter (lexicographic name order):
///       u32 name length, name, 4 x u64 dims, values
///   u64 count, then buffers in the same record form
///   u64 count, then per moment entry: u32 name length, name, m values, v values
namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const std::string& s) { out_ += s; }
  void name(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  const std::string& bytes() const { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : in_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string name() { return raw(u32()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint: truncated file at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

inline void write_tensor_record(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.name(name);
  for (std::size_t d : t.shape().dims()) w.u64(d);
  for (double v : t.data()) w.f64(v);
}

inline void read_tensor_record(ByteReader& r, const std::map<std::string, Tensor>& into, const char* kind) {
  const std::string name = r.name();
  auto it = into.find(name);
  if (it == into.end()) throw DataError(std::string("checkpoint: unexpected ") + kind + " '" + name + "'");
  const Shape expect = it->second.shape();
  std::array<std::size_t, 4> dims{};
  for (auto& d : dims) d = r.u64();
  if (dims != expect.dims())
    throw DataError(std::string("checkpoint: ") + kind + " '" + name + "' has dims " +
                    Shape(dims[0], dims[1], dims[2], dims[3]).str() + ", config expects " + expect.str());
  Tensor t = it->second;
  for (double& v : t.mutable_data()) v = r.f64();
}

}  // namespace detail

inline std::string checkpoint_bytes(const SpliceNet& net, std::uint64_t epoch) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  const std::string cfg = net.config().to_text();
  w.u64(cfg.size());
  w.raw(cfg);
  w.u64(epoch);
  const ParamStore& store = net.params();
  w.u64(store.step());
  w.u64(store.params().size());
  for (const auto& [name, t] : store.params()) detail::write_tensor_record(w, name, t);
  w.u64(store.buffers().size());
  for (const auto& [name, t] : store.buffers()) detail::write_tensor_record(w, name, t);
  w.u64(store.moments().size());
  for (const auto& [name, m] : store.moments()) {
    w.name(name);
    for (double v : m.m) w.f64(v);
    for (double v : m.v) w.f64(v);
  }
  return w.bytes();
}

struct Checkpoint {
  SpliceNet net;
  std::uint64_t epoch = 0;
};

inline Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  detail::ByteReader r(bytes);
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  if (bytes.size() < magic_len || bytes.compare(0, magic_len, kCheckpointMagic) != 0)
    throw DataError("checkpoint: bad magic (not a VASL1 file)");
  r.raw(magic_len);
  const std::string cfg_text = r.raw(r.u64());
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_text(cfg_text);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: embedded config is invalid: ") + e.what());
  }
  Checkpoint ck{build_model(cfg), r.u64()};
  ParamStore& store = ck.net.params();
  store.set_step(r.u64());

  const std::uint64_t n_params = r.u64();
  if (n_params != store.params().size())
    throw DataError("checkpoint: holds " + std::to_string(n_params) + " parameters, config builds " +
                    std::to_string(store.params().size()));
  for (std::uint64_t i = 0; i < n_params; ++i) detail::read_tensor_record(r, store.params(), "parameter");
  const std::uint64_t n_buffers = r.u64();
  if (n_buffers != store.buffers().size())
    throw DataError("checkpoint: holds " + std::to_string(n_buffers) + " buffers, config builds " +
                    std::to_string(store.buffers().size()));
  for (std::uint64_t i = 0; i < n_buffers; ++i) detail::read_tensor_record(r, store.buffers(), "buffer");

  const std::uint64_t n_moments = r.u64();
  for (std::uint64_t i = 0; i < n_moments; ++i) {
    const std::string name = r.name();
    const auto it = store.params().find(name);
    if (it == store.params().end()) throw DataError("checkpoint: optimizer state for unknown parameter '" + name + "'");
    const std::size_t n = it->second.numel();
    auto& m = store.moments()[name];
    m.m.resize(n);
    m.v.resize(n);
    for (double& v : m.m) v = r.f64();
    for (double& v : m.v) v = r.f64();
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes after optimizer state");
  return ck;
}

inline void save_checkpoint(const std::string& path, const SpliceNet& net, std::uint64_t epoch) {
  const std::string bytes = checkpoint_bytes(net, epoch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

}  // namespace vasl
