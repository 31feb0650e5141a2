// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdsim/matrix.hpp"

namespace fdsim {

// Per-round dump of every device's flattened output vector on the probe
// set. outputs[s] is a (num_devices x vector_length) matrix for rounds[s],
// where "round r" means the state after r completed communication rounds.
struct SnapshotArchive {
  std::size_t num_devices = 0;
  std::size_t vector_length = 0;  // output_dim * probe size
  std::size_t output_dim = 0;
  std::vector<std::size_t> rounds;
  std::vector<Matrix> outputs;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void magic(const char* expect, std::size_t len) {
    need(len);
    if (buf_.compare(pos_, len, expect, len) != 0)
      throw std::runtime_error("snapshot archive: bad magic in " + path_);
    pos_ += len;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw std::runtime_error("snapshot archive: truncated: " + path_);
  }
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr char kSnapshotMagic[] = "FDSNAP01";  // 8 bytes, no terminator on disk

// Little-endian binary layout: magic, u32 num_devices, u32 vector_length,
// u32 output_dim, u32 num_snapshots, then per snapshot a u64 round
// followed by num_devices * vector_length f64 values.
inline void write_snapshots(const SnapshotArchive& a, const std::string& path) {
  std::string buf;
  buf.reserve(32 + a.rounds.size() * (8 + a.num_devices * a.vector_length * 8));
  buf.append(kSnapshotMagic, 8);
  detail::put_u32(buf, static_cast<std::uint32_t>(a.num_devices));
  detail::put_u32(buf, static_cast<std::uint32_t>(a.vector_length));
  detail::put_u32(buf, static_cast<std::uint32_t>(a.output_dim));
  detail::put_u32(buf, static_cast<std::uint32_t>(a.rounds.size()));
  for (std::size_t s = 0; s < a.rounds.size(); ++s) {
    detail::put_u64(buf, a.rounds[s]);
    const Matrix& m = a.outputs[s];
    if (m.rows() != a.num_devices || m.cols() != a.vector_length)
      throw std::invalid_argument("write_snapshots: inconsistent snapshot shape");
    for (double v : m.data()) detail::put_f64(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_snapshots: cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write_snapshots: write failed: " + path);
}

inline SnapshotArchive read_snapshots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_snapshots: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(buf, path);
  r.magic(kSnapshotMagic, 8);
  SnapshotArchive a;
  a.num_devices = r.u32();
  a.vector_length = r.u32();
  a.output_dim = r.u32();
  const std::uint32_t count = r.u32();
  a.rounds.reserve(count);
  a.outputs.reserve(count);
  for (std::uint32_t s = 0; s < count; ++s) {
    a.rounds.push_back(static_cast<std::size_t>(r.u64()));
    Matrix m(a.num_devices, a.vector_length);
    for (double& v : m.data()) v = r.f64();
    a.outputs.push_back(std::move(m));
  }
  if (!r.done()) throw std::runtime_error("read_snapshots: trailing bytes in " + path);
  return a;
}

}  // namespace fdsim
