#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsx/core/error.hpp"

namespace hsx {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// Append-only little-endian buffer.
class ByteWriter {
 public:
  void magic(std::string_view m) { raw(m.data(), m.size()); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void zeros(std::size_t n) { buf_.insert(buf_.end(), n, 0); }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32s(std::span<const float> v) { raw(v.data(), v.size() * sizeof(float)); }
  void u16s(std::span<const std::uint16_t> v) { raw(v.data(), v.size() * sizeof(std::uint16_t)); }
  void bytes(std::span<const std::uint8_t> v) { raw(v.data(), v.size()); }

  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::vector<std::uint8_t>&& take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; every failure reports its offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void expect_magic(std::string_view m, std::string_view what) {
    require(m.size(), "magic");
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0)
      throw FormatError("bad magic, expected \"" + std::string(m) + "\" for " + std::string(what),
                        pos_);
    pos_ += m.size();
  }
  std::uint8_t u8() { return get<std::uint8_t>("u8"); }
  std::uint16_t u16() { return get<std::uint16_t>("u16"); }
  std::uint32_t u32() { return get<std::uint32_t>("u32"); }
  std::uint64_t u64() { return get<std::uint64_t>("u64"); }
  float f32() { return get<float>("f32"); }
  double f64() { return get<double>("f64"); }
  void skip(std::size_t n) {
    require(n, "padding");
    pos_ += n;
  }

  std::string str() {
    const auto n = u32();
    require(n, "string");
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void f32s(std::span<float> out) { array(out.data(), out.size() * sizeof(float), "f32 array"); }
  void u16s(std::span<std::uint16_t> out) {
    array(out.data(), out.size() * sizeof(std::uint16_t), "u16 array");
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    require(n, "bytes");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  void require(std::size_t n, std::string_view what) const {
    if (n > remaining())
      throw FormatError("truncated input while reading " + std::string(what) + " (need " +
                            std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                            " left)",
                        pos_);
  }

 private:
  template <class V>
  V get(std::string_view what) {
    require(sizeof(V), what);
    V v;
    std::memcpy(&v, data_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  void array(void* out, std::size_t n, std::string_view what) {
    require(n, what);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> buf(n);
  if (n > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  return buf;
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Data, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Data, "short write to " + path);
}

inline std::string read_file_text(const std::string& path) {
  auto b = read_file_bytes(path);
  return std::string(b.begin(), b.end());
}

inline void write_file_text(const std::string& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace hsx
