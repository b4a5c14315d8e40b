#pragma once

// Shared binary container for model files:
//   4-byte magic | u32 version | payload | 32-byte SHA-256 of the payload
// The magic distinguishes the content ("MHSL" encoder checkpoints, "MHED"
// trained heads, "MRKT" fitted random-kernel transforms).

#include <string>
#include <string_view>
#include <vector>

#include "hsx/core/bytes.hpp"
#include "hsx/core/hash.hpp"
#include "hsx/tensor/optim.hpp"

namespace hsx {

inline std::vector<std::uint8_t> wrap_container(std::string_view magic, std::uint32_t version,
                                                const std::vector<std::uint8_t>& payload) {
  ByteWriter w;
  w.magic(magic);
  w.u32(version);
  w.bytes(payload);
  const auto d = sha256(payload);
  w.bytes(d);
  return w.take();
}

struct ContainerView {
  std::span<const std::uint8_t> payload;
  std::size_t payload_offset = 0;
  Digest hash{};
};

/// Validates magic, version and trailing hash; returns the payload span.
inline ContainerView open_container(std::span<const std::uint8_t> bytes, std::string_view magic,
                                    std::uint32_t version) {
  ByteReader r(bytes);
  r.expect_magic(magic, "container");
  const auto version_at = r.offset();
  const auto v = r.u32();
  if (v != version)
    throw FormatError(std::string(magic) + " version mismatch: file has " + std::to_string(v) + ", expected " +
                          std::to_string(version),
                      version_at);
  if (r.remaining() < 32) throw FormatError("truncated container: missing content hash", r.offset());
  ContainerView view;
  view.payload_offset = r.offset();
  view.payload = r.bytes(r.remaining() - 32);
  const auto hash_at = r.offset();
  auto stored = r.bytes(32);
  std::copy(stored.begin(), stored.end(), view.hash.begin());
  if (sha256(view.payload) != view.hash) throw FormatError("content hash mismatch", hash_at);
  return view;
}

/// Payload reader that reports offsets relative to the whole file.
class PayloadReader : public ByteReader {
 public:
  explicit PayloadReader(const ContainerView& v) : ByteReader(v.payload), base_(v.payload_offset) {}
  std::size_t file_offset() const { return base_ + offset(); }

 private:
  std::size_t base_;
};

/// A tensor as stored on disk (always 32-bit).
struct StoredArray {
  tensor::Shape shape;
  std::vector<float> data;

  bool operator==(const StoredArray&) const = default;
};

inline void write_array(ByteWriter& w, const StoredArray& a) {
  w.u32(static_cast<std::uint32_t>(a.shape.size()));
  for (auto d : a.shape) w.u32(static_cast<std::uint32_t>(d));
  w.f32s(a.data);
}

inline StoredArray read_array(PayloadReader& r) {
  StoredArray a;
  const auto at = r.file_offset();
  const auto rank = r.u32();
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank), at);
  a.shape.resize(rank);
  for (auto& d : a.shape) d = r.u32();
  const std::size_t n = tensor::numel(a.shape);
  r.require(n * sizeof(float), "tensor data");
  a.data.resize(n);
  r.f32s(a.data);
  return a;
}

template <class T>
StoredArray store(const tensor::Tensor<T>& t) {
  StoredArray a{t.shape(), std::vector<float>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) a.data[i] = static_cast<float>(t[i]);
  return a;
}

/// Copies stored values into an existing tensor of identical shape.
template <class T>
void restore(tensor::Tensor<T>& t, const StoredArray& a, const std::string& name) {
  if (t.shape() != a.shape)
    throw Error(ErrorKind::Format, "parameter '" + name + "' has shape " + tensor::shape_str(a.shape) +
                                       " in file but " + tensor::shape_str(t.shape()) + " in model");
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(a.data[i]);
}

template <class T>
std::vector<StoredArray> store_all(const tensor::ParamList<T>& p) {
  std::vector<StoredArray> out;
  for (const auto& [n, t] : p.items) out.push_back(store(t));
  return out;
}

template <class T>
void restore_all(tensor::ParamList<T>& p, const std::vector<StoredArray>& arrays) {
  if (arrays.size() != p.items.size())
    throw Error(ErrorKind::Format, "parameter count mismatch: file has " + std::to_string(arrays.size()) +
                                       ", model has " + std::to_string(p.items.size()));
  for (std::size_t i = 0; i < arrays.size(); ++i) restore(p.items[i].second, arrays[i], p.items[i].first);
}

/// SHA-256 over the 32-bit images of a parameter list (weights only).
template <class T>
Digest params_hash(const tensor::ParamList<T>& p) {
  Sha256 h;
  for (const auto& [n, t] : p.items) {
    auto a = store(t);
    h.update(n);
    h.update_pod(std::span<const float>(a.data));
  }
  return h.finish();
}

}  // namespace hsx
