#pragma once

// Encoder checkpoints ("MHSL" container) and the frozen-encoder handle.

#include <memory>

#include "hsx/encoder/encoder.hpp"

namespace hsx {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EncoderCheckpoint {
  EncoderConfig config;
  std::vector<StoredArray> weights;  // Encoder::params() order
  bool frozen = false;               // runtime flag, not part of the file or hash

  template <class T>
  static EncoderCheckpoint from(const Encoder<T>& enc) {
    return {enc.config(), store_all(enc.params()), false};
  }

  template <class T>
  Encoder<T> instantiate() const {
    Encoder<T> enc(config);
    auto p = enc.params();
    restore_all(p, weights);
    return enc;
  }

  std::vector<std::uint8_t> payload() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(config.layers));
    w.u32(static_cast<std::uint32_t>(config.heads));
    w.u32(static_cast<std::uint32_t>(config.d_model));
    w.u32(static_cast<std::uint32_t>(config.d_ff));
    w.f64(config.pe_scale);
    w.u32(static_cast<std::uint32_t>(weights.size()));
    for (const auto& a : weights) write_array(w, a);
    return w.take();
  }

  /// Pure function of config and weights.
  Digest hash() const { return sha256(payload()); }

  /// Hash of the backbone weights only (tokenizer, mask token, layers, final norm).
  Digest backbone_hash() const {
    auto enc = instantiate<float>();
    return params_hash(enc.backbone_params());
  }
};

inline std::vector<std::uint8_t> encode_checkpoint(const EncoderCheckpoint& ck) {
  return wrap_container("MHSL", kCheckpointVersion, ck.payload());
}

inline EncoderCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  auto view = open_container(bytes, "MHSL", kCheckpointVersion);
  PayloadReader r(view);
  EncoderCheckpoint ck;
  const auto cfg_at = r.file_offset();
  ck.config.layers = r.u32();
  ck.config.heads = r.u32();
  ck.config.d_model = r.u32();
  ck.config.d_ff = r.u32();
  ck.config.pe_scale = r.f64();
  try {
    ck.config.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid encoder config: ") + e.what(), cfg_at);
  }
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) ck.weights.push_back(read_array(r));
  if (r.remaining() != 0) throw FormatError("trailing bytes in checkpoint payload", r.file_offset());
  // Validates shapes against the declared config.
  const auto at = r.file_offset();
  try {
    (void)ck.instantiate<float>();
  } catch (const Error& e) {
    throw FormatError(e.what(), at);
  }
  return ck;
}

inline void save_checkpoint(const EncoderCheckpoint& ck, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(ck));
}

inline EncoderCheckpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

/// Marks a checkpoint as frozen: downstream code may only read it.
inline EncoderCheckpoint freeze(EncoderCheckpoint ck) {
  ck.frozen = true;
  return ck;
}

/// Immutable, gradient-free encoder built from a frozen checkpoint. Safe to
/// share across threads for feature extraction.
class FrozenEncoder {
 public:
  explicit FrozenEncoder(const EncoderCheckpoint& ck) : hash_(ck.hash()) {
    if (!ck.frozen) throw Error(ErrorKind::State, "feature extraction requires a frozen checkpoint");
    auto enc = ck.instantiate<float>();
    enc.set_trainable(false);
    enc_ = std::make_shared<const Encoder<float>>(std::move(enc));
  }

  const Digest& checkpoint_hash() const { return hash_; }
  std::size_t embedding_dim() const { return enc_->embedding_dim(); }
  const Encoder<float>& encoder() const { return *enc_; }

  /// Pixel embeddings for `count` spectra laid out contiguously -> count*D floats.
  std::vector<float> encode_spectra(std::span<const float> spectra, const WavelengthGrid& grid,
                                    std::size_t chunk = 256) const {
    const std::size_t C = grid.size(), D = embedding_dim();
    const std::size_t count = spectra.size() / C;
    std::vector<float> out(count * D);
    for (std::size_t start = 0; start < count; start += chunk) {
      const std::size_t b = std::min(chunk, count - start);
      std::vector<float> v(spectra.begin() + static_cast<long>(start * C),
                           spectra.begin() + static_cast<long>((start + b) * C));
      auto e = enc_->encode(tensor::Tensor<float>({b, C}, std::move(v)), grid);
      std::copy(e.pixel.values().begin(), e.pixel.values().end(), out.begin() + static_cast<long>(start * D));
    }
    return out;
  }

  /// H x W x D embedding map of a cube.
  std::vector<float> encode_cube(const HyperCube& cube, std::size_t chunk = 256) const {
    return encode_spectra(cube.reflectance, cube.grid, chunk);
  }

 private:
  std::shared_ptr<const Encoder<float>> enc_;
  Digest hash_;
};

}  // namespace hsx
