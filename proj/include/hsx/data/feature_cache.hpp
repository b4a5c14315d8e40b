#pragma once

// Frozen-backbone embedding cache keyed by (checkpoint hash, cube hash).
// Entries live in memory and, optionally, as files in a store directory.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>

#include "hsx/encoder/checkpoint.hpp"

namespace hsx {

struct FeatureCacheEntry {
  Digest key{};
  std::size_t height = 0, width = 0, dim = 0;
  std::vector<float> embeddings;  // H*W*D
};

inline Digest feature_key(const Digest& checkpoint_hash, const Digest& cube_hash) {
  Sha256 h;
  h.update(std::span<const std::uint8_t>(checkpoint_hash));
  h.update(std::span<const std::uint8_t>(cube_hash));
  return h.finish();
}

class FeatureCache {
 public:
  FeatureCache() = default;
  explicit FeatureCache(std::filesystem::path store) : store_(std::move(store)) {
    std::filesystem::create_directories(*store_);
  }

  struct Stats {
    std::size_t hits = 0, misses = 0, encodes = 0;
  };

  /// Embeddings of `cube` under `encoder`; encodes only on a miss.
  std::shared_ptr<const FeatureCacheEntry> get(const FrozenEncoder& encoder, const HyperCube& cube) {
    return get(encoder, cube, cube_content_hash(cube));
  }

  std::shared_ptr<const FeatureCacheEntry> get(const FrozenEncoder& encoder, const HyperCube& cube,
                                               const Digest& cube_hash) {
    const auto key = feature_key(encoder.checkpoint_hash(), cube_hash);
    {
      std::lock_guard lock(mu_);
      if (auto it = mem_.find(key); it != mem_.end()) {
        ++stats_.hits;
        return it->second;
      }
    }
    if (auto e = read_store(key)) {
      std::lock_guard lock(mu_);
      ++stats_.hits;
      return mem_.emplace(key, e).first->second;
    }
    auto entry = std::make_shared<FeatureCacheEntry>();
    entry->key = key;
    entry->height = cube.height;
    entry->width = cube.width;
    entry->dim = encoder.embedding_dim();
    entry->embeddings = encoder.encode_cube(cube);
    write_store(*entry);
    std::lock_guard lock(mu_);
    ++stats_.misses;
    ++stats_.encodes;
    mem_[key] = entry;  // a concurrent duplicate computes identical bytes
    return entry;
  }

  /// Same as get() for an unfrozen checkpoint: rejected.
  std::shared_ptr<const FeatureCacheEntry> get(const EncoderCheckpoint& ck, const HyperCube& cube) {
    if (!ck.frozen) throw Error(ErrorKind::State, "feature caching requires a frozen checkpoint");
    return get(FrozenEncoder(ck), cube);
  }

  Stats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }
  void reset_stats() {
    std::lock_guard lock(mu_);
    stats_ = {};
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return mem_.size();
  }

 private:
  std::filesystem::path file_for(const Digest& key) const { return *store_ / (to_hex(key) + ".feat"); }

  std::shared_ptr<FeatureCacheEntry> read_store(const Digest& key) const {
    if (!store_) return nullptr;
    const auto path = file_for(key);
    if (!std::filesystem::exists(path)) return nullptr;
    auto bytes = read_file_bytes(path.string());
    ByteReader r(bytes);
    r.expect_magic("FEAT", "feature cache entry");
    auto e = std::make_shared<FeatureCacheEntry>();
    auto k = r.bytes(32);
    std::copy(k.begin(), k.end(), e->key.begin());
    if (e->key != key) throw FormatError("feature cache entry key mismatch", 4);
    e->height = r.u32();
    e->width = r.u32();
    e->dim = r.u32();
    e->embeddings.resize(e->height * e->width * e->dim);
    r.f32s(e->embeddings);
    return e;
  }

  void write_store(const FeatureCacheEntry& e) const {
    if (!store_) return;
    ByteWriter w;
    w.magic("FEAT");
    w.bytes(e.key);
    w.u32(static_cast<std::uint32_t>(e.height));
    w.u32(static_cast<std::uint32_t>(e.width));
    w.u32(static_cast<std::uint32_t>(e.dim));
    w.f32s(e.embeddings);
    // Write-then-rename keeps readers from seeing partial files.
    const auto path = file_for(e.key);
    const auto tmp = path.string() + ".tmp";
    write_file_bytes(tmp, w.data());
    std::filesystem::rename(tmp, path);
  }

  std::optional<std::filesystem::path> store_;
  mutable std::mutex mu_;
  std::map<Digest, std::shared_ptr<const FeatureCacheEntry>> mem_;
  Stats stats_;
};

}  // namespace hsx
