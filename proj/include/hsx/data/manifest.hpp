#pragma once

// Dataset manifests, seeded splits and nested limited-data subsets.
//
// Manifest text:
//   name = hyko2
//   classes = road, grass, ...
//   seed = 42
//   [entry]
//   path = cubes/000.hscb
//   split = train

#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>

#include "hsx/core/keyvalue.hpp"
#include "hsx/core/rng.hpp"
#include "hsx/data/cube.hpp"

namespace hsx {

enum class Split { Train, Val, Test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::Data, "unknown split tag '" + std::string(s) + "'");
}

struct ManifestEntry {
  std::string path;
  Split split = Split::Train;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 42;

  std::size_t classes() const { return class_names.size(); }

  std::vector<ManifestEntry> split(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(e);
    return out;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "name = " << name << "\nclasses = ";
    for (std::size_t i = 0; i < class_names.size(); ++i) os << (i ? ", " : "") << class_names[i];
    os << "\nseed = " << seed << '\n';
    for (const auto& e : entries) os << "\n[entry]\npath = " << e.path << "\nsplit = " << to_string(e.split) << '\n';
    return os.str();
  }

  static DatasetManifest parse(std::string_view text) {
    auto doc = KvDocument::parse(text);
    DatasetManifest m;
    m.name = doc.root().get("name");
    m.class_names = doc.root().get_list("classes");
    m.seed = static_cast<std::uint64_t>(doc.root().get_int("seed", 42));
    for (const auto* s : doc.sections("entry")) m.entries.push_back({s->get("path"), parse_split(s->get("split"))});
    if (m.class_names.empty() || (m.class_names.size() == 1 && m.class_names[0].empty()))
      throw Error(ErrorKind::Data, "manifest '" + m.name + "' declares no classes");
    return m;
  }
};

inline DatasetManifest load_manifest(const std::string& path) { return DatasetManifest::parse(read_file_text(path)); }
inline void save_manifest(const DatasetManifest& m, const std::string& path) { write_file_text(path, m.to_text()); }

/// Called with (entry, split) whenever a cube is read through a manifest.
using LoadObserver = std::function<void(const ManifestEntry&)>;

/// Reads the cubes of one split (paths relative to `base`), validating class
/// ids and that every cube shares the first cube's wavelength grid.
inline std::vector<HyperCube> load_split(const DatasetManifest& m, Split s, const std::filesystem::path& base,
                                         const LoadObserver& observer = {}) {
  std::vector<HyperCube> out;
  for (const auto& e : m.split(s)) {
    if (observer) observer(e);
    auto cube = read_cube((base / e.path).string());
    cube.validate(m.classes());
    if (!out.empty() && cube.grid != out.front().grid)
      throw Error(ErrorKind::Data, "cube '" + e.path + "' has a " + std::to_string(cube.bands()) +
                                       "-band grid, expected " + std::to_string(out.front().bands()));
    out.push_back(std::move(cube));
  }
  return out;
}

struct SplitRatios {
  double train = 1, val = 0, test = 0;
};

/// Largest-remainder apportionment of n items (ties go to the earlier part).
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
  const double sum = r.train + r.val + r.test;
  if (std::fabs(sum - 1.0) > 1e-9 || r.train < 0 || r.val < 0 || r.test < 0)
    throw Error(ErrorKind::Config, "split ratios must be non-negative and sum to 1");
  const std::array<double, 3> q{r.train * static_cast<double>(n), r.val * static_cast<double>(n),
                                r.test * static_cast<double>(n)};
  std::array<std::size_t, 3> out{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) used += out[i] = static_cast<std::size_t>(std::floor(q[i] + 1e-9));
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return q[a] - std::floor(q[a] + 1e-9) > q[b] - std::floor(q[b] + 1e-9);
  });
  for (std::size_t k = 0; used < n; ++k, ++used) ++out[order[k % 3]];
  return out;
}

/// Seeded shuffle, then contiguous train | val | test assignment.
inline std::vector<ManifestEntry> make_splits(std::vector<std::string> paths, const SplitRatios& r,
                                              std::uint64_t seed) {
  const auto sizes = split_sizes(paths.size(), r);
  CounterRng rng(seed, stream("splits"));
  const auto perm = rng.permutation(paths.size());
  std::vector<ManifestEntry> out(paths.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const Split s = i < sizes[0] ? Split::Train : i < sizes[0] + sizes[1] ? Split::Val : Split::Test;
    out[perm[i]] = {std::move(paths[perm[i]]), s};
  }
  return out;
}

/// ceil(fraction * N) items, taken as a prefix of one seeded permutation so
/// smaller fractions are always subsets of larger ones. Order is preserved.
template <class Item>
std::vector<Item> subset_training(const std::vector<Item>& train, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorKind::Config, "subset fraction must lie in (0, 1]");
  if (train.empty()) return {};
  const auto n = std::min(train.size(),
                          static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train.size()) - 1e-9)));
  CounterRng rng(seed, stream("subset"));
  auto perm = rng.permutation(train.size());
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  std::vector<Item> out;
  for (auto i : perm) out.push_back(train[i]);
  return out;
}

}  // namespace hsx
