#pragma once

// Default synthetic benchmark suite: three labelled target datasets with the
// reference sensor grids at reduced spatial size, plus an unlabeled source
// corpus on heterogeneous grids.

#include <filesystem>

#include "hsx/data/manifest.hpp"
#include "hsx/data/synthetic.hpp"

namespace hsx {

struct DatasetSpec {
  std::string name;
  std::size_t bands = 15;
  double first_nm = 470, last_nm = 630;
  std::size_t classes = 6;
  std::size_t cubes = 40;
  std::size_t height = 32, width = 32;
  SplitRatios ratios{0.5, 0.3, 0.2};
  double noise = 0.05;
  double jitter = 0.3;
  double smoothness = 3.0;
  double ignore_margin = 0.05;

  WavelengthGrid grid() const { return WavelengthGrid::linspace(first_nm, last_nm, bands); }
};

struct SourceSpec {
  std::size_t cubes = 24;
  std::size_t height = 32, width = 32;
  std::size_t materials = 12;
  double noise = 0.02;
  double jitter = 0.3;
};

struct SuiteSpec {
  std::vector<DatasetSpec> datasets;
  SourceSpec source;
  std::uint64_t seed = 42;
};

/// Geometries follow the reference sensors (bands, range, split ratios);
/// cubes are 32 x 32 and there are 40 per dataset.
inline SuiteSpec default_suite(std::uint64_t seed = 42) {
  SuiteSpec s;
  s.seed = seed;
  DatasetSpec hyko2{"hyko2", 15, 470, 630, 6};
  hyko2.ratios = {0.50, 0.30, 0.20};
  DatasetSpec hcv{"hcv", 128, 450, 950, 8};
  hcv.ratios = {0.72, 0.20, 0.08};
  DatasetSpec hsidrive{"hsidrive", 25, 600, 975, 5};
  hsidrive.ratios = {0.60, 0.20, 0.20};
  hsidrive.noise = 0.07;
  s.datasets = {hyko2, hcv, hsidrive};
  return s;
}

/// Grids of the source corpus: the wide 128-band sensor for every other cube,
/// random grids in between.
inline WavelengthGrid source_grid(std::size_t index, std::uint64_t seed) {
  if (index % 2 == 0) return WavelengthGrid::linspace(450, 950, 128);
  CounterRng rng(seed, stream("source.grid").child(index));
  const double first = rng.uniform(420, 700);
  const double last = std::min(990.0, first + rng.uniform(120, 560));
  const auto bands = static_cast<std::size_t>(8 + rng.below(57));
  return WavelengthGrid::linspace(first, last, bands);
}

/// Unlabeled source-domain cubes.
inline std::vector<HyperCube> generate_source(const SourceSpec& spec, std::uint64_t seed) {
  const auto library = generate_endmembers(spec.materials, seed, 2.0, stream("endmembers.source"));
  std::vector<HyperCube> out;
  for (std::size_t i = 0; i < spec.cubes; ++i) {
    SyntheticSceneSpec s;
    s.classes = spec.materials;
    s.height = spec.height;
    s.width = spec.width;
    s.grid = source_grid(i, seed);
    s.noise = spec.noise;
    s.jitter = spec.jitter;
    s.imbalance = 0.0;
    s.seed = StreamId{seed}.child("source").child(i).value;
    s.endmembers = library;
    auto cube = generate_scene(s);
    cube.labels.reset();
    out.push_back(std::move(cube));
  }
  return out;
}

/// Labelled cubes of one dataset (shared endmembers, one scene per cube).
inline std::vector<HyperCube> generate_dataset(const DatasetSpec& d, std::uint64_t seed) {
  const auto endmembers = generate_endmembers(d.classes, seed, 2.0, stream("endmembers").child(d.name));
  std::vector<HyperCube> out;
  for (std::size_t i = 0; i < d.cubes; ++i) {
    SyntheticSceneSpec s;
    s.classes = d.classes;
    s.height = d.height;
    s.width = d.width;
    s.grid = d.grid();
    s.noise = d.noise;
    s.jitter = d.jitter;
    s.smoothness = d.smoothness;
    s.ignore_margin = d.ignore_margin;
    s.seed = StreamId{seed}.child(d.name).child(i).value;
    s.endmembers = endmembers;
    out.push_back(generate_scene(s));
  }
  return out;
}

inline std::string cube_file_name(std::size_t i) {
  std::string n = std::to_string(i);
  return "cubes/" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n + ".hscb";
}

/// Writes <out>/<dataset>/manifest.txt with its cubes, and <out>/source/.
/// Returns the manifest paths of the target datasets.
inline std::vector<std::filesystem::path> write_suite(const SuiteSpec& suite, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  std::vector<fs::path> manifests;
  for (const auto& d : suite.datasets) {
    const auto dir = out / d.name;
    fs::create_directories(dir / "cubes");
    auto cubes = generate_dataset(d, suite.seed);
    std::vector<std::string> paths;
    for (std::size_t i = 0; i < cubes.size(); ++i) {
      paths.push_back(cube_file_name(i));
      write_cube(cubes[i], (dir / paths.back()).string());
    }
    DatasetManifest m;
    m.name = d.name;
    for (std::size_t k = 0; k < d.classes; ++k) m.class_names.push_back("class" + std::to_string(k));
    m.seed = suite.seed;
    m.entries = make_splits(paths, d.ratios, suite.seed);
    save_manifest(m, (dir / "manifest.txt").string());
    manifests.push_back(dir / "manifest.txt");
  }
  const auto src = out / "source";
  fs::create_directories(src / "cubes");
  auto cubes = generate_source(suite.source, suite.seed);
  DatasetManifest m;
  m.name = "source";
  m.class_names = {"unlabeled"};
  m.seed = suite.seed;
  for (std::size_t i = 0; i < cubes.size(); ++i) {
    m.entries.push_back({cube_file_name(i), Split::Train});
    write_cube(cubes[i], (src / m.entries.back().path).string());
  }
  save_manifest(m, (src / "manifest.txt").string());
  return manifests;
}

/// Reads every cube listed in a source manifest (grids may differ).
inline std::vector<HyperCube> load_source(const std::filesystem::path& manifest_path) {
  const auto m = load_manifest(manifest_path.string());
  std::vector<HyperCube> out;
  for (const auto& e : m.entries) {
    auto c = read_cube((manifest_path.parent_path() / e.path).string());
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace hsx
