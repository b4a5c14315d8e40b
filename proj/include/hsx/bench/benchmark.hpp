#pragma once

// Benchmark matrix: datasets x approaches x fractions, run on worker threads,
// assembled into a ComparisonTable once every cell has finished.

#include <atomic>
#include <mutex>
#include <thread>

#include "hsx/bench/experiment.hpp"
#include "hsx/bench/plot.hpp"
#include "hsx/bench/table.hpp"

namespace hsx {

/// Approach ids map to (strategy, task, model):
///   unet, runet                        in-domain segmentation
///   hsl-runet                          cross-domain segmentation
///   prgb-runet                         cross-modality segmentation
///   justoliu, minirocket, hdc-minirocket in-domain spectral
///   hsl-fc, hsl-finetune               cross-domain spectral
struct Approach {
  std::string id;
  Strategy strategy;
  Task task;
  std::string model;
  std::string backbone;  // table column
  std::string data;      // table column
};

inline Approach parse_approach(std::string_view id) {
  const std::string s(id);
  if (s == "unet") return {s, Strategy::InDomain, Task::Segmentation, "unet", "none", "HSI"};
  if (s == "runet") return {s, Strategy::InDomain, Task::Segmentation, "runet", "none", "HSI"};
  if (s == "hsl-runet") return {s, Strategy::CrossDomain, Task::Segmentation, "runet", "hsl", "HSI"};
  if (s == "prgb-runet") return {s, Strategy::CrossModality, Task::Segmentation, "runet", "none", "pRGB"};
  if (s == "justoliu" || s == "minirocket" || s == "hdc-minirocket")
    return {s, Strategy::InDomain, Task::Spectral, s, "none", "HSI"};
  if (s == "hsl-fc") return {s, Strategy::CrossDomain, Task::Spectral, "fc", "hsl", "HSI"};
  if (s == "hsl-finetune") return {s, Strategy::CrossDomain, Task::Spectral, "finetune", "hsl", "HSI"};
  throw Error(ErrorKind::Config, "unknown approach '" + s + "'");
}

struct BenchmarkSpec {
  std::vector<std::string> datasets;  // manifest paths
  std::vector<std::string> approaches{"unet", "runet", "hsl-runet"};
  std::vector<double> fractions{0.10, 0.25, 1.0};
  std::string checkpoint;
  std::uint64_t seed = 42;
  KvDocument overrides;  // [train] / [unet] / [neck] / [hdc] / [projection] sections
  std::string delta_minuend = "hsl-runet", delta_subtrahend = "runet";

  static BenchmarkSpec from_kv(const KvDocument& doc, const std::filesystem::path& base = {}) {
    BenchmarkSpec b;
    const auto& r = doc.root();
    auto resolve = [&](const std::string& p) {
      if (p.empty() || std::filesystem::path(p).is_absolute() || base.empty()) return p;
      return (base / p).lexically_normal().string();
    };
    for (const auto& d : r.get_list("datasets")) b.datasets.push_back(resolve(d));
    if (r.has("approaches")) b.approaches = r.get_list("approaches");
    if (r.has("fractions")) {
      b.fractions.clear();
      for (const auto& f : r.get_list("fractions")) {
        KvSection tmp;
        tmp.set("f", f);
        b.fractions.push_back(tmp.get_double("f"));
      }
    }
    b.checkpoint = resolve(r.get("checkpoint", ""));
    b.seed = static_cast<std::uint64_t>(r.get_int("seed", 42));
    b.delta_minuend = r.get("delta_minuend", b.delta_minuend);
    b.delta_subtrahend = r.get("delta_subtrahend", b.delta_subtrahend);
    b.overrides = doc;
    b.validate();
    return b;
  }

  void validate() const {
    if (datasets.empty()) throw Error(ErrorKind::Config, "benchmark lists no datasets");
    if (approaches.empty()) throw Error(ErrorKind::Config, "benchmark lists no approaches");
    for (double f : fractions)
      if (!allowed_fraction(f)) throw Error(ErrorKind::Config, "fraction must be one of 0.10, 0.25, 1.0");
    for (const auto& a : approaches)
      if (parse_approach(a).strategy == Strategy::CrossDomain && checkpoint.empty())
        throw Error(ErrorKind::Config, "approach '" + a + "' requires a checkpoint");
  }
};

struct BenchmarkCell {
  std::string dataset_name;
  std::string run_name;
  Approach approach;
  ExperimentConfig config;
};

/// Expands the matrix in (dataset, approach, fraction) order.
inline std::vector<BenchmarkCell> expand(const BenchmarkSpec& spec) {
  std::vector<BenchmarkCell> cells;
  for (const auto& ds : spec.datasets) {
    const auto name = load_manifest(ds).name;
    for (const auto& aid : spec.approaches) {
      const auto a = parse_approach(aid);
      for (double f : spec.fractions) {
        KvDocument doc;
        auto& r = doc.root();
        r.set("strategy", to_string(a.strategy));
        r.set("task", to_string(a.task));
        r.set("model", a.model);
        r.set("dataset", ds);
        r.set("fraction", ExperimentConfig::num(f));
        if (a.strategy == Strategy::CrossDomain) r.set("checkpoint", spec.checkpoint);
        for (const char* sec : {"unet", "neck", "hdc"})
          if (const auto* s = spec.overrides.section(sec)) {
            auto& dst = doc.add_section(sec);
            for (const auto& [k, v] : s->values()) dst.set(k, v);
          }
        // [train] applies to every approach, [train.<approach>] on top of it.
        auto& t = doc.add_section("train");
        for (const auto* s : {spec.overrides.section("train"), spec.overrides.section("train." + aid)})
          if (s)
            for (const auto& [k, v] : s->values()) t.set(k, v);
        t.set("seed", std::to_string(spec.seed));
        if (a.strategy == Strategy::CrossModality) {
          auto& p = doc.add_section("projection");
          const auto* s = spec.overrides.section("projection");
          p.set("method", s ? s->get("method", "cie") : "cie");
        }
        auto cfg = ExperimentConfig::from_kv(doc);
        cells.push_back({name, name + "_" + aid + "_" + fixed(f, 2), a, std::move(cfg)});
      }
    }
  }
  return cells;
}

struct BenchmarkResult {
  ComparisonTable table;
  std::vector<RunRecord> records;  // cell order
  std::vector<ComparisonTable::Delta> deltas;
};

/// Runs every cell on `threads` workers sharing one feature cache. Results
/// are assembled in cell order, so output is independent of scheduling.
inline BenchmarkResult run_benchmark(const BenchmarkSpec& spec, std::size_t threads = 1,
                                     const std::filesystem::path& out = {}, FeatureCache* cache = nullptr,
                                     const std::function<void(const BenchmarkCell&, const RunRecord&)>& progress = {}) {
  spec.validate();
  const auto cells = expand(spec);
  FeatureCache local;
  if (!cache) cache = &local;
  std::vector<std::optional<RunRecord>> records(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu, log_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard lock(err_mu);
        if (error) return;
      }
      try {
        RunContext ctx;
        ctx.cache = cache;
        auto rec = run_experiment(cells[i].config, ctx);
        rec.name = cells[i].run_name;
        if (!out.empty()) {
          const auto m = load_manifest(cells[i].config.dataset);
          write_run(rec, m.class_names, out / "runs" / rec.name);
        }
        if (progress) {
          std::lock_guard lock(log_mu);
          progress(cells[i], rec);
        }
        records[i] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const auto n = std::max<std::size_t>(1, std::min(threads, cells.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  BenchmarkResult res;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto& r = *records[i];
    res.table.add({c.dataset_name, c.approach.id, c.approach.backbone, c.approach.data, c.config.fraction, r.test.oa,
                   r.test.aa, r.test.f1, r.test.miou});
    res.records.push_back(r);
  }
  res.deltas = res.table.deltas(spec.delta_minuend, spec.delta_subtrahend);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file_text((out / "table.csv").string(), res.table.csv());
    write_file_text((out / "table.txt").string(), res.table.text());
    write_file_text((out / "deltas.csv").string(), ComparisonTable::deltas_csv(res.deltas));
    write_file_text((out / "deltas.svg").string(),
                    deltas_svg(res.deltas, "mIoU " + spec.delta_minuend + " - " + spec.delta_subtrahend));
  }
  return res;
}

}  // namespace hsx
