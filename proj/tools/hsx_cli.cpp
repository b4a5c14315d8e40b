#include <chrono>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "hsx/hsx.hpp"

namespace fs = std::filesystem;
using namespace hsx;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::string config;
  std::string out;
  std::size_t threads = 1;
};

void log(const std::string& msg) { std::cerr << msg << '\n'; }

KvDocument read_config(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw Error(ErrorKind::Config, "config file '" + path + "' not found");
  return KvDocument::parse(read_file_text(path));
}

fs::path config_dir(const std::string& path) {
  return path.empty() ? fs::path{} : fs::absolute(path).parent_path();
}

std::string require_out(const Globals& g, const char* verb) {
  if (g.out.empty()) throw Error(ErrorKind::Config, std::string(verb) + " needs --out");
  return g.out;
}

int cmd_gen_data(const Globals& g, std::size_t classes) {
  auto suite = default_suite(g.seed);
  if (classes) {
    if (classes < 2) throw Error(ErrorKind::Config, "--classes must be >= 2");
    for (auto& d : suite.datasets) d.classes = classes;
  }
  const auto doc = read_config(g.config);
  for (auto& d : suite.datasets) {
    const auto& s = doc.section_or_empty("dataset." + d.name);
    d.classes = static_cast<std::size_t>(s.get_int("classes", static_cast<long>(d.classes)));
    d.cubes = static_cast<std::size_t>(s.get_int("cubes", static_cast<long>(d.cubes)));
    d.height = static_cast<std::size_t>(s.get_int("height", static_cast<long>(d.height)));
    d.width = static_cast<std::size_t>(s.get_int("width", static_cast<long>(d.width)));
    d.noise = s.get_double("noise", d.noise);
  }
  const auto& src = doc.section_or_empty("source");
  suite.source.cubes = static_cast<std::size_t>(src.get_int("cubes", static_cast<long>(suite.source.cubes)));
  const auto out = require_out(g, "gen-data");
  for (const auto& m : write_suite(suite, out)) {
    const auto man = load_manifest(m.string());
    std::cout << m.string() << "  entries=" << man.entries.size() << " classes=" << man.classes() << '\n';
  }
  std::cout << (fs::path(out) / "source" / "manifest.txt").string() << '\n';
  return 0;
}

int cmd_pretrain(const Globals& g, const std::string& source, std::optional<std::size_t> steps,
                 std::optional<double> ratio) {
  const auto doc = read_config(g.config);
  PretrainConfig pc;
  pc.seed = g.seed;
  const auto& e = doc.section_or_empty("encoder");
  pc.encoder.layers = static_cast<std::size_t>(e.get_int("layers", static_cast<long>(pc.encoder.layers)));
  pc.encoder.heads = static_cast<std::size_t>(e.get_int("heads", static_cast<long>(pc.encoder.heads)));
  pc.encoder.d_model = static_cast<std::size_t>(e.get_int("d_model", static_cast<long>(pc.encoder.d_model)));
  pc.encoder.d_ff = static_cast<std::size_t>(e.get_int("d_ff", static_cast<long>(pc.encoder.d_ff)));
  pc.encoder.pe_scale = e.get_double("pe_scale", pc.encoder.pe_scale);
  const auto& p = doc.section_or_empty("pretrain");
  pc.steps = static_cast<std::size_t>(p.get_int("steps", static_cast<long>(pc.steps)));
  pc.mask_ratio = p.get_double("mask_ratio", pc.mask_ratio);
  pc.lr = p.get_double("lr", pc.lr);
  pc.batch = static_cast<std::size_t>(p.get_int("batch", static_cast<long>(pc.batch)));
  if (steps) pc.steps = *steps;
  if (ratio) pc.mask_ratio = *ratio;
  pc.encoder.validate();

  fs::path manifest = source;
  if (fs::is_directory(manifest)) manifest /= "manifest.txt";
  if (!fs::exists(manifest)) throw Error(ErrorKind::Config, "source manifest '" + manifest.string() + "' not found");
  const auto cubes = load_source(manifest);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = pretrain(cubes, pc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out = require_out(g, "pretrain");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(res.checkpoint, out.string());
  auto csv = out;
  csv.replace_extension(".loss.csv");
  write_file_text(csv.string(), loss_history_csv(res.loss_history));
  std::cout << "checkpoint " << out.string() << " hash=" << to_hex(res.checkpoint.hash()) << '\n'
            << "steps=" << pc.steps << " eval_mse initial=" << res.initial_eval_mse
            << " final=" << res.final_eval_mse << " mean_baseline=" << res.mean_baseline_mse << '\n';
  log("pretrain finished in " + fixed(secs, 1) + " s; loss history " + csv.string());
  return 0;
}

int cmd_run(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorKind::Config, "run needs --config");
  const auto doc = read_config(g.config);
  auto cfg = ExperimentConfig::from_kv(doc, config_dir(g.config));
  cfg.train.seed = g.seed;
  if (!g.out.empty()) cfg.out = g.out;
  if (cfg.out.empty()) throw Error(ErrorKind::Config, "run needs --out or an 'out' key");
  FeatureCache cache;
  RunContext ctx;
  ctx.cache = &cache;
  auto rec = run_experiment(cfg, ctx);
  rec.name = fs::path(cfg.out).filename().string();
  const auto manifest = load_manifest(cfg.dataset);
  write_run(rec, manifest.class_names, cfg.out);
  std::cout << report_text(rec.test, manifest.class_names);
  std::cout << "epochs_run=" << rec.epochs_run << " best_epoch=" << rec.best_epoch << " config_hash="
            << to_hex(rec.config_hash) << '\n';
  if (rec.backbone_before)
    std::cout << "backbone_hash before=" << to_hex(*rec.backbone_before)
              << " after=" << to_hex(*rec.backbone_after) << '\n';
  log("run finished in " + fixed(rec.wall_seconds, 1) + " s");
  return 0;
}

int cmd_benchmark(const Globals& g, const std::string& data, const std::string& checkpoint) {
  BenchmarkSpec spec;
  if (!g.config.empty()) {
    spec = BenchmarkSpec::from_kv(read_config(g.config), config_dir(g.config));
  } else {
    if (data.empty()) throw Error(ErrorKind::Config, "benchmark needs --config or --data");
    for (const auto& d : default_suite().datasets)
      spec.datasets.push_back((fs::path(data) / d.name / "manifest.txt").string());
    spec.checkpoint = checkpoint;
  }
  if (!checkpoint.empty()) spec.checkpoint = checkpoint;
  spec.seed = g.seed;
  const auto out = require_out(g, "benchmark");
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_benchmark(spec, g.threads, out, nullptr, [](const BenchmarkCell& c, const RunRecord& r) {
    log(c.run_name + "  miou=" + fixed(r.test.miou, 4) + "  epochs=" + std::to_string(r.epochs_run) + "  " +
        fixed(r.wall_seconds, 1) + " s");
  });
  std::cout << res.table.text() << '\n' << ComparisonTable::deltas_csv(res.deltas);
  log("benchmark finished in " +
      fixed(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1) + " s");
  return 0;
}

int cmd_project(const Globals& g, const std::string& in, const std::string& method) {
  const auto cube = read_cube(in);
  const auto p = project_prgb(cube, {parse_projection(method)});
  write_cube(p.image, require_out(g, "project"));
  std::cout << "method=" << to_string(p.method_used) << '\n';
  if (p.method_used != parse_projection(method))
    log("requested " + method + " but the grid lacks visible support; fell back to tri-band");
  return 0;
}

int cmd_cache(const Globals& g, const std::string& checkpoint, const std::string& manifest_path) {
  const auto ck = load_checkpoint(checkpoint);
  const FrozenEncoder enc(freeze(ck));
  FeatureCache cache(require_out(g, "cache"));
  const auto m = load_manifest(manifest_path);
  const auto base = fs::path(manifest_path).parent_path();
  for (const auto& e : m.entries) cache.get(enc, read_cube((base / e.path).string()));
  const auto s = cache.stats();
  const auto n = s.hits + s.misses;
  std::cout << "cubes=" << n << " hits=" << s.hits << " misses=" << s.misses << " hit_rate="
            << fixed(n ? 100.0 * static_cast<double>(s.hits) / static_cast<double>(n) : 0.0, 1) << "%\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::string& pred, const std::string& manifest_path, const std::string& split) {
  const auto m = load_manifest(manifest_path);
  const auto base = fs::path(manifest_path).parent_path();
  ConfusionMatrix cm(m.classes());
  for (const auto& e : m.split(parse_split(split))) {
    const auto truth = read_cube((base / e.path).string());
    const auto p = read_cube((fs::path(pred) / e.path).string());
    if (!truth.labels || !p.labels) throw Error(ErrorKind::Evaluation, "cube '" + e.path + "' carries no labels");
    if (p.height != truth.height || p.width != truth.width)
      throw Error(ErrorKind::Evaluation, "prediction '" + e.path + "' does not match the ground-truth size");
    cm.accumulate(*p.labels, *truth.labels);
  }
  const auto r = report(cm);
  std::cout << report_text(r, m.class_names);
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_file_text((fs::path(g.out) / "report.txt").string(), report_text(r, m.class_names));
    write_file_text((fs::path(g.out) / "report.csv").string(), report_csv(r, m.class_names));
  }
  return 0;
}

int cmd_plot(const Globals& g, const std::string& table, const std::string& minuend, const std::string& subtrahend) {
  const auto t = ComparisonTable::parse_csv(read_file_text(table));
  const auto d = t.deltas(minuend, subtrahend);
  if (d.empty()) throw Error(ErrorKind::Data, "table has no rows pairing '" + minuend + "' with '" + subtrahend + "'");
  const auto out = require_out(g, "plot");
  write_file_text(out, deltas_svg(d, "mIoU " + minuend + " - " + subtrahend));
  std::cout << ComparisonTable::deltas_csv(d);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral transfer benchmark toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config, "Configuration file");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic benchmark suite");
  std::size_t classes = 0;
  gen->add_option("--classes", classes, "Override the class count of every dataset");

  auto* pre = app.add_subcommand("pretrain", "Masked spectral reconstruction pretraining");
  std::string source;
  std::optional<std::size_t> steps;
  std::optional<double> ratio;
  pre->add_option("--source", source, "Source manifest or directory")->required();
  pre->add_option("--steps", steps, "Optimizer steps");
  pre->add_option("--mask-ratio", ratio, "Fraction of masked bands");

  auto* run = app.add_subcommand("run", "Run one experiment config");

  auto* bench = app.add_subcommand("benchmark", "Run the experiment matrix");
  std::string data, bench_ck;
  bench->add_option("--data", data, "Suite directory written by gen-data");
  bench->add_option("--checkpoint", bench_ck, "Pretrained checkpoint for cross-domain approaches");

  auto* proj = app.add_subcommand("project", "Project a cube to pseudo-RGB");
  std::string in, method = "cie";
  proj->add_option("--in", in, "Input cube")->required();
  proj->add_option("--method", method, "cie or tri-band")->capture_default_str();

  auto* cache = app.add_subcommand("cache", "Encode a dataset into a feature store");
  std::string cache_ck, cache_manifest;
  cache->add_option("--checkpoint", cache_ck, "Checkpoint")->required();
  cache->add_option("--manifest", cache_manifest, "Dataset manifest")->required();

  auto* ev = app.add_subcommand("eval", "Score predicted label cubes");
  std::string pred, ev_manifest, split = "test";
  ev->add_option("--pred", pred, "Directory mirroring the manifest paths")->required();
  ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  ev->add_option("--split", split, "Split to score")->capture_default_str();

  auto* plot = app.add_subcommand("plot", "Bar chart of mIoU deltas from a table");
  std::string table, minuend = "hsl-runet", subtrahend = "runet";
  plot->add_option("--table", table, "table.csv")->required();
  plot->add_option("--minuend", minuend)->capture_default_str();
  plot->add_option("--subtrahend", subtrahend)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_data(g, classes);
    if (*pre) return cmd_pretrain(g, source, steps, ratio);
    if (*run) return cmd_run(g);
    if (*bench) return cmd_benchmark(g, data, bench_ck);
    if (*proj) return cmd_project(g, in, method);
    if (*cache) return cmd_cache(g, cache_ck, cache_manifest);
    if (*ev) return cmd_eval(g, pred, ev_manifest, split);
    if (*plot) return cmd_plot(g, table, minuend, subtrahend);
  } catch (const Error& e) {
    std::cerr << "hsx: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "hsx: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
