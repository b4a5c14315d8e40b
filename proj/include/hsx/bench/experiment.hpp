#pragma once

// Experiment configuration and the runner that dispatches one cell of the
// benchmark matrix: in-domain, cross-domain (frozen backbone + cached
// features) or cross-modality (pRGB) training, then test-split evaluation.

#include <chrono>
#include <filesystem>

#include "hsx/baselines/justoliu.hpp"
#include "hsx/baselines/minirocket.hpp"
#include "hsx/data/feature_cache.hpp"
#include "hsx/heads/train.hpp"
#include "hsx/modality/prgb.hpp"

namespace hsx {

enum class Strategy { InDomain, CrossDomain, CrossModality };
enum class Task { Segmentation, Spectral };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::InDomain: return "in-domain";
    case Strategy::CrossDomain: return "cross-domain";
    case Strategy::CrossModality: return "cross-modality";
  }
  return "?";
}
inline Strategy parse_strategy(std::string_view s) {
  if (s == "in-domain") return Strategy::InDomain;
  if (s == "cross-domain") return Strategy::CrossDomain;
  if (s == "cross-modality") return Strategy::CrossModality;
  throw Error(ErrorKind::Config, "unknown strategy '" + std::string(s) + "'");
}
inline const char* to_string(Task t) { return t == Task::Segmentation ? "segmentation" : "spectral"; }
inline Task parse_task(std::string_view s) {
  if (s == "segmentation") return Task::Segmentation;
  if (s == "spectral") return Task::Spectral;
  throw Error(ErrorKind::Config, "unknown task '" + std::string(s) + "'");
}

inline bool allowed_fraction(double f) {
  for (double a : {0.10, 0.25, 1.0})
    if (std::fabs(f - a) < 1e-12) return true;
  return false;
}

/// One experiment. Segmentation models: "unet" (vanilla) and "runet";
/// spectral models: "justoliu", "minirocket", "hdc-minirocket", "fc"
/// (frozen backbone + FC) and "finetune" (backbone trained with the FC head).
struct ExperimentConfig {
  Strategy strategy = Strategy::InDomain;
  Task task = Task::Segmentation;
  std::string model = "runet";
  std::string dataset;  // manifest path
  double fraction = 1.0;
  TrainConfig train;
  RUNetConfig unet;
  NeckConfig neck;
  std::string checkpoint;
  std::optional<ProjectionSpec> projection;
  std::size_t rocket_features = 1000;
  HDCConfig hdc;
  std::size_t pixels_per_cube = 256;
  std::string out;

  void validate() const {
    train.validate();
    unet.validate();
    if (dataset.empty()) throw Error(ErrorKind::Config, "experiment needs a dataset manifest");
    if (!allowed_fraction(fraction)) throw Error(ErrorKind::Config, "fraction must be one of 0.10, 0.25, 1.0");
    if (strategy == Strategy::CrossDomain && checkpoint.empty())
      throw Error(ErrorKind::Config, "cross-domain experiments require a checkpoint");
    if (strategy == Strategy::CrossModality && !projection)
      throw Error(ErrorKind::Config, "cross-modality experiments require a [projection] section");
    const bool seg = task == Task::Segmentation;
    if (seg && model != "unet" && model != "runet")
      throw Error(ErrorKind::Config, "unknown segmentation model '" + model + "'");
    if (!seg) {
      if (strategy == Strategy::CrossModality)
        throw Error(ErrorKind::Config, "cross-modality transfer is defined for segmentation only");
      const bool backbone = model == "fc" || model == "finetune";
      if (backbone != (strategy == Strategy::CrossDomain))
        throw Error(ErrorKind::Config, "spectral model '" + model + "' does not fit strategy " + to_string(strategy));
      if (!backbone) parse_spectral_kind(model);
    }
    if (seg && strategy == Strategy::CrossDomain && model != "runet")
      throw Error(ErrorKind::Config, "cross-domain segmentation uses the RU-Net head");
    hdc.validate();
  }

  /// Canonical key/value text; its hash identifies the experiment.
  std::string canonical() const {
    KvDocument d;
    auto& r = d.root();
    r.set("strategy", to_string(strategy));
    r.set("task", to_string(task));
    r.set("model", model);
    r.set("dataset", dataset);
    r.set("fraction", num(fraction));
    if (!checkpoint.empty()) r.set("checkpoint", checkpoint);
    r.set("rocket_features", std::to_string(rocket_features));
    r.set("pixels_per_cube", std::to_string(pixels_per_cube));
    auto& t = d.add_section("train");
    t.set("lr", num(train.lr));
    t.set("batch", std::to_string(train.batch));
    t.set("max_epochs", std::to_string(train.max_epochs));
    t.set("patience", std::to_string(train.patience));
    t.set("seed", std::to_string(train.seed));
    t.set("optimizer", train.optimizer);
    auto& u = d.add_section("unet");
    u.set("depth", std::to_string(unet.depth));
    u.set("base_channels", std::to_string(unet.base_channels));
    u.set("dropout", num(unet.dropout));
    u.set("batch_norm", unet.batch_norm ? "true" : "false");
    auto& n = d.add_section("neck");
    n.set("out_channels", std::to_string(neck.out_channels));
    auto& h = d.add_section("hdc");
    h.set("scale", num(hdc.scale));
    h.set("seed", std::to_string(hdc.seed));
    if (projection) d.add_section("projection").set("method", to_string(projection->method));
    return d.to_string();
  }

  Digest hash() const { return sha256(canonical()); }

  static std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  }

  /// Reads a config document. Relative dataset/checkpoint paths resolve
  /// against `base`. Missing [train] keys fall back to per-model defaults.
  static ExperimentConfig from_kv(const KvDocument& doc, const std::filesystem::path& base = {}) {
    ExperimentConfig c;
    const auto& r = doc.root();
    c.strategy = parse_strategy(r.get("strategy", "in-domain"));
    c.task = parse_task(r.get("task", "segmentation"));
    c.model = r.get("model", c.task == Task::Segmentation ? "runet" : "fc");
    auto resolve = [&](const std::string& p) {
      if (p.empty() || std::filesystem::path(p).is_absolute() || base.empty()) return p;
      return (base / p).lexically_normal().string();
    };
    c.dataset = resolve(r.get("dataset", ""));
    c.fraction = r.get_double("fraction", 1.0);
    c.checkpoint = resolve(r.get("checkpoint", ""));
    c.rocket_features = static_cast<std::size_t>(r.get_int("rocket_features", 1000));
    c.pixels_per_cube = static_cast<std::size_t>(r.get_int("pixels_per_cube", 256));
    c.out = r.get("out", "");
    c.train = c.default_train();
    c.unet = c.model == "unet" ? RUNetConfig::vanilla() : RUNetConfig{};
    apply_train(doc.section_or_empty("train"), c.train);
    const auto& u = doc.section_or_empty("unet");
    c.unet.depth = static_cast<std::size_t>(u.get_int("depth", static_cast<long>(c.unet.depth)));
    c.unet.base_channels = static_cast<std::size_t>(u.get_int("base_channels", static_cast<long>(c.unet.base_channels)));
    c.unet.dropout = u.get_double("dropout", c.unet.dropout);
    c.unet.batch_norm = u.get_bool("batch_norm", c.unet.batch_norm);
    c.neck.out_channels = static_cast<std::size_t>(
        doc.section_or_empty("neck").get_int("out_channels", static_cast<long>(c.neck.out_channels)));
    const auto& h = doc.section_or_empty("hdc");
    c.hdc.scale = h.get_double("scale", c.hdc.scale);
    c.hdc.seed = static_cast<std::uint64_t>(h.get_int("seed", static_cast<long>(c.hdc.seed)));
    if (const auto* p = doc.section("projection")) c.projection = ProjectionSpec{parse_projection(p->get("method", "cie"))};
    c.validate();
    return c;
  }

  static void apply_train(const KvSection& t, TrainConfig& tc) {
    tc.lr = t.get_double("lr", tc.lr);
    tc.batch = static_cast<std::size_t>(t.get_int("batch", static_cast<long>(tc.batch)));
    tc.max_epochs = static_cast<std::size_t>(t.get_int("max_epochs", static_cast<long>(tc.max_epochs)));
    tc.patience = static_cast<std::size_t>(t.get_int("patience", static_cast<long>(tc.patience)));
    tc.seed = static_cast<std::uint64_t>(t.get_int("seed", static_cast<long>(tc.seed)));
    tc.optimizer = t.get("optimizer", tc.optimizer);
  }

  TrainConfig default_train() const {
    if (task == Task::Segmentation) return TrainConfig{};
    if (model == "fc") return default_spectral_train(SpectralKind::BackboneFC);
    if (model == "finetune") return default_spectral_train(SpectralKind::BackboneFinetune);
    return default_spectral_train(parse_spectral_kind(model));
  }
};

struct RunRecord {
  std::string name;
  Digest config_hash{};
  std::uint64_t seed = 42;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_miou = 0;
  MetricReport test;
  double wall_seconds = 0;
  std::size_t train_cubes = 0;
  std::optional<Digest> backbone_before, backbone_after;
  FeatureCache::Stats cache;
  HeadFile head;

  /// Deterministic part of the record (no wall time).
  std::string summary() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "config_hash = " << to_hex(config_hash) << "\nseed = " << seed << "\nepochs_run = " << epochs_run
       << "\nbest_epoch = " << best_epoch << "\nbest_val_miou = " << best_val_miou << "\ntrain_cubes = " << train_cubes
       << "\noa = " << test.oa << "\naa = " << test.aa << "\nf1 = " << test.f1 << "\nmiou = " << test.miou << '\n';
    if (backbone_before) os << "backbone_before = " << to_hex(*backbone_before) << '\n';
    if (backbone_after) os << "backbone_after = " << to_hex(*backbone_after) << '\n';
    return os.str();
  }
};

/// Shared services for a set of runs.
struct RunContext {
  FeatureCache* cache = nullptr;  // required for cross-domain runs
  LoadObserver observer;          // sees every manifest entry as it is read
};

namespace detail {

inline SegSample raw_sample(const HyperCube& c) {
  return {c.height, c.width, c.bands(), c.reflectance, c.labels.value_or(std::vector<std::uint16_t>{})};
}

/// Builds a SegDataset over cubes for the configured input modality.
inline SegDataset seg_dataset(const ExperimentConfig& cfg, std::shared_ptr<const std::vector<HyperCube>> cubes,
                              Split split, const FrozenEncoder* encoder, FeatureCache* cache) {
  SegDataset d;
  d.split = split;
  d.count = cubes->size();
  if (cfg.strategy == Strategy::CrossDomain) {
    auto hashes = std::make_shared<std::vector<Digest>>();
    for (const auto& c : *cubes) hashes->push_back(cube_content_hash(c));
    d.fetch = [cubes, hashes, encoder, cache](std::size_t i) {
      const auto& c = (*cubes)[i];
      auto e = cache->get(*encoder, c, (*hashes)[i]);
      return SegSample{c.height, c.width, e->dim, e->embeddings, *c.labels};
    };
  } else if (cfg.strategy == Strategy::CrossModality) {
    auto projected = std::make_shared<std::vector<HyperCube>>();
    for (const auto& c : *cubes) projected->push_back(project_prgb(c, *cfg.projection).image);
    d.fetch = [projected](std::size_t i) { return raw_sample((*projected)[i]); };
  } else {
    d.fetch = [cubes](std::size_t i) { return raw_sample((*cubes)[i]); };
  }
  return d;
}

inline PixelSet backbone_pixels(const std::vector<HyperCube>& cubes, Split split, std::size_t per_cube,
                                std::uint64_t seed, const FrozenEncoder& enc, FeatureCache& cache) {
  auto raw = pixels_from_cubes(cubes, split, 0, seed);
  PixelSet out;
  out.split = split;
  out.dim = enc.embedding_dim();
  for (std::size_t ci = 0; ci < cubes.size(); ++ci) {
    const auto& c = cubes[ci];
    auto e = cache.get(enc, c);
    std::vector<std::size_t> idx;
    for (std::size_t p = 0; p < c.pixels(); ++p)
      if ((*c.labels)[p] != kIgnoreLabel) idx.push_back(p);
    if (per_cube && idx.size() > per_cube) {
      CounterRng rng(seed, stream("pixels").child(ci));
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(per_cube);
      std::sort(idx.begin(), idx.end());
    }
    for (auto p : idx) {
      out.x.insert(out.x.end(), e->embeddings.begin() + static_cast<long>(p * e->dim),
                   e->embeddings.begin() + static_cast<long>((p + 1) * e->dim));
      out.y.push_back((*c.labels)[p]);
    }
  }
  return out;
}

inline PixelSet rocket_pixels(const MiniRocketModel& m, const PixelSet& raw, const HDCConfig* hdc) {
  PixelSet out;
  out.split = raw.split;
  out.dim = m.feature_count();
  out.y = raw.y;
  out.x = m.transform_batch(raw.x, hdc);
  return out;
}

}  // namespace detail

/// Runs one experiment. Test cubes are read only after training finished.
inline RunRecord run_experiment(const ExperimentConfig& cfg, RunContext ctx = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path manifest_path(cfg.dataset);
  const auto manifest = load_manifest(manifest_path.string());
  const auto base = manifest_path.parent_path();
  const std::size_t K = manifest.classes();

  DatasetManifest train_view = manifest;
  train_view.entries = subset_training(manifest.split(Split::Train), cfg.fraction, manifest.seed);
  auto train_cubes = std::make_shared<const std::vector<HyperCube>>(load_split(train_view, Split::Train, base, ctx.observer));
  auto val_cubes = std::make_shared<const std::vector<HyperCube>>(load_split(manifest, Split::Val, base, ctx.observer));
  if (train_cubes->empty() || val_cubes->empty()) throw Error(ErrorKind::Data, "dataset has an empty train or val split");

  RunRecord rec;
  rec.config_hash = cfg.hash();
  rec.seed = cfg.train.seed;
  rec.train_cubes = train_cubes->size();

  std::optional<EncoderCheckpoint> ck;
  std::optional<FrozenEncoder> frozen;
  FeatureCache local_cache;
  FeatureCache* cache = ctx.cache ? ctx.cache : &local_cache;
  if (cfg.strategy == Strategy::CrossDomain) {
    if (!std::filesystem::exists(cfg.checkpoint))
      throw Error(ErrorKind::Config, "checkpoint '" + cfg.checkpoint + "' not found");
    ck = load_checkpoint(cfg.checkpoint);
    rec.backbone_before = ck->backbone_hash();
    if (cfg.model != "finetune") frozen.emplace(freeze(*ck));
  }
  const auto stats_before = cache->stats();

  TrainResult tr;
  std::function<ConfusionMatrix(const std::vector<HyperCube>&)> evaluate_test;

  if (cfg.task == Task::Segmentation) {
    const std::size_t in = cfg.strategy == Strategy::CrossDomain     ? frozen->embedding_dim()
                           : cfg.strategy == Strategy::CrossModality ? 3
                                                                     : train_cubes->front().bands();
    std::optional<NeckConfig> neck;
    if (cfg.strategy == Strategy::CrossDomain) neck = NeckConfig{in, cfg.neck.out_channels};
    auto model = std::make_shared<UNet<float>>(in, K, cfg.unet, neck, cfg.train.seed);
    const FrozenEncoder* enc = frozen ? &*frozen : nullptr;
    auto train_ds = detail::seg_dataset(cfg, train_cubes, Split::Train, enc, cache);
    auto val_ds = detail::seg_dataset(cfg, val_cubes, Split::Val, enc, cache);
    tr = train_segmentation(*model, train_ds, val_ds, cfg.train);
    rec.head = {"unet", cfg.canonical(), store_all(model->params()), model->buffers()};
    evaluate_test = [&cfg, model, enc, cache](const std::vector<HyperCube>& test) {
      auto cubes = std::make_shared<const std::vector<HyperCube>>(test);
      return evaluate_segmentation(*model, detail::seg_dataset(cfg, cubes, Split::Test, enc, cache));
    };
  } else {
    const auto seed = cfg.train.seed;
    const auto per = cfg.pixels_per_cube;
    std::shared_ptr<SpectralModel<float>> model;
    std::function<PixelSet(const std::vector<HyperCube>&, Split)> features;
    if (cfg.model == "fc") {
      const FrozenEncoder* enc = &*frozen;
      features = [=](const std::vector<HyperCube>& c, Split s) {
        return detail::backbone_pixels(c, s, per, seed, *enc, *cache);
      };
      model = std::make_shared<FCHead<float>>(FCHeadConfig{enc->embedding_dim(), K}, seed);
    } else if (cfg.model == "finetune") {
      features = [=](const std::vector<HyperCube>& c, Split s) { return pixels_from_cubes(c, s, per, seed); };
      model = std::make_shared<BackboneClassifier<float>>(ck->instantiate<float>(), train_cubes->front().grid, K,
                                                          false, seed);
    } else if (cfg.model == "justoliu") {
      features = [=](const std::vector<HyperCube>& c, Split s) { return pixels_from_cubes(c, s, per, seed); };
      model = std::make_shared<JustoLiuNet<float>>(JustoLiuConfig{6, 6, 12, K}, train_cubes->front().bands(), seed);
    } else {
      const auto raw_train = pixels_from_cubes(*train_cubes, Split::Train, per, seed);
      auto rocket = std::make_shared<MiniRocketModel>(
          MiniRocketModel::fit(raw_train.x, raw_train.dim, cfg.rocket_features, seed));
      std::optional<HDCConfig> hdc;
      if (cfg.model == "hdc-minirocket") hdc = cfg.hdc;
      features = [=](const std::vector<HyperCube>& c, Split s) {
        return detail::rocket_pixels(*rocket, pixels_from_cubes(c, s, per, seed), hdc ? &*hdc : nullptr);
      };
      model = std::make_shared<FCHead<float>>(FCHeadConfig{rocket->feature_count(), K}, seed);
    }
    tr = train_spectral(*model, features(*train_cubes, Split::Train), features(*val_cubes, Split::Val), cfg.train);
    rec.head = {cfg.model, cfg.canonical(), store_all(model->params()), {}};
    evaluate_test = [model, features](const std::vector<HyperCube>& test) {
      return evaluate_spectral(*model, features(test, Split::Test));
    };
  }

  rec.epochs_run = tr.epochs_run;
  rec.best_epoch = tr.best_epoch;
  rec.best_val_miou = tr.best_val_miou;
  {
    const auto s = cache->stats();
    rec.cache = {s.hits - stats_before.hits, s.misses - stats_before.misses, s.encodes - stats_before.encodes};
  }
  if (frozen) rec.backbone_after = params_hash(frozen->encoder().backbone_params());

  // Training is over: only now are test cubes read.
  const auto test_cubes = load_split(manifest, Split::Test, base, ctx.observer);
  if (test_cubes.empty()) throw Error(ErrorKind::Evaluation, "dataset has an empty test split");
  rec.test = report(evaluate_test(test_cubes));
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Writes record.txt, report.txt, report.csv and head.mhed under `dir`.
inline void write_run(const RunRecord& rec, const std::vector<std::string>& class_names,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream os;
  os << rec.summary() << "wall_seconds = " << rec.wall_seconds << '\n';
  write_file_text((dir / "record.txt").string(), os.str());
  write_file_text((dir / "report.txt").string(), report_text(rec.test, class_names));
  write_file_text((dir / "report.csv").string(), report_csv(rec.test, class_names));
  save_head(rec.head, (dir / "head.mhed").string());
}

}  // namespace hsx
