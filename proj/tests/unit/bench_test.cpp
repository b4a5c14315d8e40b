#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "../common/test_support.hpp"
#include "hsx/hsx.hpp"

using namespace hsx;
namespace fs = std::filesystem;

namespace {

// A miniature suite and checkpoint shared by the end-to-end tests.
class MiniSuite : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new hsx::testing::TempDir("bench");
    auto suite = default_suite(7);
    for (auto& d : suite.datasets) {
      d.cubes = 8;
      d.height = d.width = 8;
    }
    suite.source.cubes = 4;
    suite.source.height = suite.source.width = 8;
    manifests_ = new std::vector<fs::path>(write_suite(suite, dir_->path()));
    PretrainConfig pc;
    pc.encoder = EncoderConfig{1, 2, 8, 16, 1e4};
    pc.steps = 4;
    pc.batch = 8;
    pc.eval_pixels = 16;
    save_checkpoint(pretrain(load_source(dir_->path() / "source" / "manifest.txt"), pc).checkpoint,
                    (dir_->path() / "enc.mhsl").string());
  }
  static void TearDownTestSuite() {
    delete manifests_;
    delete dir_;
  }

  static fs::path root() { return dir_->path(); }
  static std::string manifest(std::size_t i) { return (*manifests_)[i].string(); }
  static std::string checkpoint() { return (dir_->path() / "enc.mhsl").string(); }

  static ExperimentConfig config(const std::string& head, std::size_t dataset = 0, const std::string& tail = "") {
    return ExperimentConfig::from_kv(KvDocument::parse(head + "\ndataset = " + manifest(dataset) +
                                                       "\n[train]\nmax_epochs = 2\npatience = 2\n"
                                                       "[unet]\ndepth = 1\nbase_channels = 4\n" + tail));
  }

 private:
  static inline hsx::testing::TempDir* dir_ = nullptr;
  static inline std::vector<fs::path>* manifests_ = nullptr;
};

struct CliResult {
  int code;
  std::string out;
};

CliResult cli(const std::string& args, const fs::path& scratch) {
  const auto log = scratch / "cli_stdout.txt";
  const std::string cmd = std::string(HSX_CLI_PATH) + " " + args + " > " + log.string() + " 2>/dev/null";
  const int st = std::system(cmd.c_str());
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, text};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::State;
}

TableRow row(std::string ds, std::string ap, double f, double oa, double aa, double f1, double miou) {
  return {std::move(ds), std::move(ap), "none", "HSI", f, oa, aa, f1, miou};
}

}  // namespace

TEST(ExperimentConfig, ValidationRejectsIncoherentSettings) {
  ExperimentConfig c;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::Config);
  c.dataset = "m.txt";
  EXPECT_NO_THROW(c.validate());
  c.fraction = 0.5;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::Config);
  c.fraction = 0.25;
  c.strategy = Strategy::CrossDomain;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::Config);
  c.checkpoint = "ck.mhsl";
  EXPECT_NO_THROW(c.validate());
  c.model = "unet";
  EXPECT_THROW(c.validate(), Error);
  c = ExperimentConfig{};
  c.dataset = "m.txt";
  c.strategy = Strategy::CrossModality;
  EXPECT_THROW(c.validate(), Error);
  c.projection = ProjectionSpec{ProjectionMethod::Cie};
  EXPECT_NO_THROW(c.validate());
  c.task = Task::Spectral;
  c.model = "justoliu";
  EXPECT_THROW(c.validate(), Error);
  c.strategy = Strategy::InDomain;
  EXPECT_NO_THROW(c.validate());
  c.model = "fc";
  EXPECT_THROW(c.validate(), Error);
  c.model = "svm";
  EXPECT_THROW(c.validate(), Error);
}

TEST(ExperimentConfig, FromKeyValueAppliesDefaults) {
  const auto doc = KvDocument::parse("model = unet\ndataset = data/m.txt\nfraction = 0.10\n[train]\nlr = 0.01\n");
  const auto c = ExperimentConfig::from_kv(doc, "/base");
  EXPECT_EQ(c.dataset, "/base/data/m.txt");
  EXPECT_EQ(c.strategy, Strategy::InDomain);
  EXPECT_EQ(c.task, Task::Segmentation);
  EXPECT_DOUBLE_EQ(c.fraction, 0.10);
  EXPECT_DOUBLE_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.train.max_epochs, TrainConfig{}.max_epochs);
  // The plain U-Net has no dropout.
  EXPECT_EQ(c.unet.dropout, RUNetConfig::vanilla().dropout);
  EXPECT_EQ(c.unet.dropout, 0.0);
  EXPECT_GT(RUNetConfig{}.dropout, 0.0);
  EXPECT_EQ(ExperimentConfig::from_kv(KvDocument::parse("dataset = /m.txt\n")).model, "runet");
  EXPECT_EQ(ExperimentConfig::from_kv(KvDocument::parse("task = spectral\nmodel = minirocket\ndataset = /m.txt\n")).model,
            "minirocket");
  EXPECT_THROW(ExperimentConfig::from_kv(KvDocument::parse("strategy = sideways\ndataset = m\n")), Error);
}

TEST(ExperimentConfig, HashFollowsCanonicalText) {
  const auto doc = KvDocument::parse("dataset = /m.txt\n[train]\nseed = 3\n");
  const auto a = ExperimentConfig::from_kv(doc), b = ExperimentConfig::from_kv(doc);
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), sha256(a.canonical()));
  auto c = a;
  c.train.seed = 4;
  EXPECT_NE(c.hash(), a.hash());
  EXPECT_EQ(ExperimentConfig::from_kv(KvDocument::parse(a.canonical())).hash(), a.hash());
}

TEST(ComparisonTable, AggregatesAreMeanAndMinimum) {
  ComparisonTable t;
  t.add(row("a", "runet", 1.0, 0.9, 0.8, 0.7, 0.6));
  t.add(row("b", "runet", 1.0, 0.5, 0.6, 0.9, 0.2));
  t.add(row("c", "runet", 1.0, 0.7, 0.1, 0.8, 0.4));
  t.add(row("a", "hsl-runet", 1.0, 0.8, 0.8, 0.8, 0.5));
  const auto rows = t.with_aggregates();
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[4].dataset, "average");
  EXPECT_EQ(rows[4].approach, "runet");
  EXPECT_NEAR(rows[4].oa, 0.7, 1e-12);
  EXPECT_NEAR(rows[4].aa, 0.5, 1e-12);
  EXPECT_NEAR(rows[4].f1, 0.8, 1e-12);
  EXPECT_NEAR(rows[4].miou, 0.4, 1e-12);
  EXPECT_EQ(rows[5].dataset, "worst-case");
  EXPECT_DOUBLE_EQ(rows[5].oa, 0.5);
  EXPECT_DOUBLE_EQ(rows[5].aa, 0.1);
  EXPECT_DOUBLE_EQ(rows[5].f1, 0.7);
  EXPECT_DOUBLE_EQ(rows[5].miou, 0.2);
  EXPECT_EQ(rows[6].approach, "hsl-runet");
  EXPECT_DOUBLE_EQ(rows[6].miou, 0.5);
  EXPECT_DOUBLE_EQ(rows[7].miou, 0.5);
}

TEST(ComparisonTable, DeltasPairDatasetAndFraction) {
  ComparisonTable t;
  t.add(row("a", "runet", 0.10, 0, 0, 0, 0.50));
  t.add(row("a", "runet", 1.0, 0, 0, 0, 0.70));
  t.add(row("b", "runet", 0.10, 0, 0, 0, 0.40));
  t.add(row("a", "hsl-runet", 0.10, 0, 0, 0, 0.55));
  t.add(row("b", "hsl-runet", 0.10, 0, 0, 0, 0.30));
  const auto d = t.deltas("hsl-runet", "runet");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].dataset, "a");
  EXPECT_NEAR(d[0].delta, 0.05, 1e-12);
  EXPECT_EQ(d[1].dataset, "b");
  EXPECT_NEAR(d[1].delta, -0.10, 1e-12);
  EXPECT_EQ(ComparisonTable::deltas_csv(d), "dataset,fraction,delta_miou\na,0.10,0.050000\nb,0.10,-0.100000\n");
  const auto svg = deltas_svg(d, "delta");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(ComparisonTable, CsvRoundTrip) {
  ComparisonTable t;
  t.add(row("a", "unet", 0.25, 0.123456, 0.5, 0.25, 0.125));
  t.add(row("b", "unet", 0.25, 0.9, 0.75, 0.5, 0.625));
  const auto csv = t.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,approach,backbone,data,fraction,oa,aa,f1,miou");
  EXPECT_NE(csv.find("average,unet,none,HSI,0.25,0.511728,0.625000,0.375000,0.375000"), std::string::npos);
  EXPECT_NE(csv.find("worst-case,unet,none,HSI,0.25,0.123456"), std::string::npos);
  const auto back = ComparisonTable::parse_csv(csv);
  EXPECT_EQ(back.rows().size(), 2u);
  EXPECT_EQ(back.csv(), csv);
  EXPECT_NE(t.text().find("mIoU"), std::string::npos);
  EXPECT_EQ(kind_of([] { ComparisonTable::parse_csv("h\na,b,c\n"); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([] { ComparisonTable::parse_csv("h\na,b,c,d,x,1,1,1,1\n"); }), ErrorKind::Format);
}

TEST(Benchmark, ApproachCatalogue) {
  EXPECT_EQ(parse_approach("hsl-runet").strategy, Strategy::CrossDomain);
  EXPECT_EQ(parse_approach("hsl-runet").model, "runet");
  EXPECT_EQ(parse_approach("unet").backbone, "none");
  EXPECT_EQ(parse_approach("prgb-runet").data, "pRGB");
  EXPECT_EQ(parse_approach("hsl-fc").task, Task::Spectral);
  EXPECT_EQ(kind_of([] { parse_approach("resnet"); }), ErrorKind::Config);
  BenchmarkSpec s;
  EXPECT_THROW(s.validate(), Error);
  s.datasets = {"m.txt"};
  EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::Config);  // hsl-runet without checkpoint
  s.checkpoint = "ck";
  EXPECT_NO_THROW(s.validate());
  s.fractions = {0.3};
  EXPECT_THROW(s.validate(), Error);
}

TEST_F(MiniSuite, ExpandNamesCellsInMatrixOrder) {
  BenchmarkSpec s;
  s.datasets = {manifest(0), manifest(2)};
  s.checkpoint = checkpoint();
  s.overrides = KvDocument::parse("[train]\nmax_epochs = 5\n[train.unet]\nlr = 0.02\n");
  const auto cells = expand(s);
  ASSERT_EQ(cells.size(), 18u);
  EXPECT_EQ(cells[0].run_name, "hyko2_unet_0.10");
  EXPECT_EQ(cells[2].run_name, "hyko2_unet_1.00");
  EXPECT_EQ(cells[8].run_name, "hyko2_hsl-runet_1.00");
  EXPECT_EQ(cells[9].run_name, "hsidrive_unet_0.10");
  EXPECT_EQ(cells[0].config.train.max_epochs, 5u);
  EXPECT_DOUBLE_EQ(cells[0].config.train.lr, 0.02);
  EXPECT_DOUBLE_EQ(cells[3].config.train.lr, TrainConfig{}.lr);
  EXPECT_EQ(cells[6].config.checkpoint, checkpoint());
  for (const auto& c : cells) EXPECT_EQ(c.config.train.seed, 42u);
}

TEST_F(MiniSuite, TestCubesAreReadOnlyAfterTraining) {
  for (const char* head : {"model = unet\nfraction = 0.25", "strategy = cross-domain\ncheckpoint = X"}) {
    std::string h(head);
    if (auto p = h.find('X'); p != std::string::npos) h.replace(p, 1, checkpoint());
    const auto cfg = config(h);
    std::vector<Split> seen;
    FeatureCache cache;
    RunContext ctx{&cache, [&](const ManifestEntry& e) { seen.push_back(e.split); }};
    run_experiment(cfg, ctx);
    const auto first_test = std::find(seen.begin(), seen.end(), Split::Test);
    ASSERT_NE(first_test, seen.end());
    EXPECT_TRUE(std::all_of(first_test, seen.end(), [](Split s) { return s == Split::Test; }));
    const auto m = load_manifest(manifest(0));
    EXPECT_EQ(static_cast<std::size_t>(seen.end() - first_test), m.split(Split::Test).size());
  }
}

TEST_F(MiniSuite, TrainingSubsetSizes) {
  const auto m = load_manifest(manifest(0));
  const auto n = m.split(Split::Train).size();
  for (double f : {0.10, 0.25, 1.0}) {
    auto head = std::string("model = unet\nfraction = ") + ExperimentConfig::num(f);
    const auto rec = run_experiment(config(head));
    EXPECT_EQ(rec.train_cubes, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f * n - 1e-9))));
  }
}

TEST_F(MiniSuite, RunsAreReproducible) {
  const auto cfg = config("model = runet", 1);
  const auto a = run_experiment(cfg), b = run_experiment(cfg);
  EXPECT_EQ(a.summary(), b.summary());
  EXPECT_EQ(encode_head(a.head), encode_head(b.head));
  auto other = cfg;
  other.train.seed = 43;
  EXPECT_NE(run_experiment(other).head.weights, a.head.weights);
}

TEST_F(MiniSuite, CrossDomainKeepsTheBackboneAndReusesFeatures) {
  auto cfg = config("strategy = cross-domain\ncheckpoint = " + checkpoint(), 2);
  cfg.train.max_epochs = 3;
  cfg.train.patience = 3;
  FeatureCache cache;
  const auto rec = run_experiment(cfg, RunContext{&cache, {}});
  ASSERT_TRUE(rec.backbone_before && rec.backbone_after);
  EXPECT_EQ(*rec.backbone_before, *rec.backbone_after);
  EXPECT_EQ(*rec.backbone_before, load_checkpoint(checkpoint()).backbone_hash());
  const auto m = load_manifest(manifest(2));
  const std::size_t tv = rec.train_cubes + m.split(Split::Val).size();
  // Every train and val cube is encoded once; later epochs only hit.
  EXPECT_EQ(rec.cache.misses, tv);
  EXPECT_EQ(rec.cache.encodes, tv);
  EXPECT_GE(rec.cache.hits, tv * (rec.epochs_run - 1));
  EXPECT_EQ(rec.epochs_run, 3u);
  // A second run over the same cache needs no new encodes.
  const auto again = run_experiment(cfg, RunContext{&cache, {}});
  EXPECT_EQ(again.cache.misses, 0u);
  EXPECT_EQ(again.summary(), rec.summary());
}

TEST_F(MiniSuite, SpectralApproachesRun) {
  for (const std::string& head : std::vector<std::string>{"task = spectral\nmodel = justoliu", "task = spectral\nmodel = hdc-minirocket",
                                 "task = spectral\nstrategy = cross-domain\nmodel = fc\ncheckpoint = " + checkpoint()}) {
    auto cfg = config(head);
    cfg.pixels_per_cube = 16;
    cfg.rocket_features = 84;
    const auto rec = run_experiment(cfg);
    EXPECT_GE(rec.test.miou, 0.0);
    EXPECT_LE(rec.test.miou, 1.0);
    EXPECT_GE(rec.epochs_run, 1u);
  }
}

TEST_F(MiniSuite, CrossModalityProjects) {
  auto cfg = config("strategy = cross-modality", 2, "[projection]\nmethod = cie\n");
  const auto rec = run_experiment(cfg);
  EXPECT_EQ(rec.head.kind, "unet");
  EXPECT_NE(rec.head.config.find("method = cie"), std::string::npos);
  // The pRGB U-Net sees three input channels.
  UNet<float> net(3, 5, cfg.unet, std::nullopt);
  ASSERT_EQ(net.params().items.size(), rec.head.weights.size());
  for (std::size_t i = 0; i < rec.head.weights.size(); ++i)
    EXPECT_EQ(rec.head.weights[i].shape, net.params().items[i].second.shape());
}

TEST_F(MiniSuite, MissingInputsAreConfigErrors) {
  auto cfg = config("strategy = cross-domain\ncheckpoint = " + (root() / "none.mhsl").string());
  EXPECT_EQ(kind_of([&] { run_experiment(cfg); }), ErrorKind::Config);
  cfg = config("model = unet");
  cfg.dataset = (root() / "missing" / "manifest.txt").string();
  EXPECT_THROW(run_experiment(cfg), Error);
}

TEST_F(MiniSuite, BenchmarkWritesReproducibleTables) {
  BenchmarkSpec s;
  s.datasets = {manifest(0)};
  s.approaches = {"runet", "hsl-runet"};
  s.fractions = {1.0};
  s.checkpoint = checkpoint();
  s.overrides = KvDocument::parse("[train]\nmax_epochs = 2\n[unet]\ndepth = 1\nbase_channels = 4\n");
  const auto out1 = root() / "b1", out2 = root() / "b2";
  const auto a = run_benchmark(s, 1, out1), b = run_benchmark(s, 2, out2);
  EXPECT_EQ(a.table.csv(), b.table.csv());
  EXPECT_EQ(read_file_text((out1 / "table.csv").string()), read_file_text((out2 / "table.csv").string()));
  EXPECT_EQ(read_file_text((out1 / "table.csv").string()), a.table.csv());
  ASSERT_EQ(a.deltas.size(), 1u);
  EXPECT_NEAR(a.deltas[0].delta, a.records[1].test.miou - a.records[0].test.miou, 1e-12);
  EXPECT_TRUE(fs::exists(out1 / "runs" / "hyko2_runet_1.00" / "record.txt"));
  EXPECT_TRUE(fs::exists(out1 / "runs" / "hyko2_hsl-runet_1.00" / "head.mhed"));
}

TEST_F(MiniSuite, CliExitCodes) {
  const auto s = root();
  EXPECT_EQ(cli("", s).code, 2);
  EXPECT_EQ(cli("frobnicate", s).code, 2);
  EXPECT_EQ(cli("run", s).code, 2);
  EXPECT_EQ(cli("run --config " + (s / "absent.cfg").string(), s).code, 2);
  EXPECT_EQ(cli("pretrain --source " + (s / "absent").string() + " --out " + (s / "x.mhsl").string(), s).code, 2);
  std::ofstream(s / "bad.hscb") << "HSCBxxxx";
  EXPECT_EQ(cli("project --in " + (s / "bad.hscb").string() + " --out " + (s / "p.hscb").string(), s).code, 3);
  EXPECT_EQ(cli("gen-data --classes 1 --out " + (s / "g").string(), s).code, 2);
}

TEST_F(MiniSuite, CliProjectFallsBackOnNearInfrared) {
  const auto m = load_manifest(manifest(2));
  const auto cube = (fs::path(manifest(2)).parent_path() / m.entries[0].path).string();
  const auto r = cli("project --in " + cube + " --out " + (root() / "p.hscb").string(), root());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("method=tri-band"), std::string::npos);
  EXPECT_EQ(read_cube((root() / "p.hscb").string()).bands(), 3u);
}

TEST_F(MiniSuite, CliCacheSecondPassHitsEverything) {
  const auto store = (root() / "store").string();
  const auto args = "cache --checkpoint " + checkpoint() + " --manifest " + manifest(0) + " --out " + store;
  const auto first = cli(args, root());
  EXPECT_EQ(first.code, 0);
  EXPECT_NE(first.out.find("hits=0 misses=8"), std::string::npos) << first.out;
  const auto second = cli(args, root());
  EXPECT_NE(second.out.find("hits=8 misses=0 hit_rate=100.0%"), std::string::npos) << second.out;
}

TEST_F(MiniSuite, CliEvalScoresGroundTruthPerfectly) {
  const auto dir = fs::path(manifest(1)).parent_path();
  const auto r = cli("eval --pred " + dir.string() + " --manifest " + manifest(1) + " --out " + (root() / "ev").string(),
                     root());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("mIoU"), std::string::npos);
  const auto csv = read_file_text((root() / "ev" / "report.csv").string());
  // Classes absent from the test split stay unscored.
  EXPECT_NE(csv.find("\nmean,1,,1,1\noverall,1,,,\n"), std::string::npos) << csv;
  EXPECT_EQ(cli("eval --pred " + (root() / "nowhere").string() + " --manifest " + manifest(1), root()).code, 3);
}

TEST_F(MiniSuite, CliPretrainWithoutStepsKeepsTheInitialisation) {
  const auto a = cli("pretrain --steps 0 --seed 5 --source " + (root() / "source" / "manifest.txt").string() +
                         " --out " + (root() / "p0.mhsl").string(),
                     root());
  EXPECT_EQ(a.code, 0);
  const auto ck = load_checkpoint((root() / "p0.mhsl").string());
  EXPECT_NE(a.out.find("hash=" + to_hex(ck.hash())), std::string::npos) << a.out;
  const auto b = cli("pretrain --steps 0 --seed 5 --source " + (root() / "source").string() + " --out " +
                         (root() / "p1.mhsl").string(),
                     root());
  EXPECT_EQ(b.code, 0);
  EXPECT_EQ(read_file_bytes((root() / "p0.mhsl").string()), read_file_bytes((root() / "p1.mhsl").string()));
}

TEST(Cli, GenDataIsDeterministic) {
  hsx::testing::TempDir d("gen");
  const std::string cfg = (d / "small.cfg").string();
  write_file_text(cfg,
                  "[dataset.hyko2]\ncubes = 3\nheight = 4\nwidth = 4\n[dataset.hcv]\ncubes = 3\nheight = 4\nwidth = 4\n"
                  "[dataset.hsidrive]\ncubes = 3\nheight = 4\nwidth = 4\n[source]\ncubes = 2\n");
  for (const char* o : {"a", "b"})
    ASSERT_EQ(cli("gen-data --seed 9 --classes 3 --config " + cfg + " --out " + (d / o).string(), d.path()).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), d / "a");
    EXPECT_EQ(read_file_bytes(e.path().string()), read_file_bytes((d / "b" / rel).string())) << rel;
    ++files;
  }
  EXPECT_EQ(files, 3u * 4u + 3u);
  const auto m = load_manifest((d / "a" / "hcv" / "manifest.txt").string());
  EXPECT_EQ(m.classes(), 3u);
  for (const auto& e : m.entries) {
    const auto cube = read_cube((d / "a" / "hcv" / e.path).string());
    for (auto l : *cube.labels) EXPECT_TRUE(l < 3 || l == kIgnoreLabel);
  }
}
