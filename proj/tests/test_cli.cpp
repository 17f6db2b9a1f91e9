#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "cli/plot.hpp"
#include "cli/workspace.hpp"
#include "test_support.hpp"
#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/sweep.hpp"

using namespace xlp;
using namespace xlp::cli;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTinyConfig = R"(seed: 3
output_dir: out
corpus: {l1: data/l1.txt, l2: data/l2.txt}
stimuli: data/stimuli.csv
synthetic: {documents: 200, items: 6, verbs: 4, nouns: 10}
tokenizer: {vocab_size: 300}
model: {n_layers: 1, d_model: 16, n_heads: 2, seq_len: 64}
curriculum: {total_steps: 40, phase_boundary: 20, batch_size: 2}
optimizer: {learning_rate: 0.003, warmup_steps: 4}
checkpoints: {fine_offsets: [0, 5, 10, 15, 20]}
contamination: {reference_l1: data/l1.txt, reference_l2: data/l2.txt}
)";

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the tool in-process with an explicit (hermetic) environment.
Invocation xlprime(std::vector<std::string> args, const Environment& env = {},
                   const std::atomic<bool>* interrupt = nullptr) {
  args.insert(args.begin(), "xlprime");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err, env, interrupt);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class Workspace {
 public:
  explicit Workspace(const std::string& yaml = kTinyConfig) {
    write_file_atomic(dir_ / "experiment.yaml", yaml);
  }
  std::string config() const { return (dir_ / "experiment.yaml").string(); }
  fs::path out() const { return dir_.path() / "out"; }
  fs::path root() const { return dir_.path(); }

  Invocation verb(const std::string& name, std::vector<std::string> extra = {}, const Environment& env = {}) const {
    std::vector<std::string> args{name, "--config", config()};
    args.insert(args.end(), extra.begin(), extra.end());
    return xlprime(args, env);
  }

  void pipeline() const {
    for (const char* v : {"generate-synthetic", "train-tokenizer", "pretrain", "sweep", "analyze", "contamination", "plot"}) {
      const auto r = verb(v);
      ASSERT_EQ(r.code, 0) << v << ": " << r.err;
    }
  }

 private:
  fixture::TempDir dir_{"cli"};
};

ExperimentConfig parse(const std::string& yaml, const Environment& env = {}) {
  return parse_config(yaml, "/base", env);
}

}  // namespace

// ---- Config ----

TEST(Config, ResolvesPathsAndDefaults) {
  const auto c = parse(kTinyConfig);
  EXPECT_EQ(c.corpus_l1, fs::path("/base/data/l1.txt"));
  EXPECT_EQ(c.output_dir, fs::path("/base/out"));
  EXPECT_EQ(c.curriculum.seq_len, 64u);
  EXPECT_EQ(c.stats.baseline_step, 20u);
  EXPECT_EQ(c.stats.correction, PAdjust::holm);
  EXPECT_EQ(c.joiner, ". ");
  EXPECT_EQ(c.sweep_steps(), (std::vector<std::uint64_t>{20, 25, 30, 35, 40}));
  EXPECT_EQ(c.adam.total_steps, 40u);
}

TEST(Config, DefaultFineWindowFollowsTotalSteps) {
  auto c = parse("corpus: {l1: a, l2: b}\ncurriculum: {total_steps: 20000}\n");
  EXPECT_EQ(c.checkpoints.fine_offsets, default_fine_offsets(20000));
  EXPECT_EQ(c.curriculum.phase_boundary, 10000u);
  EXPECT_EQ(c.sweep_steps().size(), 21u);
}

TEST(Config, UnknownKeysAreRejectedByName) {
  try {
    parse(std::string(kTinyConfig) + "modle: {d_model: 3}\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("modle"), std::string::npos);
  }
  try {
    parse("corpus: {l1: a, l2: b, l3: c}\ncurriculum: {total_steps: 10}\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("corpus.l3"), std::string::npos);
  }
}

TEST(Config, EnvironmentOverridesAnyKey) {
  const auto c = parse(kTinyConfig, {{"XLPRIME_MODEL__D_MODEL", "32"}, {"XLPRIME_STATS__CORRECTION", "bh"},
                                     {"XLPRIME_CHECKPOINTS__FINE_OFFSETS", "[0, 10]"}});
  EXPECT_EQ(c.model.d_model, 32u);
  EXPECT_EQ(c.stats.correction, PAdjust::bh);
  EXPECT_EQ(c.checkpoints.fine_offsets, (std::vector<std::uint64_t>{0, 10}));
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_MODEL__D_MODLE", "32"}}), ConfigError);
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_MODEL____X", "1"}}), ConfigError);
}

TEST(Config, InvalidValuesAndInvariants) {
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_MODEL__D_MODEL", "wide"}}), ConfigError);
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_CHECKPOINTS__FINE_OFFSETS", "[0, 21]"}}), ConfigError);
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_STATS__BASELINE_STEP", "7"}}), ConfigError);
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_TOKENIZER__PROPORTIONS__L1", "0.9"}}), ConfigError);
  EXPECT_THROW(parse(kTinyConfig, {{"XLPRIME_MODEL__N_HEADS", "3"}}), ConfigError);
  EXPECT_THROW(parse("corpus: {l1: a}\ncurriculum: {total_steps: 10}\n"), ConfigError);
  EXPECT_THROW(parse("corpus: [1, 2"), ConfigError);
}

TEST(Config, SeedsDeriveFromTheMasterSeed) {
  const auto a = parse(kTinyConfig);
  const auto b = parse(kTinyConfig);
  const auto c = parse(kTinyConfig, {{"XLPRIME_SEED", "4"}});
  EXPECT_EQ(a.model_seed(), b.model_seed());
  EXPECT_EQ(a.data_seed(), b.data_seed());
  EXPECT_NE(a.model_seed(), c.model_seed());
  const std::set<std::uint64_t> distinct{a.tokenizer_seed(), a.model_seed(), a.data_seed(), a.synthetic_seed(),
                                         a.stimulus_seed()};
  EXPECT_EQ(distinct.size(), 5u);
  EXPECT_EQ(a.pretrain_config(300).model.seed, a.model_seed());
}

// ---- Manifest and lock ----

TEST(Manifest, HashIgnoresOutputDirectory) {
  auto a = parse(kTinyConfig);
  auto b = a;
  b.output_dir = "/elsewhere";
  EXPECT_EQ(manifest_hash(a), manifest_hash(b));
  b.model.d_model = 32;
  EXPECT_NE(manifest_hash(a), manifest_hash(b));
  // The same config file in another directory hashes identically.
  EXPECT_EQ(manifest_hash(parse_config(kTinyConfig, "/x", {})), manifest_hash(parse_config(kTinyConfig, "/y", {})));
}

TEST(Manifest, ForeignConfigNeedsForce) {
  fixture::TempDir dir;
  auto c = parse(kTinyConfig);
  Manifest::open(dir.path(), c, false).save();
  auto other = c;
  other.seed = 99;
  EXPECT_THROW(Manifest::open(dir.path(), other, false), ConfigError);
  auto forced = Manifest::open(dir.path(), other, true);
  forced.save();
  EXPECT_NO_THROW(Manifest::open(dir.path(), other, false));
}

TEST(Manifest, StaleInputsAndArtifacts) {
  fixture::TempDir dir;
  const auto c = parse(kTinyConfig);
  write_file_atomic(dir / "input.txt", "one\n");
  write_file_atomic(dir / "artifact.txt", "a\n");
  auto m = Manifest::open(dir.path(), c, false);
  m.check_input("corpus.l1", dir / "input.txt");
  m.record_artifact("artifact.txt", "test");
  m.save();
  write_file_atomic(dir / "input.txt", "two\n");
  write_file_atomic(dir / "artifact.txt", "b\n");
  auto again = Manifest::open(dir.path(), c, false);
  EXPECT_THROW(again.check_input("corpus.l1", dir / "input.txt"), DataError);
  EXPECT_THROW(again.require_artifact("artifact.txt"), DataError);
  EXPECT_THROW(again.require_artifact("missing.txt"), DataError);
  auto forced = Manifest::open(dir.path(), c, true);
  EXPECT_NO_THROW(forced.check_input("corpus.l1", dir / "input.txt"));
  EXPECT_NO_THROW(forced.require_artifact("artifact.txt"));
  EXPECT_THROW(forced.check_input("stimuli", dir / "absent.csv"), ConfigError);
}

TEST(Lock, OneCommandPerDirectory) {
  fixture::TempDir dir;
  {
    DirectoryLock held(dir.path());
    EXPECT_THROW(DirectoryLock second(dir.path()), ConfigError);
  }
  EXPECT_NO_THROW(DirectoryLock again(dir.path()));
}

// ---- Plots ----

TEST(Plot, DeterministicSvgWithEmbeddedData) {
  std::vector<StepSummary> steps{{100, 4, 0.6, 0.4, 0.2}, {110, 4, 0.55, 0.5, 0.05}, {120, 4, 0.5, 0.52, -0.02}};
  PlotOptions o;
  o.boundary = 100;
  o.manifest_hash = "abc";
  const auto a = priming_svg(steps, o);
  EXPECT_EQ(a, priming_svg(steps, o));
  EXPECT_EQ(a.rfind("<?xml", 0), 0u);
  EXPECT_EQ(a.substr(a.size() - 7), "</svg>\n");
  EXPECT_NE(a.find("step,items,mean_p_po_after_po,mean_p_po_after_do,mean_effect\n100,"), std::string::npos);
  EXPECT_NE(a.find("\n110,4,0.55000000000000004,0.5,0.050000000000000003\n"), std::string::npos);
  EXPECT_NE(a.find("manifest_hash,abc"), std::string::npos);
  const auto e = effect_svg(steps, o);
  EXPECT_NE(e.find("Priming effect trajectory"), std::string::npos);
  EXPECT_THROW(effect_svg({}, o), DataError);
}

// ---- Commands ----

TEST(Cli, UsageErrorsUseTheConfigExitCode) {
  EXPECT_EQ(xlprime({}).code, kConfigExit);
  EXPECT_EQ(xlprime({"frobnicate"}).code, kConfigExit);
  EXPECT_EQ(xlprime({"sweep"}).code, kConfigExit);  // no --config
  EXPECT_EQ(xlprime({"sweep", "--config", "/nonexistent.yaml"}).code, kConfigExit);
  EXPECT_EQ(xlprime({"--help"}).code, kOk);
  EXPECT_EQ(xlprime({"describe", "/nonexistent.bin"}).code, kDataExit);
}

TEST(Cli, SmokePipeline) {
  Workspace w;
  w.pipeline();
  const auto report = read_file(w.out() / layout::kReport);
  EXPECT_NE(report.find("Earliest significant step: "), std::string::npos);
  EXPECT_EQ(read_file(w.out() / layout::kContamination).substr(0, 27), "line_index,log_odds,flagged");
  EXPECT_EQ(load_sweep_csv(w.out() / layout::kSweep).size(), 5u * 6u * 2u);

  // Every file in the output directory is reachable from the manifest.
  const auto manifest = nlohmann::json::parse(read_file(w.out() / kManifestFile));
  for (const auto& e : fs::recursive_directory_iterator(w.out())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), w.out()).string();
    if (rel == kManifestFile || rel == kLockFile) continue;
    EXPECT_TRUE(manifest["artifacts"].contains(rel)) << rel;
  }
  EXPECT_EQ(manifest["artifacts"][layout::kSweep]["manifest_hash"], manifest["manifest_hash"]);

  // Idempotence: a second plot over the unchanged sweep is byte-identical.
  const auto svg = read_file(w.out() / layout::kPrimingPlot);
  EXPECT_EQ(w.verb("plot").code, 0);
  EXPECT_EQ(read_file(w.out() / layout::kPrimingPlot), svg);
  // Rerunning completed stages is a no-op that succeeds.
  EXPECT_EQ(w.verb("pretrain").code, 0);
  EXPECT_EQ(w.verb("sweep").code, 0);

  const auto d = xlprime({"describe", (w.out() / layout::checkpoint(40)).string()});
  EXPECT_EQ(d.code, 0);
  EXPECT_NE(d.out.find("step 40"), std::string::npos);
  EXPECT_NE(xlprime({"describe", (w.out() / layout::kTokenizer).string()}).out.find("entries 300"), std::string::npos);
}

TEST(Cli, TwoRunsAreByteIdentical) {
  Workspace a, b;
  a.pipeline();
  b.pipeline();
  for (const char* f : {layout::kSweep, layout::kCoefficients, layout::kLrt, layout::kStepSummary,
                        layout::kContamination, layout::kPrimingPlot, layout::kEffectPlot, layout::kTrainingLog}) {
    EXPECT_EQ(read_file(a.out() / f), read_file(b.out() / f)) << f;
  }
}

TEST(Cli, SingleCheckpointAnalysisIsAConfigError) {
  Workspace w;
  const Environment one{{"XLPRIME_CHECKPOINTS__FINE_OFFSETS", "[0]"}};
  for (const char* v : {"generate-synthetic", "train-tokenizer", "pretrain", "sweep"}) {
    ASSERT_EQ(w.verb(v, {}, one).code, 0) << v;
  }
  const auto r = w.verb("analyze", {}, one);
  EXPECT_EQ(r.code, kConfigExit) << r.err;
  EXPECT_NE(r.err.find("error [config]"), std::string::npos);
}

TEST(Cli, StaleArtifactsAreRefusedWithoutForce) {
  Workspace w;
  for (const char* v : {"generate-synthetic", "train-tokenizer"}) ASSERT_EQ(w.verb(v).code, 0);
  const auto tok = read_file(w.out() / layout::kTokenizer);
  write_file_atomic(w.out() / layout::kTokenizer, tok + " ");
  EXPECT_EQ(w.verb("pretrain").code, kDataExit);
  write_file_atomic(w.out() / layout::kTokenizer, tok);
  // A changed corpus is stale too.
  const auto l1 = w.root() / "data" / "l1.txt";
  const auto text = read_file(l1);
  write_file_atomic(l1, text + "extra line\n");
  EXPECT_EQ(w.verb("pretrain").code, kDataExit);
  write_file_atomic(l1, text);
  EXPECT_EQ(w.verb("pretrain").code, 0);
  // A different config in the same directory is refused unless forced.
  EXPECT_EQ(w.verb("pretrain", {"--seed", "9"}).code, kConfigExit);
  // Regenerating inputs with different content needs --force as well.
  EXPECT_EQ(w.verb("generate-synthetic", {"--seed", "9", "--out", (w.root() / "other").string()}).code, kDataExit);
}

TEST(Cli, InterruptedPretrainingResumes) {
  Workspace w;
  for (const char* v : {"generate-synthetic", "train-tokenizer"}) ASSERT_EQ(w.verb(v).code, 0);
  std::atomic<bool> stop{true};
  const auto r = xlprime({"pretrain", "--config", w.config()}, {}, &stop);
  EXPECT_EQ(r.code, kInterruptedExit);
  EXPECT_TRUE(fs::exists(w.out() / layout::checkpoint(0)));
  const auto resumed = w.verb("pretrain");
  EXPECT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_TRUE(fs::exists(w.out() / layout::checkpoint(40)));
}

TEST(Cli, StrictStimuliTurnWarningsIntoDataErrors) {
  Workspace w;
  w.pipeline();
  // Swap a content word in one target so PO and DO disagree.
  auto csv = read_file(w.root() / "data" / "stimuli.csv");
  const auto row = csv.find("\n1,");
  ASSERT_NE(row, std::string::npos);
  const auto last_comma = csv.find('\n', row + 1);
  csv.insert(last_comma, "x");
  write_file_atomic(w.root() / "data" / "stimuli.csv", csv);
  EXPECT_EQ(w.verb("sweep", {"--force", "--strict"}).code, kDataExit);
}
