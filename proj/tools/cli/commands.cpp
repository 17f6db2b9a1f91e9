#include "commands.hpp"

#include <cstdio>
#include <ostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "plot.hpp"
#include "workspace.hpp"
#include "xlprime/analysis.hpp"
#include "xlprime/checkpoint.hpp"
#include "xlprime/corpus.hpp"
#include "xlprime/hash.hpp"
#include "xlprime/io.hpp"
#include "xlprime/langid.hpp"
#include "xlprime/pretrain.hpp"
#include "xlprime/stimuli.hpp"
#include "xlprime/sweep.hpp"
#include "xlprime/synthetic.hpp"
#include "xlprime/tokenizer.hpp"

namespace xlp::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return kConfigExit;
    case ErrorKind::data:
      return kDataExit;
    case ErrorKind::numeric:
      return kNumericExit;
    case ErrorKind::interrupted:
      return kInterruptedExit;
  }
  return kFailure;
}

std::string layout::checkpoint(std::uint64_t step) {
  return std::string(kCheckpoints) + "/" + checkpoint_filename(step);
}

namespace {

// A command's hold on its output directory: the lock plus the manifest, which is saved
// before the command produces anything.
struct Session {
  DirectoryLock lock;
  Manifest manifest;

  Session(const ExperimentConfig& config, const GlobalOptions& options)
      : lock(config.output_dir), manifest(Manifest::open(config.output_dir, config, options.force)) {}

  fs::path operator/(const std::string& relative) const { return manifest.dir() / relative; }

  void write(const std::string& relative, std::string_view contents, const std::string& command) {
    const auto path = manifest.dir() / relative;
    fs::create_directories(path.parent_path());
    write_file_atomic(path, contents);
    manifest.record_artifact(relative, command);
  }
};

std::string corpus_lines(const std::vector<std::string>& docs) {
  std::string s;
  for (const auto& d : docs) s += d + "\n";
  return s;
}

// Leading `limit` bytes of `text`, cut back to the last complete line.
std::string_view sample(std::string_view text, std::size_t limit) {
  if (limit == 0 || text.size() <= limit) return text;
  const auto cut = text.rfind('\n', limit);
  return cut == std::string_view::npos ? text.substr(0, 0) : text.substr(0, cut + 1);
}

void write_generated(const fs::path& path, const std::string& contents, bool force) {
  if (path.empty()) throw ConfigError("generate-synthetic: an output path is not configured");
  if (fs::exists(path) && !force && read_file(path) != contents) {
    throw DataError("refusing to overwrite '" + path.string() + "' with different content; rerun with --force");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, contents);
}

void record_checkpoints(Session& s) {
  const auto dir = s / layout::kCheckpoints;
  if (!fs::exists(dir)) return;
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && (name.rfind("ckpt_step_", 0) == 0 || name == "training_log.csv")) names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  for (const auto& n : names) s.manifest.record_artifact(std::string(layout::kCheckpoints) + "/" + n, "pretrain");
}

const char* verdict(const std::optional<std::uint64_t>& step) { return step ? "found" : "none"; }

}  // namespace

ExperimentConfig resolve_config(const GlobalOptions& options, const Environment& env) {
  if (options.config.empty()) throw ConfigError("--config is required");
  auto e = env;
  if (options.seed) e["XLPRIME_SEED"] = std::to_string(*options.seed);
  auto config = load_config(options.config, e);
  if (options.out) config.output_dir = fs::absolute(*options.out).lexically_normal();
  return config;
}

void cmd_generate_synthetic(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out) {
  if (!config.synthetic) throw ConfigError("generate-synthetic needs a 'synthetic' section in the config");
  Session s(config, options);
  s.manifest.save();
  const auto& syn = *config.synthetic;
  const auto pair = generate_synthetic_pair(syn.grammar, syn.documents, config.synthetic_seed());
  const auto items = make_synthetic_stimuli(pair, syn.grammar, syn.items, config.stimulus_seed());
  write_generated(config.corpus_l1, corpus_lines(pair.l1.documents), options.force);
  write_generated(config.corpus_l2, corpus_lines(pair.l2.documents), options.force);
  write_generated(config.stimuli, stimuli_to_csv(items), options.force);
  s.manifest.record_input("corpus.l1", config.corpus_l1);
  s.manifest.record_input("corpus.l2", config.corpus_l2);
  s.manifest.record_input("stimuli", config.stimuli);
  s.manifest.save();
  out << "generated " << syn.documents << " documents per language and " << items.size() << " stimulus items\n";
}

void cmd_train_tokenizer(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out) {
  Session s(config, options);
  s.manifest.check_input("corpus.l1", config.corpus_l1);
  s.manifest.check_input("corpus.l2", config.corpus_l2);
  s.manifest.save();
  const auto l1 = read_file(config.corpus_l1);
  const auto l2 = read_file(config.corpus_l2);
  spdlog::info("training a {}-entry tokenizer", config.tokenizer_vocab);
  const auto tok = Tokenizer::train(sample(l1, config.tokenizer_sample_chars), sample(l2, config.tokenizer_sample_chars),
                                    config.proportions, config.tokenizer_vocab, config.tokenizer_seed());
  s.write(layout::kTokenizer, tok.to_json(), "train-tokenizer");
  s.manifest.save();
  out << "tokenizer: " << tok.vocab_size() << " entries, fingerprint " << tok.fingerprint() << "\n";
}

void cmd_pretrain(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out,
                  const std::atomic<bool>* interrupt) {
  Session s(config, options);
  s.manifest.check_input("corpus.l1", config.corpus_l1);
  s.manifest.check_input("corpus.l2", config.corpus_l2);
  s.manifest.require_artifact(layout::kTokenizer);
  const auto ckdir = s / layout::kCheckpoints;
  if (fs::exists(ckdir)) {
    for (const auto& e : fs::directory_iterator(ckdir)) {
      s.manifest.verify_if_recorded(std::string(layout::kCheckpoints) + "/" + e.path().filename().string());
    }
  }
  s.manifest.save();

  const auto tok = Tokenizer::load(s / layout::kTokenizer);
  const auto l1 = ingest(config.corpus_l1, Language::l1);
  const auto l2 = ingest(config.corpus_l2, Language::l2);
  const auto pc = config.pretrain_config(tok.vocab_size());
  PretrainHooks hooks;
  if (interrupt) hooks.interrupted = [interrupt] { return interrupt->load(); };
  const auto every = std::max<std::uint64_t>(1, pc.curriculum.total_steps / 20);
  hooks.progress = [every, total = pc.curriculum.total_steps](std::uint64_t step, double loss) {
    if (step % every == 0 || step == total) spdlog::info("step {}/{} loss {:.4f}", step, total, loss);
  };
  PretrainResult r;
  try {
    r = pretrain(pc, l1, l2, tok, ckdir, hooks);
  } catch (const InterruptedError&) {
    record_checkpoints(s);
    s.manifest.save();
    throw;
  }
  record_checkpoints(s);
  s.manifest.save();
  out << "pretrained " << r.completed_steps << " steps";
  if (r.resumed_from) out << " (resumed from step " << r.resumed_from << ")";
  out << "; " << r.checkpoints.size() << " checkpoints\n";
}

void cmd_sweep(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out) {
  Session s(config, options);
  s.manifest.check_input("stimuli", config.stimuli);
  s.manifest.require_artifact(layout::kTokenizer);
  std::vector<fs::path> paths;
  for (auto step : config.sweep_steps()) {
    s.manifest.require_artifact(layout::checkpoint(step));
    paths.push_back(s / layout::checkpoint(step));
  }
  s.manifest.verify_if_recorded(layout::kSweep);
  s.manifest.save();

  StimulusOptions so;
  so.strict = options.strict;
  const auto stimuli = load_stimuli(config.stimuli, so);
  for (const auto& w : stimuli.warnings) spdlog::warn("{}", w);
  const auto tok = Tokenizer::load(s / layout::kTokenizer);
  SweepOptions sw;
  sw.output_csv = s / layout::kSweep;
  sw.stimulus_sha256 = sha256_file(config.stimuli);
  sw.overwrite = options.force;
  spdlog::info("scoring {} items at {} checkpoints", stimuli.items.size(), paths.size());
  const auto result = sweep(paths, stimuli.items, tok, Joiner{config.joiner}, sw);
  s.manifest.record_artifact(layout::kSweep, "sweep");
  s.manifest.record_artifact(layout::kSweepSidecar, "sweep");
  s.manifest.save();
  out << "sweep: " << result.measurements.size() << " rows over " << paths.size() << " checkpoints\n";
}

void cmd_analyze(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out) {
  Session s(config, options);
  s.manifest.require_artifact(layout::kSweep);
  s.manifest.save();
  const auto rows = load_sweep_csv(s / layout::kSweep);
  const auto report = analyze(rows, config.stats);
  const auto text = report.to_text();
  s.write(layout::kReport, "manifest " + s.manifest.hash() + "\n\n" + text, "analyze");
  s.write(layout::kCoefficients, report.coefficients_csv(), "analyze");
  s.write(layout::kLrt, report.lrt_csv(), "analyze");
  std::string summary = "step,items,mean_p_po_after_po,mean_p_po_after_do,mean_effect\n";
  for (const auto& r : summarize_by_step(rows)) {
    summary += std::to_string(r.step) + "," + std::to_string(r.items) + "," + format_double(r.mean_after_po) + "," +
               format_double(r.mean_after_do) + "," + format_double(r.mean_effect) + "\n";
  }
  s.write(layout::kStepSummary, summary, "analyze");
  s.manifest.save();
  out << text;
  spdlog::info("earliest significant step: {}", verdict(report.earliest_significant));
}

void cmd_contamination(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out) {
  const auto& c = config.contamination;
  if (c.reference_l1.empty() || c.reference_l2.empty()) {
    throw ConfigError("contamination needs contamination.reference_l1 and contamination.reference_l2");
  }
  Session s(config, options);
  const bool l1 = c.shard == Language::l1;
  const auto& shard_path = l1 ? config.corpus_l1 : config.corpus_l2;
  s.manifest.check_input(l1 ? "corpus.l1" : "corpus.l2", shard_path);
  s.manifest.check_input("contamination.reference_l1", c.reference_l1);
  s.manifest.check_input("contamination.reference_l2", c.reference_l2);
  s.manifest.save();
  const auto model = LangIdModel::train(ingest(c.reference_l1, Language::l1), ingest(c.reference_l2, Language::l2),
                                        c.order, c.smoothing);
  const auto report = scan_contamination(ingest(shard_path, c.shard), model, c.threshold);
  s.write(layout::kContamination, report.to_csv(), "contamination");
  s.manifest.save();
  char frac[32];
  std::snprintf(frac, sizeof frac, "%.6f", report.flagged_fraction);
  out << "contamination: " << report.flagged_lines << " of " << report.scanned_lines << " " << to_string(c.shard)
      << " lines flagged (fraction " << frac << ")\n";
}

void cmd_plot(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out,
              const std::optional<fs::path>& csv) {
  Session s(config, options);
  if (csv) {
    s.manifest.check_input("plot.csv", *csv);
  } else {
    s.manifest.require_artifact(layout::kSweep);
  }
  s.manifest.save();
  const auto rows = load_sweep_csv(csv ? *csv : s / layout::kSweep);
  const auto steps = summarize_by_step(rows);
  PlotOptions po;
  po.boundary = config.curriculum.phase_boundary;
  po.manifest_hash = s.manifest.hash();
  s.write(layout::kPrimingPlot, priming_svg(steps, po), "plot");
  s.write(layout::kEffectPlot, effect_svg(steps, po), "plot");
  s.manifest.save();
  out << "plots: " << (s / layout::kPrimingPlot).string() << ", " << (s / layout::kEffectPlot).string() << "\n";
}

void cmd_describe(const fs::path& path, std::ostream& out) {
  if (!fs::exists(path)) throw DataError("'" + path.string() + "' does not exist");
  const auto head = read_file(path).substr(0, 8);
  if (head.rfind("XLPCKPT", 0) == 0) {
    const auto h = read_checkpoint_header(path);
    out << "checkpoint " << path.string() << "\n"
        << "  format version " << h.format_version << ", step " << h.step << ", dtype " << h.dtype << "\n"
        << "  parameters " << parameter_count(h.config) << ", tokenizer " << h.tokenizer_fingerprint << "\n"
        << h.json << "\n";
    return;
  }
  const auto tok = Tokenizer::load(path);
  out << "tokenizer " << path.string() << "\n"
      << "  entries " << tok.vocab_size() << ", merges " << tok.merges().size() << "\n"
      << "  fingerprint " << tok.fingerprint() << "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Environment& env,
        const std::atomic<bool>* interrupt) {
  CLI::App app{"xlprime: crosslingual structural priming in small language models"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  std::string config_path, out_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "experiment config (YAML)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed, overriding the config");
  auto* out_opt = app.add_option("--out", out_path, "output directory, overriding the config");
  app.add_flag("--force", g.force, "accept stale or foreign artifacts and overwrite them");
  app.add_flag("--strict", g.strict, "treat stimulus warnings as errors");

  auto* gen = app.add_subcommand("generate-synthetic", "write a synthetic bilingual corpus pair and stimuli");
  auto* tok = app.add_subcommand("train-tokenizer", "train the shared BPE tokenizer");
  auto* pre = app.add_subcommand("pretrain", "curriculum pretraining with scheduled checkpoints (resumable)");
  auto* swp = app.add_subcommand("sweep", "score every stimulus item at every swept checkpoint");
  auto* ana = app.add_subcommand("analyze", "mixed-model analysis of the sweep");
  auto* con = app.add_subcommand("contamination", "scan a corpus for lines of the other language");
  auto* plt = app.add_subcommand("plot", "SVG plots of the priming trajectory");
  auto* des = app.add_subcommand("describe", "print a checkpoint header or tokenizer summary");
  std::string plot_csv, describe_path;
  auto* csv_opt = plt->add_option("--csv", plot_csv, "sweep CSV to plot instead of the output directory's");
  des->add_option("path", describe_path, "checkpoint or tokenizer file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigExit;
  }
  g.config = config_path;
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out = out_path;

  try {
    if (des->parsed()) {
      cmd_describe(describe_path, out);
      return kOk;
    }
    const auto config = resolve_config(g, env);
    if (gen->parsed()) cmd_generate_synthetic(config, g, out);
    else if (tok->parsed()) cmd_train_tokenizer(config, g, out);
    else if (pre->parsed()) cmd_pretrain(config, g, out, interrupt);
    else if (swp->parsed()) cmd_sweep(config, g, out);
    else if (ana->parsed()) cmd_analyze(config, g, out);
    else if (con->parsed()) cmd_contamination(config, g, out);
    else if (plt->parsed()) cmd_plot(config, g, out, *csv_opt ? std::optional<fs::path>(plot_csv) : std::nullopt);
    return kOk;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace xlp::cli
