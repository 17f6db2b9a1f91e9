#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xlprime/analysis.hpp"
#include "xlprime/pretrain.hpp"
#include "xlprime/synthetic.hpp"
#include "xlprime/tokenizer.hpp"

namespace xlp::cli {

/// Inputs for `generate-synthetic`; outputs go to the configured corpus and stimulus paths.
struct SyntheticSettings {
  GrammarConfig grammar;
  std::size_t documents = 2000;
  std::size_t items = 24;
};

struct ContaminationSettings {
  Language shard = Language::l1;  ///< which configured corpus to scan
  std::filesystem::path reference_l1;
  std::filesystem::path reference_l2;
  std::size_t order = 2;
  double smoothing = 0.5;
  double threshold = 0.0;
};

enum class SweepSelection { fine, all };

/// Everything one experiment needs. Relative paths are resolved against the config file's
/// directory; every stochastic component draws its seed from `seed`.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  /// Directory relative paths were resolved against; the echo reports paths relative to it.
  std::filesystem::path base_dir;
  std::filesystem::path output_dir = "out";
  std::filesystem::path corpus_l1;
  std::filesystem::path corpus_l2;
  std::optional<SyntheticSettings> synthetic;
  std::size_t tokenizer_vocab = 8192;
  /// Leading bytes of each corpus offered to tokenizer training (cut at a line end); 0 = all.
  std::size_t tokenizer_sample_chars = 0;
  LanguageProportions proportions;
  ModelConfig model;  ///< vocab_size and seed are derived, not configured
  CurriculumSchedule curriculum;
  AdamConfig adam;
  CheckpointSchedule checkpoints;
  DType dtype = DType::float32;
  std::filesystem::path stimuli;
  std::string joiner = ". ";
  SweepSelection sweep_selection = SweepSelection::fine;
  AnalysisOptions stats;  ///< baseline_step defaults to the phase boundary
  ContaminationSettings contamination;

  std::uint64_t tokenizer_seed() const;
  std::uint64_t model_seed() const;
  std::uint64_t data_seed() const;
  std::uint64_t synthetic_seed() const;
  std::uint64_t stimulus_seed() const;

  /// Full pretraining config, with model vocab taken from the tokenizer.
  PretrainConfig pretrain_config(std::size_t vocab_size) const;
  /// Checkpoint steps the sweep evaluates.
  std::vector<std::uint64_t> sweep_steps() const;
  /// Canonical echo of every resolved setting except the output directory; the manifest
  /// hash covers it.
  std::string to_json() const;
};

using Environment = std::map<std::string, std::string>;

/// Reads `XLPRIME_*` variables from the process environment.
Environment process_environment();

/// Parses YAML text. Environment entries `XLPRIME_A__B=v` override key `a.b` with the
/// YAML scalar `v`. Unknown keys (in the file or the environment) are a ConfigError.
ExperimentConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir,
                              const Environment& env = {});
ExperimentConfig load_config(const std::filesystem::path& path, const Environment& env = {});

}  // namespace xlp::cli
