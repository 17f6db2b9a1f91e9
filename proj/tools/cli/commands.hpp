#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "config.hpp"
#include "xlprime/error.hpp"

namespace xlp::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigExit = 2,
  kDataExit = 3,
  kNumericExit = 4,
  kInterruptedExit = 5,
};

int exit_code(ErrorKind kind) noexcept;

struct GlobalOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool force = false;
  bool strict = false;
};

/// Files inside an output directory.
namespace layout {
inline constexpr const char* kTokenizer = "tokenizer.json";
inline constexpr const char* kCheckpoints = "checkpoints";
inline constexpr const char* kTrainingLog = "checkpoints/training_log.csv";
inline constexpr const char* kSweep = "sweep.csv";
inline constexpr const char* kSweepSidecar = "sweep.csv.manifest.json";
inline constexpr const char* kReport = "analysis/report.txt";
inline constexpr const char* kCoefficients = "analysis/coefficients.csv";
inline constexpr const char* kLrt = "analysis/lrt.csv";
inline constexpr const char* kStepSummary = "analysis/step_summary.csv";
inline constexpr const char* kContamination = "contamination.csv";
inline constexpr const char* kPrimingPlot = "plots/priming.svg";
inline constexpr const char* kEffectPlot = "plots/effect.svg";
std::string checkpoint(std::uint64_t step);
}  // namespace layout

/// Loads the config named by `options`, applying the environment and --seed / --out.
ExperimentConfig resolve_config(const GlobalOptions& options, const Environment& env);

void cmd_generate_synthetic(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out);
void cmd_train_tokenizer(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out);
/// `interrupt`, when set, is polled between steps (SIGINT / SIGTERM).
void cmd_pretrain(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out,
                  const std::atomic<bool>* interrupt = nullptr);
void cmd_sweep(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out);
void cmd_analyze(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out);
void cmd_contamination(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out);
/// Plots `csv` when given, otherwise the output directory's sweep.
void cmd_plot(const ExperimentConfig& config, const GlobalOptions& options, std::ostream& out,
              const std::optional<std::filesystem::path>& csv = std::nullopt);
/// Prints the header of a checkpoint or a summary of a tokenizer file.
void cmd_describe(const std::filesystem::path& path, std::ostream& out);

/// Parses arguments and runs one verb; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Environment& env,
        const std::atomic<bool>* interrupt = nullptr);

}  // namespace xlp::cli
