#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xlprime/scoring.hpp"
#include "xlprime/stimuli.hpp"
#include "xlprime/tokenizer.hpp"

namespace xlp {

inline constexpr std::string_view kSweepHeader = "step,item_id,prime_type,lp_po_target,lp_do_target,p_n_po_target";

struct SweepManifest {
  struct Entry {
    std::uint64_t step = 0;
    std::string path;
    std::string sha256;
  };
  std::vector<Entry> checkpoints;
  std::string stimulus_sha256;
  std::string tokenizer_fingerprint;
  std::string joiner;

  /// Canonical JSON (sorted keys, no paths: relocating files keeps the hash).
  std::string canonical_json() const;
  std::string hash() const;
};

struct SweepResult {
  std::vector<PrimingMeasurement> measurements;  ///< ordered by (step, item_id, prime type PO<DO)
  SweepManifest manifest;
};

/// {boundary, boundary + interval, ..., boundary + (count - 1) * interval}.
std::vector<std::uint64_t> fine_grained_steps(std::uint64_t boundary, std::uint64_t interval = 10,
                                              std::size_t count = 21);

std::string sweep_csv(const std::vector<PrimingMeasurement>& rows);
std::vector<PrimingMeasurement> parse_sweep_csv(std::string_view text, std::string_view origin = "<memory>");
std::vector<PrimingMeasurement> load_sweep_csv(const std::filesystem::path& path);

/// Sorts into the canonical row order.
void sort_measurements(std::vector<PrimingMeasurement>& rows);

struct SweepOptions {
  /// When set, rows are written here after every checkpoint, alongside `<csv>.manifest.json`.
  /// An existing CSV whose sidecar carries the same manifest hash is resumed.
  std::optional<std::filesystem::path> output_csv;
  /// Stimulus file hash recorded in the manifest; computed from the items when empty.
  std::string stimulus_sha256;
  /// Replace an existing CSV produced under a different manifest instead of refusing.
  bool overwrite = false;
};

/// Evaluates every (checkpoint, item, prime type). All checkpoints must share the model
/// config and the tokenizer's fingerprint.
SweepResult sweep(const std::vector<std::filesystem::path>& checkpoints, const std::vector<StimulusItem>& stimuli,
                  const Tokenizer& tokenizer, const Joiner& joiner, const SweepOptions& options = {});

}  // namespace xlp
