#include "xlprime/sweep.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "xlprime/checkpoint.hpp"
#include "xlprime/csv.hpp"
#include "xlprime/error.hpp"
#include "xlprime/hash.hpp"
#include "xlprime/io.hpp"

namespace xlp {

namespace fs = std::filesystem;

std::string SweepManifest::canonical_json() const {
  nlohmann::json j;
  j["stimulus_sha256"] = stimulus_sha256;
  j["tokenizer_fingerprint"] = tokenizer_fingerprint;
  j["joiner"] = joiner;
  auto list = nlohmann::json::array();
  for (const auto& e : checkpoints) list.push_back({{"step", e.step}, {"sha256", e.sha256}});
  j["checkpoints"] = list;
  return j.dump();
}

std::string SweepManifest::hash() const { return sha256_hex(canonical_json()); }

std::vector<std::uint64_t> fine_grained_steps(std::uint64_t boundary, std::uint64_t interval, std::size_t count) {
  if (interval == 0) throw ConfigError("fine-grained interval must be positive");
  std::vector<std::uint64_t> steps;
  steps.reserve(count);
  for (std::size_t k = 0; k < count; ++k) steps.push_back(boundary + k * interval);
  return steps;
}

void sort_measurements(std::vector<PrimingMeasurement>& rows) {
  std::sort(rows.begin(), rows.end(), [](const PrimingMeasurement& a, const PrimingMeasurement& b) {
    if (a.step != b.step) return a.step < b.step;
    if (a.item_id != b.item_id) return a.item_id < b.item_id;
    return a.prime_type == PrimeType::po && b.prime_type == PrimeType::do_;
  });
}

std::string sweep_csv(const std::vector<PrimingMeasurement>& rows) {
  std::string out(kSweepHeader);
  out += '\n';
  for (const auto& m : rows) {
    out += std::to_string(m.step) + ',' + std::to_string(m.item_id) + ',' + to_string(m.prime_type) + ',' +
           format_double(m.lp_po_target) + ',' + format_double(m.lp_do_target) + ',' +
           format_double(m.p_n_po_target) + '\n';
  }
  return out;
}

namespace {

template <typename Int>
Int parse_int(const std::string& field, std::string_view origin, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(field, &used);
    if (used != field.size() || (std::is_unsigned_v<Int> && v < 0)) throw std::invalid_argument(field);
    return static_cast<Int>(v);
  } catch (const std::exception&) {
    throw DataError(std::string(origin) + ":" + std::to_string(line) + ": not an integer: '" + field + "'");
  }
}

double parse_real(const std::string& field, std::string_view origin, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw DataError(std::string(origin) + ":" + std::to_string(line) + ": not a number: '" + field + "'");
  }
}

}  // namespace

std::vector<PrimingMeasurement> parse_sweep_csv(std::string_view text, std::string_view origin) {
  const auto rows = csv::parse(text);
  if (rows.empty() || csv::join(rows.front()) != kSweepHeader) {
    throw DataError(std::string(origin) + ": expected header '" + std::string(kSweepHeader) + "'");
  }
  std::vector<PrimingMeasurement> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    const std::size_t line = r + 1;
    if (f.size() != 6) {
      throw DataError(std::string(origin) + ":" + std::to_string(line) + ": expected 6 fields, found " +
                      std::to_string(f.size()));
    }
    PrimingMeasurement m;
    m.step = parse_int<std::uint64_t>(f[0], origin, line);
    m.item_id = parse_int<std::int64_t>(f[1], origin, line);
    m.prime_type = parse_prime_type(f[2]);
    m.lp_po_target = parse_real(f[3], origin, line);
    m.lp_do_target = parse_real(f[4], origin, line);
    m.p_n_po_target = parse_real(f[5], origin, line);
    if (!(m.p_n_po_target >= 0.0 && m.p_n_po_target <= 1.0)) {
      throw DataError(std::string(origin) + ":" + std::to_string(line) + ": p_n_po_target outside [0, 1]");
    }
    out.push_back(m);
  }
  return out;
}

std::vector<PrimingMeasurement> load_sweep_csv(const fs::path& path) {
  return parse_sweep_csv(read_file(path), path.string());
}

namespace {

fs::path manifest_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p += ".manifest.json";
  return p;
}

std::string manifest_document(const SweepManifest& manifest) {
  nlohmann::json j = nlohmann::json::parse(manifest.canonical_json());
  j["manifest_hash"] = manifest.hash();
  for (std::size_t k = 0; k < manifest.checkpoints.size(); ++k) {
    j["checkpoints"][k]["path"] = manifest.checkpoints[k].path;
  }
  return j.dump(2) + "\n";
}

// Rows from an earlier run with the same manifest, restricted to complete checkpoints.
std::vector<PrimingMeasurement> resumable_rows(const SweepOptions& options, const SweepManifest& manifest,
                                               std::size_t rows_per_step) {
  if (!options.output_csv) return {};
  const fs::path csv_path = *options.output_csv;
  const fs::path side = manifest_path(csv_path);
  if (!fs::exists(csv_path)) return {};
  std::string previous_hash;
  if (fs::exists(side)) {
    try {
      previous_hash = nlohmann::json::parse(read_file(side)).at("manifest_hash").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      previous_hash.clear();
    }
  }
  if (previous_hash != manifest.hash()) {
    if (options.overwrite) return {};
    throw ConfigError("'" + csv_path.string() +
                      "' was produced by a different sweep (manifest mismatch); remove it or pass --force");
  }
  auto rows = load_sweep_csv(csv_path);
  std::map<std::uint64_t, std::size_t> per_step;
  for (const auto& m : rows) ++per_step[m.step];
  std::erase_if(rows, [&](const PrimingMeasurement& m) { return per_step[m.step] != rows_per_step; });
  return rows;
}

}  // namespace

SweepResult sweep(const std::vector<fs::path>& checkpoints, const std::vector<StimulusItem>& stimuli,
                  const Tokenizer& tokenizer, const Joiner& joiner, const SweepOptions& options) {
  if (checkpoints.empty()) throw ConfigError("sweep: no checkpoints given");
  if (stimuli.empty()) throw ConfigError("sweep: no stimulus items given");
  std::set<std::int64_t> ids;
  for (const auto& item : stimuli) {
    if (!ids.insert(item.item_id).second) throw DataError("sweep: duplicate item_id " + std::to_string(item.item_id));
  }

  const std::string fingerprint = tokenizer.fingerprint();
  struct Source {
    std::uint64_t step;
    fs::path path;
  };
  std::vector<Source> sources;
  SweepManifest manifest;
  manifest.tokenizer_fingerprint = fingerprint;
  manifest.joiner = joiner.text;
  manifest.stimulus_sha256 = options.stimulus_sha256.empty() ? sha256_hex(stimuli_to_csv(stimuli))
                                                             : options.stimulus_sha256;
  std::optional<ModelConfig> config;
  std::set<std::uint64_t> steps;
  for (const auto& path : checkpoints) {
    const auto header = read_checkpoint_header(path);
    if (header.tokenizer_fingerprint != fingerprint) {
      throw DataError("checkpoint '" + path.string() + "' was trained with tokenizer " + header.tokenizer_fingerprint +
                      " but the sweep uses " + fingerprint);
    }
    if (config && !(*config == header.config)) {
      throw DataError("checkpoint '" + path.string() + "' has a different model config from the others");
    }
    config = header.config;
    if (!steps.insert(header.step).second) {
      throw DataError("two checkpoints share step " + std::to_string(header.step));
    }
    sources.push_back({header.step, path});
  }
  std::sort(sources.begin(), sources.end(), [](const Source& a, const Source& b) { return a.step < b.step; });
  for (const auto& s : sources) manifest.checkpoints.push_back({s.step, s.path.string(), sha256_file(s.path)});

  const std::size_t rows_per_step = 2 * stimuli.size();
  SweepResult result;
  result.manifest = manifest;
  result.measurements = resumable_rows(options, manifest, rows_per_step);
  std::set<std::uint64_t> done;
  for (const auto& m : result.measurements) done.insert(m.step);
  if (options.output_csv) {
    if (options.output_csv->has_parent_path()) fs::create_directories(options.output_csv->parent_path());
    write_file_atomic(manifest_path(*options.output_csv), manifest_document(manifest));
  }

  for (const auto& source : sources) {
    if (done.count(source.step)) continue;
    const auto params = load_scoring_parameters(source.path, fingerprint);
    const LmScorer scorer(params);
    for (const auto& item : stimuli) {
      const auto pair = measure_item(scorer, tokenizer, item, joiner, source.step);
      result.measurements.insert(result.measurements.end(), pair.begin(), pair.end());
    }
    sort_measurements(result.measurements);
    if (options.output_csv) write_file_atomic(*options.output_csv, sweep_csv(result.measurements));
  }
  sort_measurements(result.measurements);
  if (options.output_csv) write_file_atomic(*options.output_csv, sweep_csv(result.measurements));

  // Token counts are not part of the CSV; restore them for resumed rows.
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& item : stimuli) {
    counts[item.item_id] = {split_prime_target(tokenizer, "x", item.target_po, joiner).target.size(),
                            split_prime_target(tokenizer, "x", item.target_do, joiner).target.size()};
  }
  for (auto& m : result.measurements) std::tie(m.po_target_tokens, m.do_target_tokens) = counts.at(m.item_id);
  return result;
}

}  // namespace xlp
