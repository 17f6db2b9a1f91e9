#include "xlprime/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "xlprime/checkpoint.hpp"
#include "xlprime/csv.hpp"
#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/rng.hpp"

namespace xlp {

namespace fs = std::filesystem;

std::vector<std::uint64_t> CheckpointSchedule::steps(const CurriculumSchedule& curriculum) const {
  const std::uint64_t total = curriculum.total_steps;
  const std::uint64_t every = coarse_interval != 0 ? coarse_interval : std::max<std::uint64_t>(1, total / 10);
  std::set<std::uint64_t> out;
  for (std::uint64_t s = 0; s <= total; s += every) out.insert(s);
  for (auto o : fine_offsets) {
    if (curriculum.phase_boundary + o > total) {
      throw ConfigError("fine checkpoint offset " + std::to_string(o) + " lies beyond total_steps");
    }
    out.insert(curriculum.phase_boundary + o);
  }
  out.insert(total);
  return {out.begin(), out.end()};
}

std::vector<std::uint64_t> default_fine_offsets(std::uint64_t total_steps) {
  const auto k = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(10.0 * static_cast<double>(total_steps) / 1e6)));
  std::vector<std::uint64_t> out;
  for (std::uint64_t i = 0; i <= 20; ++i) out.push_back(i * k);
  return out;
}

const char* to_string(DType dtype) noexcept { return dtype == DType::float32 ? "float32" : "float64"; }

DType parse_dtype(std::string_view text) {
  if (text == "float32") return DType::float32;
  if (text == "float64") return DType::float64;
  throw ConfigError("unknown dtype '" + std::string(text) + "' (float32, float64)");
}

std::string checkpoint_filename(std::uint64_t step) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "ckpt_step_%08llu.bin", static_cast<unsigned long long>(step));
  return buf;
}

namespace {

std::string log_row(std::uint64_t step, const StepResult& r, const TokenCounts& seen) {
  return std::to_string(step) + ',' + format_double(r.loss) + ',' + format_double(r.learning_rate) + ',' +
         std::to_string(seen.l1) + ',' + std::to_string(seen.l2) + '\n';
}

// Keeps the log rows for steps before `step`, so a resumed run appends exactly what the
// uninterrupted run would have written.
void truncate_log(const fs::path& path, std::uint64_t step) {
  std::string kept(kTrainingLogHeader);
  kept += '\n';
  if (fs::exists(path)) {
    const auto rows = csv::read_file(path);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].empty()) continue;
      if (std::stoull(rows[r][0]) >= step) break;
      kept += csv::join(rows[r]) + '\n';
    }
  }
  write_file_atomic(path, kept);
}

std::optional<std::uint64_t> latest_checkpoint(const fs::path& dir, std::uint64_t total) {
  std::optional<std::uint64_t> best;
  if (!fs::exists(dir)) return best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("ckpt_step_", 0) != 0 || entry.path().extension() != ".bin") continue;
    try {
      const auto header = read_checkpoint_header(entry.path());
      if (header.step > total) continue;
      if (!best || header.step > *best) best = header.step;
    } catch (const Error&) {
      // A torn or foreign file is skipped; an older checkpoint is used instead.
    }
  }
  return best;
}

template <typename T>
PretrainResult run(const PretrainConfig& config, const CorpusShard& l1, const CorpusShard& l2,
                   const Tokenizer& tokenizer, const fs::path& dir, const PretrainHooks& hooks) {
  const auto& cur = config.curriculum;
  cur.validate();
  config.model.validate();
  if (config.model.seq_len != cur.seq_len) {
    throw ConfigError("model seq_len (" + std::to_string(config.model.seq_len) + ") differs from curriculum seq_len (" +
                      std::to_string(cur.seq_len) + ")");
  }
  if (config.model.vocab_size != tokenizer.vocab_size()) {
    throw ConfigError("model vocab_size " + std::to_string(config.model.vocab_size) + " differs from the tokenizer's " +
                      std::to_string(tokenizer.vocab_size()));
  }
  const auto schedule = config.checkpoints.steps(cur);
  const std::set<std::uint64_t> wanted(schedule.begin(), schedule.end());
  fs::create_directories(dir);
  const std::string fingerprint = tokenizer.fingerprint();

  PackedStream l1_stream(l1, tokenizer, cur.seq_len, derive_seed(config.data_seed, "stream-l1"));
  const bool needs_l2 = cur.phase1_mix > 0.0 || (cur.phase2_mix > 0.0 && cur.phase_boundary < cur.total_steps);
  std::optional<PackedStream> l2_stream;
  if (needs_l2) l2_stream.emplace(l2, tokenizer, cur.seq_len, derive_seed(config.data_seed, "stream-l2"));

  Checkpoint<T> state;
  PretrainResult result;
  const fs::path log_path = dir / "training_log.csv";
  if (const auto resume = latest_checkpoint(dir, cur.total_steps)) {
    state = load_checkpoint<T>(dir / checkpoint_filename(*resume), fingerprint);
    if (!(state.params.config == config.model)) {
      throw ConfigError("checkpoint in '" + dir.string() + "' was trained with a different model config");
    }
    if (state.optimizer.m.empty()) throw DataError("newest checkpoint carries no optimizer state; cannot resume");
    state.optimizer.config = config.adam;
    l1_stream.restore(state.l1_stream);
    if (l2_stream) l2_stream->restore(state.l2_stream);
    result.resumed_from = state.step;
  } else {
    state.params = init_parameters<T>(config.model);
    state.optimizer = init_optimizer(state.params, config.adam);
    state.tokenizer_fingerprint = fingerprint;
  }
  truncate_log(log_path, state.step);
  std::ofstream log(log_path, std::ios::app | std::ios::binary);
  if (!log) throw DataError("cannot append to '" + log_path.string() + "'");

  auto save = [&](std::uint64_t step) {
    state.step = step;
    state.l1_stream = l1_stream.state();
    state.l2_stream = l2_stream ? l2_stream->state() : PackedStream::State{};
    log.flush();
    save_checkpoint(state, dir / checkpoint_filename(step));
  };

  const std::uint64_t stop = std::min(cur.total_steps, hooks.stop_at.value_or(cur.total_steps));
  if (state.step == 0 && wanted.count(0) && !fs::exists(dir / checkpoint_filename(0))) save(0);
  std::vector<TokenSequence> batch;
  for (std::uint64_t step = state.step; step < stop; ++step) {
    if (hooks.interrupted && hooks.interrupted()) {
      save(step);
      throw InterruptedError("interrupted at step " + std::to_string(step) + "; checkpoint written, rerun to resume");
    }
    const auto plan = plan_batch(step, cur);
    batch.clear();
    for (std::uint32_t k = 0; k < plan.l1_sequences; ++k) batch.push_back(l1_stream.next());
    for (std::uint32_t k = 0; k < plan.l2_sequences; ++k) batch.push_back(l2_stream->next());
    const auto r = train_step(state.params, state.optimizer, std::span<const TokenSequence>(batch));
    log << log_row(step, r, tokens_seen(step + 1, cur));
    if (hooks.progress) hooks.progress(step + 1, r.loss);
    if (wanted.count(step + 1) || step + 1 == stop) save(step + 1);
  }
  result.completed_steps = std::max(stop, state.step);
  for (auto s : schedule) {
    if (fs::exists(dir / checkpoint_filename(s))) result.checkpoints.push_back(dir / checkpoint_filename(s));
  }
  return result;
}

}  // namespace

PretrainResult pretrain(const PretrainConfig& config, const CorpusShard& l1, const CorpusShard& l2,
                        const Tokenizer& tokenizer, const fs::path& dir, const PretrainHooks& hooks) {
  if (config.dtype == DType::float64) return run<double>(config, l1, l2, tokenizer, dir, hooks);
  return run<float>(config, l1, l2, tokenizer, dir, hooks);
}

}  // namespace xlp
