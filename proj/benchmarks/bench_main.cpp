#include <benchmark/benchmark.h>

#include "xlprime/corpus.hpp"
#include "xlprime/design.hpp"
#include "xlprime/lmm.hpp"
#include "xlprime/model.hpp"
#include "xlprime/optimizer.hpp"
#include "xlprime/rng.hpp"
#include "xlprime/synthetic.hpp"
#include "xlprime/tokenizer.hpp"
#include "xlprime/transformer.hpp"

namespace {

xlp::ModelConfig bench_config(std::size_t vocab) {
  xlp::ModelConfig c;
  c.vocab_size = vocab;
  return c;
}

std::vector<xlp::TokenSequence> random_batch(std::size_t n, const xlp::ModelConfig& c, std::uint64_t seed) {
  xlp::Rng rng(seed);
  std::vector<xlp::TokenSequence> batch(n, xlp::TokenSequence(c.seq_len));
  for (auto& s : batch) {
    for (auto& t : s) t = static_cast<xlp::TokenId>(rng.uniform_below(c.vocab_size));
  }
  return batch;
}

void BM_Forward(benchmark::State& state) {
  const auto c = bench_config(static_cast<std::size_t>(state.range(0)));
  const auto params = xlp::init_parameters<float>(c);
  const auto batch = random_batch(1, c, 1);
  for (auto _ : state) benchmark::DoNotOptimize(xlp::forward_logprobs(params, batch[0]));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.seq_len));
}
BENCHMARK(BM_Forward)->Arg(512)->Arg(8192)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto c = bench_config(static_cast<std::size_t>(state.range(0)));
  auto params = xlp::init_parameters<float>(c);
  xlp::AdamConfig adam;
  auto opt = xlp::init_optimizer(params, adam);
  const auto batch = random_batch(static_cast<std::size_t>(state.range(1)), c, 2);
  for (auto _ : state) benchmark::DoNotOptimize(xlp::train_step(params, opt, std::span(batch)));
  state.SetItemsProcessed(state.iterations() * state.range(1) * static_cast<std::int64_t>(c.seq_len));
}
BENCHMARK(BM_TrainStep)->Args({512, 1})->Args({512, 4})->Args({8192, 1})->Unit(benchmark::kMillisecond);

void BM_BpeEncode(benchmark::State& state) {
  xlp::GrammarConfig g;
  const auto pair = xlp::generate_synthetic_pair(g, 200, 3);
  std::string l1, l2;
  for (const auto& d : pair.l1.documents) l1 += d + "\n";
  for (const auto& d : pair.l2.documents) l2 += d + "\n";
  const auto tok = xlp::Tokenizer::train(l1, l2, {}, 400, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tok.encode(l1));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(l1.size()));
}
BENCHMARK(BM_BpeEncode)->Unit(benchmark::kMillisecond);

void BM_LmmFit(benchmark::State& state) {
  // Sweep-shaped data: 21 steps x 2 primes x items.
  const int items = static_cast<int>(state.range(0));
  std::vector<xlp::PrimingMeasurement> rows;
  xlp::Rng rng(4);
  for (int s = 0; s < 21; ++s) {
    for (int i = 0; i < items; ++i) {
      for (int k = 0; k < 2; ++k) {
        xlp::PrimingMeasurement m;
        m.step = 1000 + 10 * static_cast<std::uint64_t>(s);
        m.item_id = i;
        m.prime_type = k == 0 ? xlp::PrimeType::po : xlp::PrimeType::do_;
        m.p_n_po_target = 0.5 + 0.05 * rng.normal();
        rows.push_back(m);
      }
    }
  }
  xlp::LmmSpec spec;
  spec.baseline_step = 1000;
  const auto d = xlp::build_design(rows, spec);
  for (auto _ : state) benchmark::DoNotOptimize(xlp::fit_lmm(d));
}
BENCHMARK(BM_LmmFit)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
