#include <gtest/gtest.h>

#include "test_support.hpp"
#include "xlprime/corpus.hpp"
#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/tokenizer.hpp"

using namespace xlp;

namespace {

CurriculumSchedule million_step_schedule() {
  CurriculumSchedule s;
  s.total_steps = 1'000'000;
  s.phase_boundary = 500'000;
  s.phase1_mix = 0.0;
  s.phase2_mix = 0.5;
  s.batch_size = 128;
  s.seq_len = 128;
  return s;
}

// One token per byte: a single merge that never fires on the test documents.
Tokenizer byte_tokenizer() { return Tokenizer::train_on_text("qz qz", 258, 0); }

}  // namespace

TEST(Ingest, DropsBlankLinesAndKeepsOrder) {
  const auto shard = ingest_text("de kok geeft een hoed aan de zwemmer\n\nx\n", Language::l1);
  ASSERT_EQ(shard.documents.size(), 2u);
  EXPECT_EQ(shard.documents[1], "x");
}

TEST(Ingest, ThousandLines) {
  std::string text;
  for (int i = 0; i < 1000; ++i) text += "regel " + std::to_string(i) + "\n";
  fixture::TempDir dir;
  write_file_atomic(dir / "c.txt", text);
  EXPECT_EQ(ingest(dir / "c.txt", Language::l2).documents.size(), 1000u);
}

TEST(Ingest, InvalidUtf8NamesOffset) {
  try {
    ingest_text(std::string("ok\nab\xfe\n", 7), Language::l1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos) << e.what();
  }
}

TEST(Ingest, EmptyCorpusIsAnError) { EXPECT_THROW(ingest_text("\n  \n", Language::l1), DataError); }

TEST(Curriculum, BatchPlansAroundTheBoundary) {
  const auto s = million_step_schedule();
  const auto before = plan_batch(499'999, s);
  EXPECT_EQ(before.l1_sequences, 128u);
  EXPECT_EQ(before.l2_sequences, 0u);
  const auto at = plan_batch(500'000, s);
  EXPECT_EQ(at.l1_sequences, 64u);
  EXPECT_EQ(at.l2_sequences, 64u);
  EXPECT_THROW(plan_batch(1'000'000, s), ConfigError);
}

TEST(Curriculum, DegenerateMixGivesIdenticalPlans) {
  auto s = million_step_schedule();
  s.phase2_mix = 0.0;
  EXPECT_EQ(plan_batch(10, s).l2_sequences, plan_batch(900'000, s).l2_sequences);
}

TEST(Curriculum, PlansAlwaysFillTheBatch) {
  CurriculumSchedule s = million_step_schedule();
  s.batch_size = 8;
  s.phase1_mix = 0.125;
  s.phase2_mix = 0.75;
  for (std::uint64_t step : {0ull, 499'999ull, 500'000ull, 999'999ull}) {
    const auto p = plan_batch(step, s);
    EXPECT_EQ(p.l1_sequences + p.l2_sequences, 8u);
  }
}

TEST(Curriculum, RejectsNonIntegerShares) {
  auto s = million_step_schedule();
  s.batch_size = 3;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(TokensSeen, EnglishExposureAnchor) {
  const auto s = million_step_schedule();
  EXPECT_EQ(tokens_seen(500'120, s).l2, 983'040u);
  EXPECT_EQ(tokens_seen(0, s).l1, 0u);
  EXPECT_EQ(tokens_seen(0, s).l2, 0u);
  EXPECT_EQ(tokens_seen(500'000, s).l2, 0u);
  EXPECT_EQ(tokens_seen(500'000, s).l1, 500'000ull * 128 * 128);
}

TEST(TokensSeen, MatchesStepwiseSumAndIsMonotone) {
  CurriculumSchedule s;
  s.total_steps = 300;
  s.phase_boundary = 120;
  s.phase1_mix = 0.25;
  s.phase2_mix = 0.5;
  s.batch_size = 8;
  s.seq_len = 16;
  TokenCounts acc;
  for (std::uint64_t step = 0; step <= s.total_steps; ++step) {
    const auto seen = tokens_seen(step, s);
    EXPECT_EQ(seen.l1, acc.l1);
    EXPECT_EQ(seen.l2, acc.l2);
    if (step == s.total_steps) break;
    const auto p = plan_batch(step, s);
    acc.l1 += std::uint64_t{p.l1_sequences} * s.seq_len;
    acc.l2 += std::uint64_t{p.l2_sequences} * s.seq_len;
  }
  EXPECT_THROW(tokens_seen(301, s), ConfigError);
}

TEST(Packing, DropsTheFinalPartialBlock) {
  const auto tok = byte_tokenizer();
  CorpusShard shard;
  for (int d = 0; d < 10; ++d) shard.documents.push_back(std::string(99, static_cast<char>('a' + d)));
  const auto seqs = pack_sequences(shard, tok, 128, 1);
  EXPECT_EQ(seqs.size(), 7u);
  for (const auto& s : seqs) EXPECT_EQ(s.size(), 128u);
}

TEST(Packing, SeedDeterminesOrder) {
  const auto tok = byte_tokenizer();
  CorpusShard shard;
  for (int d = 0; d < 40; ++d) shard.documents.push_back("doc " + std::to_string(d) + " text");
  EXPECT_EQ(pack_sequences(shard, tok, 16, 5), pack_sequences(shard, tok, 16, 5));
  EXPECT_NE(pack_sequences(shard, tok, 16, 5), pack_sequences(shard, tok, 16, 6));
}

TEST(Packing, SeparatorsFollowEveryDocument) {
  const auto tok = byte_tokenizer();
  CorpusShard shard;
  shard.documents = {"abc", "de"};
  const auto seqs = pack_sequences(shard, tok, 7, 0);
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(std::count(seqs[0].begin(), seqs[0].end(), tok.end_of_document()), 2);
}

TEST(Packing, TooSmallShardIsAnError) {
  const auto tok = byte_tokenizer();
  CorpusShard shard;
  shard.documents = {"tiny"};
  EXPECT_THROW(pack_sequences(shard, tok, 128, 0), DataError);
}

TEST(PackedStream, RestoredStateContinuesIdentically) {
  const auto tok = byte_tokenizer();
  CorpusShard shard;
  for (int d = 0; d < 12; ++d) shard.documents.push_back("document number " + std::to_string(d));
  PackedStream a(shard, tok, 10, 9);
  std::vector<TokenSequence> first;
  for (int i = 0; i < 50; ++i) first.push_back(a.next());  // crosses several epochs
  PackedStream b(shard, tok, 10, 9);
  for (int i = 0; i < 23; ++i) b.next();
  PackedStream c(shard, tok, 10, 9);
  c.restore(b.state());
  for (int i = 23; i < 50; ++i) EXPECT_EQ(c.next(), first[static_cast<std::size_t>(i)]);
}
