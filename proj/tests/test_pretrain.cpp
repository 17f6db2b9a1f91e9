#include <gtest/gtest.h>

#include "test_support.hpp"
#include "xlprime/checkpoint.hpp"
#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/pretrain.hpp"
#include "xlprime/synthetic.hpp"

using namespace xlp;

namespace {

struct Fixture {
  SyntheticPair pair;
  std::optional<Tokenizer> tok;
  PretrainConfig config;

  Fixture() {
    GrammarConfig g;
    g.verbs = 4;
    g.nouns = 6;
    pair = generate_synthetic_pair(g, 60, 2);
    std::string l1, l2;
    for (const auto& d : pair.l1.documents) l1 += d + "\n";
    for (const auto& d : pair.l2.documents) l2 += d + "\n";
    tok = Tokenizer::train(l1, l2, {}, 280, 2);
    config.model = fixture::tiny_config();
    config.model.vocab_size = tok->vocab_size();
    config.model.seq_len = 16;
    config.model.dropout = 0.1;
    config.curriculum.total_steps = 30;
    config.curriculum.phase_boundary = 12;
    config.curriculum.batch_size = 2;
    config.curriculum.seq_len = 16;
    config.checkpoints.coarse_interval = 10;
    config.checkpoints.fine_offsets = {0, 3, 6};
    config.adam.warmup_steps = 5;
    config.data_seed = 4;
  }
};

// Compares two files and names the first differing byte instead of dumping binary content.
::testing::AssertionResult same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  const auto x = read_file(a), y = read_file(b);
  if (x == y) return ::testing::AssertionSuccess();
  std::size_t i = 0;
  while (i < x.size() && i < y.size() && x[i] == y[i]) ++i;
  return ::testing::AssertionFailure() << a.filename() << " differs at byte " << i << " (sizes " << x.size() << ", "
                                       << y.size() << "), context: " << x.substr(i > 40 ? i - 40 : 0, 80);
}

}  // namespace

TEST(CheckpointSchedule, CoarseFineAndFinal) {
  CurriculumSchedule cur;
  cur.total_steps = 95;
  cur.phase_boundary = 40;
  CheckpointSchedule s;
  s.coarse_interval = 30;
  s.fine_offsets = {0, 5, 10};
  EXPECT_EQ(s.steps(cur), (std::vector<std::uint64_t>{0, 30, 40, 45, 50, 60, 90, 95}));
  s.fine_offsets = {60};
  EXPECT_THROW(s.steps(cur), ConfigError);
}

TEST(CheckpointSchedule, DefaultFineOffsetsScaleWithRunLength) {
  const auto million = default_fine_offsets(1'000'000);
  ASSERT_EQ(million.size(), 21u);
  EXPECT_EQ(million[1], 10u);
  EXPECT_EQ(million.back(), 200u);
  const auto small = default_fine_offsets(20'000);
  EXPECT_EQ(small[1], 1u);
  EXPECT_EQ(small.back(), 20u);
}

TEST(Pretrain, WritesScheduledCheckpointsAndLog) {
  Fixture f;
  fixture::TempDir dir;
  const auto r = pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, dir.path());
  EXPECT_EQ(r.completed_steps, 30u);
  std::vector<std::uint64_t> steps;
  for (const auto& p : r.checkpoints) steps.push_back(read_checkpoint_header(p).step);
  EXPECT_EQ(steps, (std::vector<std::uint64_t>{0, 10, 12, 15, 18, 20, 30}));
  const auto log = read_file(dir / "training_log.csv");
  EXPECT_EQ(log.substr(0, kTrainingLogHeader.size()), kTrainingLogHeader);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 31);
  // Step 11 is the last L1-only step: 12 steps x 2 sequences x 16 tokens of L1, none of L2.
  EXPECT_NE(log.find("\n11,"), std::string::npos);
  EXPECT_NE(log.find(",384,0\n12,"), std::string::npos);
}

TEST(Pretrain, ResumeIsBitIdentical) {
  Fixture f;
  fixture::TempDir straight, split;
  pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, straight.path());
  PretrainHooks stop;
  stop.stop_at = 17;
  const auto first = pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, split.path(), stop);
  EXPECT_EQ(first.completed_steps, 17u);
  const auto second = pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, split.path());
  EXPECT_EQ(second.resumed_from, 17u);
  EXPECT_TRUE(same_bytes(straight / checkpoint_filename(30), split / checkpoint_filename(30)));
  EXPECT_TRUE(same_bytes(straight / "training_log.csv", split / "training_log.csv"));
}

TEST(Pretrain, InterruptSavesAndResumes) {
  Fixture f;
  fixture::TempDir straight, split;
  pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, straight.path());
  int polls = 0;
  PretrainHooks hooks;
  hooks.interrupted = [&] { return ++polls > 8; };
  EXPECT_THROW(pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, split.path(), hooks), InterruptedError);
  EXPECT_EQ(pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, split.path()).resumed_from, 8u);
  EXPECT_TRUE(same_bytes(straight / checkpoint_filename(30), split / checkpoint_filename(30)));
}

TEST(Pretrain, RefusesForeignCheckpoints) {
  Fixture f;
  fixture::TempDir dir;
  PretrainHooks stop;
  stop.stop_at = 5;
  pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, dir.path(), stop);
  auto other = f.config;
  other.model.d_model = 16;
  EXPECT_THROW(pretrain(other, f.pair.l1, f.pair.l2, *f.tok, dir.path()), ConfigError);
}

TEST(Pretrain, VocabMismatchIsAConfigError) {
  Fixture f;
  f.config.model.vocab_size += 1;
  fixture::TempDir dir;
  EXPECT_THROW(pretrain(f.config, f.pair.l1, f.pair.l2, *f.tok, dir.path()), ConfigError);
}
