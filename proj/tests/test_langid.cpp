#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "xlprime/corpus.hpp"
#include "xlprime/error.hpp"
#include "xlprime/langid.hpp"
#include "xlprime/synthetic.hpp"

using namespace xlp;

namespace {

CorpusShard data_shard(const char* file, Language lang) {
  return ingest(std::filesystem::path(XLPRIME_TEST_DATA) / file, lang);
}

CorpusShard slice(const CorpusShard& s, std::size_t from, std::size_t to) {
  CorpusShard out;
  out.language = s.language;
  out.documents.assign(s.documents.begin() + static_cast<std::ptrdiff_t>(from),
                       s.documents.begin() + static_cast<std::ptrdiff_t>(to));
  return out;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TEST(LangId, DisjointAlphabets) {
  CorpusShard a{Language::l1, {"aaaa"}, {}};
  CorpusShard b{Language::l2, {"bbbb"}, {}};
  const auto model = LangIdModel::train(a, b, 1);
  EXPECT_GT(model.log_odds("aa", Language::l1), 0.0);
  EXPECT_LT(model.log_odds("aa", Language::l2), 0.0);
}

TEST(LangId, IdenticalCorporaGiveZeroOdds) {
  CorpusShard a{Language::l1, {"de kok geeft een hoed"}, {}};
  CorpusShard b{Language::l2, {"de kok geeft een hoed"}, {}};
  const auto model = LangIdModel::train(a, b);
  EXPECT_EQ(model.log_odds("the chef gives a hat", Language::l1), 0.0);
}

TEST(LangId, TablesAreProperDistributions) {
  const auto model = LangIdModel::train(data_shard("dutch.txt", Language::l1),
                                        data_shard("english.txt", Language::l2));
  EXPECT_NEAR(log_sum_exp(model.table(Language::l1)), 0.0, 1e-9);
  EXPECT_NEAR(log_sum_exp(model.table(Language::l2)), 0.0, 1e-9);
}

TEST(LangId, HeldOutAccuracyOnDutchAndEnglish) {
  const auto nl = data_shard("dutch.txt", Language::l1);
  const auto en = data_shard("english.txt", Language::l2);
  const auto model = LangIdModel::train(slice(nl, 0, 100), slice(en, 0, 100), 2);
  int correct = 0, total = 0;
  for (std::size_t i = 100; i < nl.documents.size(); ++i, ++total) {
    correct += model.log_odds(nl.documents[i], Language::l1) > 0;
  }
  for (std::size_t i = 100; i < en.documents.size(); ++i, ++total) {
    correct += model.log_odds(en.documents[i], Language::l2) > 0;
  }
  EXPECT_GT(static_cast<double>(correct) / total, 0.9);
}

TEST(LangId, OrderZeroIsRejected) {
  CorpusShard a{Language::l1, {"x"}, {}};
  CorpusShard b{Language::l2, {"y"}, {}};
  EXPECT_THROW(LangIdModel::train(a, b, 0), ConfigError);
  EXPECT_THROW(LangIdModel::train(a, CorpusShard{Language::l2, {}, {}}), DataError);
}

class Contamination : public ::testing::Test {
 protected:
  void SetUp() override {
    GrammarConfig g;
    pair_ = generate_synthetic_pair(g, 1100, 21);
    model_ = LangIdModel::train(slice(pair_.l1, 1010, 1100), slice(pair_.l2, 1010, 1100));
  }
  SyntheticPair pair_;
  std::optional<LangIdModel> model_;
};

TEST_F(Contamination, TenInjectedLinesInAThousand) {
  CorpusShard shard = slice(pair_.l1, 0, 1000);
  for (int k = 0; k < 10; ++k) {
    shard.documents.insert(shard.documents.begin() + 100 * k + 7, pair_.l2.documents[static_cast<std::size_t>(k)]);
  }
  const auto report = scan_contamination(shard, *model_);
  EXPECT_EQ(report.scanned_lines, 1010u);
  EXPECT_GE(report.flagged_fraction, 0.008);
  EXPECT_LE(report.flagged_fraction, 0.012);
  EXPECT_DOUBLE_EQ(report.flagged_fraction, static_cast<double>(report.flagged_lines) / report.scanned_lines);
}

TEST_F(Contamination, PureShardIsClean) {
  const auto report = scan_contamination(slice(pair_.l1, 0, 1000), *model_);
  EXPECT_LE(report.flagged_fraction, 0.01);
}

TEST_F(Contamination, MonotoneInThreshold) {
  CorpusShard shard = slice(pair_.l1, 0, 300);
  for (int k = 0; k < 30; ++k) shard.documents.push_back(pair_.l2.documents[static_cast<std::size_t>(k)]);
  double previous = 1.0;
  for (double t : {-50.0, -5.0, 0.0, 5.0, 20.0, 80.0, std::numeric_limits<double>::infinity()}) {
    const auto f = scan_contamination(shard, *model_, t).flagged_fraction;
    EXPECT_LE(f, previous);
    previous = f;
  }
  EXPECT_EQ(previous, 0.0);
}

TEST_F(Contamination, CsvHeader) {
  const auto report = scan_contamination(slice(pair_.l1, 0, 3), *model_);
  EXPECT_EQ(report.to_csv().substr(0, 29), "line_index,log_odds,flagged\n0");
}
