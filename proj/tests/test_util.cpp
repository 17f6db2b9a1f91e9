#include <charconv>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "xlprime/csv.hpp"
#include "xlprime/error.hpp"
#include "xlprime/hash.hpp"
#include "xlprime/io.hpp"
#include "xlprime/rng.hpp"
#include "xlprime/utf8.hpp"

using namespace xlp;

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, IncrementalMatchesOneShot) {
  Sha256 h;
  h.update("ab");
  h.update("c");
  EXPECT_EQ(to_hex(h.finish()), sha256_hex("abc"));
}

TEST(Hash, FileMatchesContents) {
  fixture::TempDir dir;
  write_file_atomic(dir / "f", "hello\n");
  EXPECT_EQ(sha256_file(dir / "f"), sha256_hex("hello\n"));
}

TEST(Utf8, DetectsMalformedSequences) {
  EXPECT_FALSE(utf8::first_invalid("de kok geeft één hoed").has_value());
  EXPECT_EQ(utf8::first_invalid(std::string("ab\xff", 3)), 2u);
  EXPECT_EQ(utf8::first_invalid(std::string("\xc0\xaf", 2)), 0u);          // overlong '/'
  EXPECT_EQ(utf8::first_invalid(std::string("x\xed\xa0\x80", 4)), 1u);     // surrogate
  EXPECT_EQ(utf8::first_invalid(std::string("\xe2\x82", 2)), 0u);          // truncated
}

TEST(Utf8, CountsAndSlicesCodePoints) {
  const std::string s = "één";
  EXPECT_EQ(utf8::length(s), 3u);
  EXPECT_EQ(utf8::prefix(s, 2), "éé");
  EXPECT_EQ(utf8::characters(s).size(), 3u);
}

TEST(Csv, QuotedFieldsRoundTrip) {
  const csv::Row row{"plain", "with,comma", "with \"quote\"", "two\nlines", ""};
  const auto parsed = csv::parse(csv::join(row) + "\n");
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], row);
}

TEST(Csv, AcceptsCrLfAndNoTrailingNewline) {
  const auto rows = csv::parse("a,b\r\n1,2");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][1], "2");
}

TEST(Csv, UnterminatedQuoteIsAnError) { EXPECT_THROW(csv::parse("\"abc\n"), DataError); }

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -1e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min()}) {
    const auto text = format_double(v);
    double back = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), back);
    EXPECT_EQ(back, v) << text;
  }
}

TEST(Rng, EngineMatchesStandardReference) {
  // [rand.predef]: the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489u);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ull);
}

TEST(Rng, UniformBelowStaysInRangeAndCoversIt) {
  Rng rng(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.uniform_below(7)];
  for (int h : hits) EXPECT_GT(h, 850);
}

TEST(Rng, NormalHasUnitMoments) {
  Rng rng(2);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, DerivedSeedsDependOnLabel) {
  EXPECT_EQ(derive_seed(3, "a"), derive_seed(3, "a"));
  EXPECT_NE(derive_seed(3, "a"), derive_seed(3, "b"));
  EXPECT_NE(derive_seed(3, "a"), derive_seed(4, "a"));
}
