#include <atomic>
#include <set>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "clvstack/core.hpp"
#include "clvstack/csv.hpp"
#include "clvstack/money.hpp"
#include "clvstack/parallel.hpp"
#include "clvstack/timestamp.hpp"

using namespace clvstack;

TEST(Money, ParsesTwoDecimalPrices) {
  EXPECT_EQ(Money::parse("6.95")->micros(), 6'950'000);
  EXPECT_EQ(Money::parse(" 12 ")->micros(), 12'000'000);
  EXPECT_EQ(Money::parse(".5")->micros(), 500'000);
  EXPECT_EQ(Money::parse("-1.25")->micros(), -1'250'000);
  EXPECT_EQ(Money::parse("0.0000005")->micros(), 1);  // half rounds away from zero
  EXPECT_FALSE(Money::parse(""));
  EXPECT_FALSE(Money::parse("1.2.3"));
  EXPECT_FALSE(Money::parse("abc"));
  EXPECT_FALSE(Money::parse("."));
}

TEST(Money, ExactProductAndPrinting) {
  const auto price = *Money::parse("6.95");
  EXPECT_EQ(price.times(12).to_string(), "83.40");
  EXPECT_EQ(Money::from_micros(1'234'500).to_string(), "1.2345");
  EXPECT_EQ(Money::from_units(-3).to_string(), "-3.00");
  // 0.1 summed ten times is exactly 1 in scaled integers.
  Money sum;
  for (int i = 0; i < 10; ++i) sum += *Money::parse("0.1");
  EXPECT_EQ(sum, Money::from_units(1));
}

TEST(Money, OverflowIsAnError) {
  const auto big = Money::from_micros(std::numeric_limits<std::int64_t>::max() / 2);
  EXPECT_THROW(big.times(3), InputError);
}

TEST(Timestamp, ParsesDayFirstAndIso) {
  const auto expected = Timestamp::from_civil(2009, 12, 1, 7, 45);
  ASSERT_TRUE(expected);
  EXPECT_EQ(parse_timestamp("01-12-2009 07:45"), expected);
  EXPECT_EQ(parse_timestamp("1-12-2009 7:45"), expected);
  EXPECT_EQ(parse_timestamp("2009-12-01 07:45:00"), expected);
  EXPECT_EQ(parse_timestamp("2009-12-01T07:45"), expected);
  EXPECT_EQ(parse_timestamp("2009-12-01"), Timestamp::from_civil(2009, 12, 1));
  EXPECT_EQ(expected->to_string(), "2009-12-01 07:45");
}

TEST(Timestamp, RejectsImpossibleValues) {
  EXPECT_FALSE(parse_timestamp("2009-13-45 99:99"));
  EXPECT_FALSE(parse_timestamp("31-02-2010 10:00"));
  EXPECT_FALSE(parse_timestamp("not a date"));
  EXPECT_FALSE(parse_timestamp(""));
}

TEST(Timestamp, FlooredDayDifference) {
  const auto a = *Timestamp::from_civil(2010, 1, 1, 23, 59);
  const auto b = *Timestamp::from_civil(2010, 1, 2, 0, 1);
  EXPECT_EQ(floor_days_between(a, b), 0);
  EXPECT_EQ(floor_days_between(a, a.plus_days(5)), 5);
  EXPECT_EQ(floor_days_between(a, a.plus_days(5).plus_minutes(-1)), 4);
  EXPECT_EQ(a.start_of_day(), *Timestamp::from_civil(2010, 1, 1));
  // Before the epoch the floor still goes toward minus infinity.
  EXPECT_EQ(Timestamp::from_minutes(-1).start_of_day().minutes(), -1440);
}

TEST(Csv, QuotedFieldsAndBom) {
  std::istringstream in("\xEF\xBB\xBF" "a,b,c\r\n1,\"x, \"\"y\"\"\",\n\"multi\nline\",2,3");
  csv::Reader reader(in);
  std::vector<std::string> f;
  ASSERT_TRUE(reader.next(f));
  EXPECT_EQ(f, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_TRUE(reader.next(f));
  EXPECT_EQ(f, (std::vector<std::string>{"1", "x, \"y\"", ""}));
  ASSERT_TRUE(reader.next(f));
  EXPECT_EQ(f, (std::vector<std::string>{"multi\nline", "2", "3"}));
  EXPECT_FALSE(reader.next(f));
}

TEST(Csv, QuoteRoundTrip) {
  std::ostringstream out;
  csv::write_row(out, {"plain", "with,comma", "with\"quote"});
  std::istringstream in(out.str());
  csv::Reader reader(in);
  std::vector<std::string> f;
  ASSERT_TRUE(reader.next(f));
  EXPECT_EQ(f, (std::vector<std::string>{"plain", "with,comma", "with\"quote"}));
}

TEST(Rng, FixedStreamAndBoundedDraws) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng r(3);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = r.below(5);
    ASSERT_LT(v, 5u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, SampleWithoutReplacementIsSortedAndDistinct) {
  Rng r(11);
  const auto s = r.sample_without_replacement(50, 20);
  ASSERT_EQ(s.size(), 20u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 20u);
  EXPECT_EQ(r.sample_without_replacement(3, 10).size(), 3u);
}

TEST(Seeds, MixingSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(0, 1));
  EXPECT_EQ(fnv1a(""), 0xCBF29CE484222325ULL);
  EXPECT_NE(fnv1a("RandomForest"), fnv1a("XGBoost"));
}

TEST(Matrix, RowsColumnsAndStacking) {
  const auto m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.column(1), (std::vector<double>{2, 4, 6}));
  const std::vector<std::size_t> pick{2, 0};
  EXPECT_EQ(m.select_rows(pick), Matrix::from_rows({{5, 6}, {1, 2}}));
  EXPECT_EQ(m.hstack(Matrix::from_rows({{7}, {8}, {9}})), Matrix::from_rows({{1, 2, 7}, {3, 4, 8}, {5, 6, 9}}));
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), InputError);
  EXPECT_THROW(m.hstack(Matrix(2, 1)), InputError);
}

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
  for (std::size_t threads : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> seen(97);
    parallel_for(seen.size(), threads, [&](std::size_t i) { seen[i]++; });
    for (auto& s : seen) EXPECT_EQ(s.load(), 1);
  }
  EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) {
                 if (i == 6) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
