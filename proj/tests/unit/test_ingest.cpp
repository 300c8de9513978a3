#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "mmgn/ingest.hpp"
#include "test_support.hpp"

using namespace mmgn;
using testing_support::Draw;
using testing_support::TempDir;

namespace {

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

}  // namespace

TEST(ReadRatings, DenseIdsAndTimestamps) {
  TempDir dir;
  spit(dir / "r.dat", "1::10::5::978300760\n2::10::3::978302109\n");
  const auto t = read_ratings(dir / "r.dat");
  EXPECT_EQ(t.users.size(), 2);
  EXPECT_EQ(t.items.size(), 1);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].user, 1);
  EXPECT_EQ(t.rows[1].item, 0);
  EXPECT_EQ(t.rows[1].rating, 3.0);
  EXPECT_EQ(t.rows[0].timestamp, 978300760);
  EXPECT_EQ(t.items.external(0), 10);
  EXPECT_TRUE(t.warnings.empty());
}

TEST(ReadRatings, CustomDelimiterWithoutTimestamp) {
  TempDir dir;
  spit(dir / "r.csv", "3,7,4.5\n\n9,7,1\n");
  RatingsReadOptions opts;
  opts.delimiter = ",";
  const auto t = read_ratings(dir / "r.csv", RatingsFormat::delimited, opts);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_FALSE(t.rows[0].timestamp.has_value());
  EXPECT_EQ(t.rows[0].rating, 4.5);
}

TEST(ReadRatings, DuplicateKeepsLast) {
  TempDir dir;
  spit(dir / "r.dat", "1::1::5\n1::2::2\n1::1::1\n");
  const auto t = read_ratings(dir / "r.dat");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].rating, 1.0);
  ASSERT_EQ(t.warnings.size(), 1u);
  EXPECT_NE(t.warnings[0].find(":3:"), std::string::npos);
}

TEST(ReadRatings, OutOfScaleWarnsButKeeps) {
  TempDir dir;
  spit(dir / "r.dat", "1::1::6\n2::1::3\n");
  RatingsReadOptions opts;
  opts.scale = std::pair{1.0, 5.0};
  const auto t = read_ratings(dir / "r.dat", RatingsFormat::delimited, opts);
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].rating, 6.0);
  EXPECT_EQ(t.warnings.size(), 1u);
}

TEST(ReadRatings, MalformedLinesNameTheLine) {
  TempDir dir;
  for (const std::string bad : {"1::1::5\n1::x::2\n", "1::1::5\n1::2\n", "1::1::5\n0::2::3\n", "1::1::5\n1::2::nan\n"}) {
    spit(dir / "r.dat", bad);
    try {
      read_ratings(dir / "r.dat");
      ADD_FAILURE() << bad;
    } catch (const io::FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
  }
  spit(dir / "empty.dat", "\n\n");
  EXPECT_THROW(read_ratings(dir / "empty.dat"), io::FormatError);
}

TEST(ReadRatings, RowCountMatchesLineCount) {
  TempDir dir;
  Draw d(91);
  std::set<std::pair<int, int>> used;
  {
    std::ofstream out(dir / "r.dat");
    while (used.size() < 3000) {
      const int u = d.integer(1, 400), i = d.integer(1, 300);
      if (!used.insert({u, i}).second) continue;
      out << u << "::" << i << "::" << d.integer(1, 5) << "::" << 970000000 + d.integer(0, 999999) << '\n';
    }
  }
  const auto t = read_ratings(dir / "r.dat");
  EXPECT_EQ(t.rows.size(), count_lines(dir / "r.dat"));
  std::set<int> us, is;
  for (const auto& [u, i] : used) {
    us.insert(u);
    is.insert(i);
  }
  EXPECT_EQ(static_cast<std::size_t>(t.users.size()), us.size());
  EXPECT_EQ(static_cast<std::size_t>(t.items.size()), is.size());
}

TEST(IdDictionary, Bijection) {
  IdDictionary ids;
  const std::vector<long long> ext = {42, 7, 42, 1000000007, 7, 3};
  for (long long e : ext) ids.intern(e);
  ASSERT_EQ(ids.size(), 4);
  for (int k = 0; k < ids.size(); ++k) EXPECT_EQ(ids.find(ids.external(k)), k);
  EXPECT_EQ(ids.intern(42), 0);
  EXPECT_FALSE(ids.find(8).has_value());
}

namespace {

RatingsTable table_of(const std::vector<std::tuple<long long, long long, double>>& rows) {
  RatingsTable t;
  for (const auto& [u, i, r] : rows) t.rows.push_back({t.users.intern(u), t.items.intern(i), r, std::nullopt});
  return t;
}

}  // namespace

TEST(Binarize, AboveMeanIsPositive) {
  const auto b = binarize(table_of({{1, 1, 1.0}, {2, 1, 5.0}}));
  EXPECT_EQ(b.average, 3.0);
  ASSERT_EQ(b.obs.size(), 2u);
  EXPECT_EQ(b.obs.label(0), -1);
  EXPECT_EQ(b.obs.label(1), 1);
  EXPECT_EQ(b.ratings, (std::vector<double>{1.0, 5.0}));
}

TEST(Binarize, EqualToMeanIsNegative) {
  const auto b = binarize(table_of({{1, 1, 4.0}, {2, 1, 4.0}, {1, 2, 4.0}}));
  b.obs.for_each([](std::size_t, int, int, int y) { EXPECT_EQ(y, -1); });
}

TEST(Binarize, RowOrderInvariant) {
  std::vector<std::tuple<long long, long long, double>> rows = {
      {1, 1, 3.0}, {2, 2, 4.0}, {3, 1, 1.0}, {1, 3, 5.0}, {2, 1, 2.0}};
  const auto a = binarize(table_of(rows));
  // reversing keeps the id assignment order stable by interning ids up front
  RatingsTable t;
  for (long long u : {1, 2, 3}) t.users.intern(u);
  for (long long i : {1, 2, 3}) t.items.intern(i);
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    const auto& [u, i, r] = *it;
    t.rows.push_back({*t.users.find(u), *t.items.find(i), r, std::nullopt});
  }
  const auto b = binarize(t);
  EXPECT_EQ(a.obs, b.obs);
  EXPECT_EQ(a.ratings, b.ratings);
  EXPECT_EQ(a.average, b.average);
}

TEST(HoldoutSplit, SizesAndDisjointness) {
  Draw d(92);
  const auto inst = testing_support::random_instance(d, 60, 50, 1, 1500, 1.0);
  const auto s = holdout_split(inst.obs, 0.05, 17);
  EXPECT_EQ(s.validation.size(), split_count(inst.obs.size(), 0.05));
  EXPECT_EQ(s.validation.size(), static_cast<std::size_t>(std::lround(0.05 * static_cast<double>(inst.obs.size()))));
  EXPECT_EQ(s.train.size() + s.validation.size(), inst.obs.size());
  std::vector<std::size_t> all = s.train_positions;
  all.insert(all.end(), s.validation_positions.begin(), s.validation_positions.end());
  std::sort(all.begin(), all.end());
  for (std::size_t k = 0; k < all.size(); ++k) EXPECT_EQ(all[k], k);
}

TEST(HoldoutSplit, ComplementSwapsRoles) {
  Draw d(93);
  const auto inst = testing_support::random_instance(d, 40, 40, 1, 1000, 1.0);
  const auto a = holdout_split(inst.obs, 0.05, 5);
  const auto b = holdout_split(inst.obs, 0.95, 5);
  EXPECT_EQ(a.validation_positions, b.train_positions);
  EXPECT_EQ(a.train_positions, b.validation_positions);
  EXPECT_EQ(a.validation, holdout_split(inst.obs, 0.05, 5).validation);
}

TEST(Gather, FollowsPositions) {
  EXPECT_EQ(gather({1.0, 2.0, 3.0}, {2, 0}), (std::vector<double>{3.0, 1.0}));
  EXPECT_THROW(gather({1.0}, {1}), std::out_of_range);
}
