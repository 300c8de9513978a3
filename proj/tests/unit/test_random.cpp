#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "mmgn/random.hpp"
#include "mmgn/summation.hpp"

using mmgn::Rng;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

template <class F>
Moments moments(int n, F&& draw) {
  long double s = 0.0L, s2 = 0.0L;
  for (int k = 0; k < n; ++k) {
    const long double x = draw();
    s += x;
    s2 += x * x;
  }
  const long double mean = s / n;
  return {static_cast<double>(mean), static_cast<double>(s2 / n - mean * mean)};
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int k = 0; k < 1000; ++k) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t g = 0; g < 50; ++g)
    for (std::uint64_t r = 0; r < 50; ++r) seen.insert(mmgn::derive_seed(7, g, r));
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_EQ(mmgn::derive_seed(7, 3, 4), mmgn::derive_seed(7, 3, 4));
  EXPECT_NE(mmgn::derive_seed(7, 3, 4), mmgn::derive_seed(7, 4, 3));
}

TEST(Rng, UniformRangeAndMoments) {
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  const Moments m = moments(200000, [&] { return rng.uniform(-0.5, 0.5); });
  EXPECT_NEAR(m.mean, 0.0, 4.0 * std::sqrt(1.0 / 12.0 / 200000));
  EXPECT_NEAR(m.var, 1.0 / 12.0, 2e-3);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int k = 0; k < n; ++k) {
    const auto x = rng.below(7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  // chi-square with 6 degrees of freedom; 22.46 is the 0.1% critical value
  double chi = 0.0;
  for (int c : counts) chi += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi, 22.46);
  EXPECT_THROW(rng.below(0), std::invalid_argument);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  const Moments m = moments(400000, [&] { return rng.normal(); });
  EXPECT_NEAR(m.mean, 0.0, 4.0 / std::sqrt(400000.0));
  EXPECT_NEAR(m.var, 1.0, 0.01);
}

TEST(Rng, GammaMoments) {
  for (double shape : {0.5, 1.0, 2.5, 5.0}) {
    Rng rng(4);
    const Moments m = moments(200000, [&] { return rng.gamma(shape); });
    EXPECT_NEAR(m.mean, shape, 5.0 * std::sqrt(shape / 200000.0)) << shape;
    EXPECT_NEAR(m.var / shape, 1.0, 0.03) << shape;
  }
}

TEST(Rng, ChiSquareMean) {
  Rng rng(5);
  const Moments m = moments(200000, [&] { return rng.chi_square(4.0); });
  EXPECT_NEAR(m.mean, 4.0, 0.05);
  EXPECT_NEAR(m.var, 8.0, 0.3);
}

TEST(Rng, StudentTVariance) {
  // var = nu / (nu - 2)
  for (double nu : {5.0, 10.0}) {
    Rng rng(6);
    const Moments m = moments(400000, [&] { return rng.student_t(nu); });
    EXPECT_NEAR(m.mean, 0.0, 0.01) << nu;
    EXPECT_NEAR(m.var, nu / (nu - 2.0), 0.05 * nu / (nu - 2.0)) << nu;
  }
}

TEST(CompensatedSum, RecoversCancellation) {
  mmgn::CompensatedSum s;
  s.add(1.0);
  for (int k = 0; k < 1000000; ++k) s.add(1e-16);
  s.add(-1.0);
  // plain summation returns 0 here: each 1e-16 is below half an ulp of 1
  EXPECT_NEAR(s.value(), 1e6 * 1e-16, 1e-19);

  mmgn::CompensatedSum t;
  t += 1e100;
  t += 1.0;
  t += -1e100;
  EXPECT_EQ(t.value(), 1.0);
}
