#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "certattack/special.hpp"
#include "oracles.hpp"

using namespace certattack::special;

TEST(Special, NormalCdfKnownValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
  // mpmath: ncdf(-1/(0.2*sqrt(2)))
  EXPECT_NEAR(normal_cdf(-1.0 / (0.2 * std::sqrt(2.0))), 2.034760087224794698e-4, 1e-17);
}

TEST(Special, NormalQuantileFrozenValues) {
  // mpmath sqrt(2) * erfinv(2u - 1) at the binary value of u, 40 digits
  const std::vector<std::pair<double, double>> table = {
      {1e-10, -6.361340902404057}, {1e-5, -4.264890793922825}, {0.001, -3.0902323061678136},
      {0.025, -1.9599639845400543}, {0.3, -0.5244005127080408}, {0.5, 0.0},
      {0.7, 0.5244005127080407},   {0.975, 1.9599639845400538}, {0.999, 3.090232306167813},
      {0.99999, 4.264890793923841}};
  for (const auto& [u, z] : table) EXPECT_NEAR(normal_quantile(u), z, 1e-12) << u;
}

TEST(Special, NormalQuantileMatchesBisectionOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> logu(-14.0, -0.0001);
  for (int i = 0; i < 500; ++i) {
    const double u = std::pow(10.0, logu(rng));
    for (double v : {u, 1.0 - u}) EXPECT_NEAR(normal_quantile(v), oracle::normal_quantile_bisect(v), 1e-9) << v;
  }
}

TEST(Special, NormalQuantileEndpoints) {
  EXPECT_EQ(normal_quantile(0.0), -INFINITY);
  EXPECT_EQ(normal_quantile(1.0), INFINITY);
  EXPECT_THROW(normal_quantile(1.5), std::exception);
  EXPECT_THROW(normal_quantile(std::nan("")), std::exception);
}

TEST(Special, IncompleteBetaKnownValues) {
  // I_0.4(2, 3) = 0.5248 exactly
  EXPECT_NEAR(incomplete_beta(2.0, 3.0, 0.4), 0.5248, 1e-14);
  EXPECT_DOUBLE_EQ(incomplete_beta(2.0, 3.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(incomplete_beta(2.0, 3.0, 1.0), 1.0);
  // I_x(1, 1) = x
  EXPECT_NEAR(incomplete_beta(1.0, 1.0, 0.37), 0.37, 1e-14);
}

TEST(Special, IncompleteBetaSymmetry) {
  for (double x : {0.05, 0.2, 0.5, 0.81, 0.99})
    EXPECT_NEAR(incomplete_beta(4.5, 7.0, x), 1.0 - incomplete_beta(7.0, 4.5, 1.0 - x), 1e-13);
}

TEST(Special, BetaQuantileFrozenValue) {
  // scipy.stats.beta.ppf(0.001, 45, 6)
  EXPECT_NEAR(beta_quantile(0.001, 45.0, 6.0), 0.7066864947990713, 1e-12);
}

TEST(Special, BetaQuantileMatchesBinomialTailOracle) {
  for (std::uint64_t n : {10u, 50u, 500u}) {
    for (std::uint64_t k = 1; k <= n; k += std::max<std::uint64_t>(1, n / 9)) {
      for (double alpha : {0.001, 0.05}) {
        const double expected = oracle::binomial_tail_bound(k, n, alpha);
        EXPECT_NEAR(beta_quantile(alpha, double(k), double(n - k + 1)), expected, 1e-8)
            << k << "/" << n << " alpha " << alpha;
      }
    }
  }
}

TEST(Special, StudentTTwoSided) {
  // scipy: 2 * t.sf(2.0, 10)
  EXPECT_NEAR(student_t_two_sided(2.0, 10.0), 0.07338803477074039, 1e-12);
  EXPECT_NEAR(student_t_two_sided(0.0, 5.0), 1.0, 1e-15);
}

TEST(Special, SpearmanMatchesScipy) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const std::vector<double> y{2, 1, 4, 3, 6, 5};
  const auto r = spearman(x, y);
  // scipy.stats.spearmanr
  EXPECT_NEAR(r.rho, 0.8285714285714287, 1e-12);
  EXPECT_NEAR(r.p_value, 0.04156268221574334, 1e-10);
}

TEST(Special, SpearmanTiesUseAverageRanks) {
  const std::vector<double> x{1, 1, 2, 2};
  const std::vector<double> y{1, 1, 2, 2};
  EXPECT_NEAR(spearman(x, y).rho, 1.0, 1e-12);
  const std::vector<double> z{2, 2, 1, 1};
  EXPECT_NEAR(spearman(x, z).rho, -1.0, 1e-12);
}
