#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "certattack/errors.hpp"
#include "certattack/noise.hpp"
#include "oracles.hpp"

using namespace certattack;

namespace {

NoiseSpec make(NoiseFamily family, double a, std::size_t dim, double b = 2.0) {
  NoiseSpec s;
  s.family = family;
  s.a = a;
  s.b = b;
  s.dim = dim;
  return s;
}

// Per-coordinate CDF of each family, from its closed form.
double analytic_cdf(const NoiseSpec& s, double z) {
  const double t = z / s.a;
  switch (s.family) {
    case NoiseFamily::Gaussian:
      return static_cast<double>(oracle::phi(t));
    case NoiseFamily::Cauchy:
      return 0.5 + std::atan(t) / std::numbers::pi;
    case NoiseFamily::HyperbolicSecant:
      return 2.0 / std::numbers::pi * std::atan(std::exp(t));
    case NoiseFamily::GeneralizedNormal: {
      const double half = 0.5 * boost::math::gamma_p(1.0 / s.b, std::pow(std::abs(t), s.b));
      return t < 0 ? 0.5 - half : 0.5 + half;
    }
  }
  return 0.0;
}

double rms(const Matrix& m) {
  double total = 0.0;
  for (double v : m.flat()) total += v * v;
  return std::sqrt(total / static_cast<double>(m.flat().size()));
}

std::vector<double> first_coordinate(const Matrix& m) {
  std::vector<double> out;
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(m(i, 0));
  return out;
}

}  // namespace

TEST(Noise, FamilyNamesRoundTrip) {
  for (auto f : {NoiseFamily::Gaussian, NoiseFamily::Cauchy, NoiseFamily::HyperbolicSecant,
                 NoiseFamily::GeneralizedNormal})
    EXPECT_EQ(parse_noise_family(to_string(f)), f);
  EXPECT_THROW(parse_noise_family("laplace"), ParameterError);
}

TEST(Noise, InvalidSpecsRejected) {
  EXPECT_THROW(sample(make(NoiseFamily::Gaussian, 0.0, 2), 1, 4), ParameterError);
  EXPECT_THROW(sample(make(NoiseFamily::Gaussian, -1.0, 2), 1, 4), ParameterError);
  EXPECT_THROW(sample(make(NoiseFamily::Gaussian, 0.25, 0), 1, 4), ParameterError);
  EXPECT_THROW(sample(make(NoiseFamily::GeneralizedNormal, 0.25, 2, 0.0), 1, 4), ParameterError);
}

TEST(Noise, SamplingIsDeterministicInSeed) {
  const auto spec = make(NoiseFamily::HyperbolicSecant, 0.2, 5);
  const auto flat = [&](std::uint64_t seed) {
    const auto m = sample(spec, seed, 30);
    return std::vector<double>(m.flat().begin(), m.flat().end());
  };
  EXPECT_EQ(flat(42), flat(42));
  EXPECT_NE(flat(42), flat(43));
}

TEST(Noise, GaussianMeanNearZero) {
  const auto m = sample(make(NoiseFamily::Gaussian, 0.25, 2), 3, 1000000);
  for (std::size_t j = 0; j < 2; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) total += m(i, j);
    EXPECT_LT(std::abs(total / m.rows()), 4 * 0.25 / 1000.0);
  }
}

TEST(Noise, GaussianRmsMatchesScale) {
  EXPECT_NEAR(rms(sample(make(NoiseFamily::Gaussian, 0.25, 3072), 5, 200)), 0.25, 0.0025);
}

TEST(Noise, HyperbolicSecantRmsFromTableScale) {
  EXPECT_NEAR(rms(sample(make(NoiseFamily::HyperbolicSecant, 0.1592, 3072), 5, 200)), 0.25, 0.25 * 0.02);
}

TEST(Noise, GeneralizedNormalRmsFromTableScale) {
  EXPECT_NEAR(rms(sample(make(NoiseFamily::GeneralizedNormal, 0.4092, 3072, 3.0), 5, 200)), 0.25, 0.25 * 0.02);
  EXPECT_NEAR(rms(sample(make(NoiseFamily::GeneralizedNormal, 0.2909, 3072, 1.5), 5, 200)), 0.25, 0.25 * 0.02);
}

class NoiseDistribution : public ::testing::TestWithParam<NoiseSpec> {};

TEST_P(NoiseDistribution, EmpiricalCdfWithinDkwBand) {
  const NoiseSpec spec = GetParam();
  const std::size_t n = 100000;
  const auto m = sample(spec, 77, n);
  const double d = oracle::ks_statistic(first_coordinate(m), [&](double z) { return analytic_cdf(spec, z); });
  EXPECT_LT(d, oracle::dkw_epsilon(n, 0.01)) << to_string(spec.family);
}

TEST_P(NoiseDistribution, KernelSymmetricAndDecreasing) {
  NoiseSpec spec = GetParam();
  spec.dim = 1;
  double previous = log_kernel(spec, 0.0);
  for (int i = 1; i <= 400; ++i) {
    const double z = 0.01 * i;
    const double k = log_kernel(spec, z);
    EXPECT_LT(k, previous) << z;
    EXPECT_EQ(k, log_kernel(spec, -z));
    EXPECT_TRUE(std::isfinite(k));
    previous = k;
  }
  EXPECT_TRUE(std::isfinite(log_kernel(spec, 1e150)));
}

TEST_P(NoiseDistribution, RatioSidesAreShiftsOfEachOther) {
  const NoiseSpec spec = GetParam();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int t = 0; t < 50; ++t) {
    Vec eps(spec.dim), delta(spec.dim);
    for (auto& v : eps) v = g(rng);
    for (auto& v : delta) v = g(rng);
    const Vec shifted = sub(eps, delta);
    EXPECT_NEAR(log_likelihood_ratio(spec, eps, delta, RatioSide::Minus),
                log_likelihood_ratio(spec, shifted, delta, RatioSide::Plus), 1e-9);
    const Vec zero(spec.dim, 0.0);
    EXPECT_EQ(log_likelihood_ratio(spec, eps, zero, RatioSide::Minus), 0.0);
    EXPECT_EQ(log_likelihood_ratio(spec, eps, zero, RatioSide::Plus), 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Families, NoiseDistribution,
                         ::testing::Values(make(NoiseFamily::Gaussian, 0.25, 3),
                                           make(NoiseFamily::Cauchy, 0.01969, 3),
                                           make(NoiseFamily::HyperbolicSecant, 0.1592, 3),
                                           make(NoiseFamily::GeneralizedNormal, 0.2909, 3, 1.5),
                                           make(NoiseFamily::GeneralizedNormal, 0.4092, 3, 3.0)));

TEST(Noise, GaussianLogDensityDifference) {
  const auto spec = make(NoiseFamily::Gaussian, 0.25, 3);
  const Vec zero(3, 0.0);
  const Vec z{0.1, -0.3, 0.2};
  EXPECT_NEAR(log_density(spec, zero) - log_density(spec, z), norm2(z) * norm2(z) / (2 * 0.0625), 1e-12);
}

TEST(Noise, CauchyKernelAtOne) {
  const auto spec = make(NoiseFamily::Cauchy, 1.0, 1);
  const Vec zero{0.0}, one{1.0};
  EXPECT_NEAR(log_density(spec, one) - log_density(spec, zero), std::log(0.5), 1e-15);
}

TEST(Noise, GeneralizedNormalShapeTwoIsGaussian) {
  const double sigma = 0.3;
  const auto gauss = make(NoiseFamily::Gaussian, sigma, 1);
  const auto gn = make(NoiseFamily::GeneralizedNormal, sigma * std::sqrt(2.0), 1, 2.0);
  const double g0 = log_kernel(gauss, 0.0), n0 = log_kernel(gn, 0.0);
  for (double z = -2.0; z <= 2.0; z += 0.05) EXPECT_NEAR(log_kernel(gauss, z) - g0, log_kernel(gn, z) - n0, 1e-12);
}

TEST(Noise, GaussianMinusRatioClosedForm) {
  const auto spec = make(NoiseFamily::Gaussian, 0.25, 3);
  const Vec eps{0.1, -0.2, 0.05}, delta{0.3, 0.1, -0.4};
  const double expected = (2 * dot(eps, delta) - dot(delta, delta)) / (2 * 0.0625);
  EXPECT_NEAR(log_likelihood_ratio(spec, eps, delta, RatioSide::Minus), expected, 1e-12);
}

TEST(Noise, CauchyMinusRatioByHand) {
  const auto spec = make(NoiseFamily::Cauchy, 1.0, 1);
  EXPECT_NEAR(log_likelihood_ratio(spec, Vec{0.0}, Vec{1.0}, RatioSide::Minus), std::log(0.5), 1e-15);
}

TEST(Noise, RatioInLogSpaceSurvivesLargeArguments) {
  const auto spec = make(NoiseFamily::Gaussian, 0.01, 2);
  const double r = log_likelihood_ratio(spec, Vec{50.0, -50.0}, Vec{1.0, 1.0}, RatioSide::Minus);
  EXPECT_TRUE(std::isfinite(r));
}

TEST(Noise, DimensionMismatchIsShapeError) {
  const auto spec = make(NoiseFamily::Gaussian, 0.25, 3);
  EXPECT_THROW(log_density(spec, Vec{1.0, 2.0}), ShapeError);
  EXPECT_THROW(log_likelihood_ratio(spec, Vec(3, 0.0), Vec(2, 0.0), RatioSide::Plus), ShapeError);
}

TEST(Noise, CalibrationTable) {
  EXPECT_DOUBLE_EQ(calibrate(NoiseFamily::Gaussian, 0.25, 10).a, 0.25);
  EXPECT_DOUBLE_EQ(calibrate(NoiseFamily::Cauchy, 0.25, 10).a, 0.01969);
  EXPECT_DOUBLE_EQ(calibrate(NoiseFamily::HyperbolicSecant, 0.25, 10).a, 0.1592);
  EXPECT_DOUBLE_EQ(calibrate(NoiseFamily::GeneralizedNormal, 0.25, 10, 3.0).a, 0.4092);
  EXPECT_DOUBLE_EQ(calibrate(NoiseFamily::GeneralizedNormal, 0.25, 10, 1.5).a, 0.2909);
  EXPECT_DOUBLE_EQ(calibrate(NoiseFamily::Cauchy, 0.5, 10).a, 2 * 0.01969);
  EXPECT_EQ(calibrate(NoiseFamily::Cauchy, 0.5, 10).dim, 10u);
  EXPECT_THROW(calibrate(NoiseFamily::Gaussian, 0.0, 10), ParameterError);
}

TEST(Noise, CalibrationOffTableShapeHitsTargetRms) {
  const auto spec = calibrate(NoiseFamily::GeneralizedNormal, 0.25, 2048, 4.0);
  EXPECT_NEAR(rms(sample(spec, 8, 100)), 0.25, 0.25 * 0.02);
}
