#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "certattack/errors.hpp"
#include "certattack/localize.hpp"
#include "certattack/special.hpp"

using namespace certattack;

namespace {

NoiseSpec gaussian(double a, std::size_t dim) {
  NoiseSpec s;
  s.a = a;
  s.dim = dim;
  return s;
}

Vec random_point(std::mt19937_64& rng, std::size_t dim, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec x(dim);
  for (auto& v : x) v = u(rng);
  return x;
}

// Central differences of the smoothed loss on a fixed noise batch.
Vec finite_difference(const FeatureExtractor& f, const Vec& mean, const Vec& clean, const Matrix& noise,
                      double h) {
  Vec g(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    Vec up = mean, down = mean;
    up[j] += h;
    down[j] -= h;
    g[j] = (smoothed_distortion(f, up, clean, noise) - smoothed_distortion(f, down, clean, noise)) / (2 * h);
  }
  return g;
}

double relative_error(const Vec& got, const Vec& want) { return norm2(sub(got, want)) / norm2(want); }

std::shared_ptr<SyntheticModel> halfspace(Vec w, double b) {
  const std::size_t d = w.size();
  return std::make_shared<SyntheticModel>(Halfspace{std::move(w), b}, d);
}

}  // namespace

TEST(Extractor, RandomMlpGradientMatchesFiniteDifferences) {
  const RandomMlpExtractor f(8, 16, 3);
  std::mt19937_64 rng(21);
  const Matrix noise = sample(gaussian(0.25, 8), 4, 20);
  for (int probe = 0; probe < 100; ++probe) {
    const Vec clean = random_point(rng, 8);
    const Vec mean = random_point(rng, 8);
    const Vec analytic = distortion_gradient(f, mean, clean, noise);
    EXPECT_LT(relative_error(analytic, finite_difference(f, mean, clean, noise, 1e-5)), 1e-3);
  }
}

TEST(Extractor, VjpMatchesJacobianColumns) {
  const RandomMlpExtractor f(5, 7, 9);
  std::mt19937_64 rng(2);
  const Vec x = random_point(rng, 5);
  const Vec v = random_point(rng, 7, -1.0, 1.0);
  const Vec g = f.vjp(x, v);
  for (std::size_t j = 0; j < 5; ++j) {
    Vec up = x, down = x;
    up[j] += 1e-6;
    down[j] -= 1e-6;
    const double fd = (dot(v, f.features(up)) - dot(v, f.features(down))) / 2e-6;
    EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Extractor, SeedFixesWeights) {
  const RandomMlpExtractor a(4, 6, 1), b(4, 6, 1), c(4, 6, 2);
  const Vec x{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(a.features(x), b.features(x));
  EXPECT_NE(a.features(x), c.features(x));
}

TEST(Extractor, IdentityDistortionIsDistance) {
  const IdentityExtractor f(3);
  const Matrix noise = sample(gaussian(0.25, 3), 1, 10);
  const Vec clean{0.2, 0.4, 0.6}, mean{0.5, 0.0, 0.6};
  const Vec diff = sub(mean, clean);
  EXPECT_NEAR(smoothed_distortion(f, mean, clean, noise), norm2(diff), 1e-12);
  const Vec g = distortion_gradient(f, mean, clean, noise);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(g[j], diff[j] / norm2(diff), 1e-12);
  EXPECT_LT(relative_error(g, finite_difference(f, mean, clean, noise, 1e-6)), 1e-6);
}

TEST(Sssp, ZeroIterationsReturnsStart) {
  const IdentityExtractor f(2);
  SsspParams params;
  params.iterations = 0;
  const Vec start{0.3, 0.3}, clean{0.5, 0.5};
  EXPECT_EQ(sssp(start, clean, f, gaussian(0.25, 2), InputBox{}, params, 1), start);
}

TEST(Sssp, EveryIterateRespectsBudgetAndBox) {
  const RandomMlpExtractor f(6, 12, 5);
  SsspParams params;
  params.budget = 0.07;
  params.step = 0.03;
  params.iterations = 15;
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const Vec clean = random_point(rng, 6);
    std::size_t steps = 0;
    const Vec out = sssp(clean, clean, f, gaussian(0.25, 6), InputBox{}, params, t, [&](std::span<const double> x) {
      ++steps;
      for (std::size_t j = 0; j < x.size(); ++j) {
        EXPECT_LE(std::abs(x[j] - clean[j]), params.budget + 1e-15);
        EXPECT_GE(x[j], 0.0);
        EXPECT_LE(x[j], 1.0);
      }
    });
    EXPECT_EQ(steps, params.iterations);
    EXPECT_LE(norm_inf(sub(out, clean)), params.budget + 1e-15);
  }
}

TEST(Sssp, IdentityExtractorPushesOutward) {
  // L = |x' - x|, so every step moves each coordinate further from the clean input
  // until the budget binds.
  const IdentityExtractor f(4);
  SsspParams params;
  params.budget = 0.2;
  params.step = 0.01;
  params.iterations = 30;
  const Vec clean(4, 0.5);
  const Vec out = sssp(clean, clean, f, gaussian(0.25, 4), InputBox{}, params, 3);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(out[j] - clean[j]), 0.2, 1e-12);
}

TEST(SsspLocalize, FoundImmediatelyWhenEverythingMisclassified) {
  Oracle o(std::make_shared<ConstantModel>(3, 2, 1));
  RandomizedQuery q(o, gaussian(0.25, 3), 0, 50, 0.001, 1);
  const auto out = sssp_localize(Vec(3, 0.5), IdentityExtractor(3), q, 0.8, {}, 1);
  EXPECT_TRUE(out.found);
  EXPECT_EQ(out.rpq_count, 1u);
  EXPECT_EQ(out.mean, Vec(3, 0.5));
}

TEST(SsspLocalize, AbstainsWhenNothingMisclassified) {
  Oracle o(std::make_shared<ConstantModel>(3, 2, 0));
  RandomizedQuery q(o, gaussian(0.25, 3), 0, 50, 0.001, 1);
  SsspLocalizeParams params;
  params.max_rounds = 12;
  params.inner.noise_samples = 5;
  const auto out = sssp_localize(Vec(3, 0.5), IdentityExtractor(3), q, 0.9, params, 1);
  EXPECT_FALSE(out.found);
  EXPECT_EQ(out.rpq_count, params.max_rounds + 1);  // the check at the clean input, then one per round
  EXPECT_EQ(q.calls(), out.rpq_count);
}

TEST(SsspLocalize, HalfspaceFoundWithinGrownBudget) {
  // Boundary 0.1 away along x0; p = 0.5 means the mean must cross it.
  const auto model = halfspace({1.0, 0.0}, -0.6);
  const Vec clean{0.5, 0.5};
  SsspLocalizeParams params;
  params.inner.noise_samples = 10;
  std::size_t found = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Oracle o(model);
    RandomizedQuery q(o, gaussian(0.25, 2), 0, 200, 0.001, seed);
    const auto out = sssp_localize(clean, RandomMlpExtractor(2, 8, seed), q, 0.5, params, seed);
    if (!out.found) continue;
    ++found;
    EXPECT_GE(out.query.p_lower, 0.5);
    EXPECT_LE(norm_inf(sub(out.mean, clean)),
              params.budget_init + out.rpq_count * params.budget_step + 1e-12);
    // the analytic success rate at the mean clears 1/2 only past the boundary
    EXPECT_GT(out.mean[0], 0.6);
  }
  EXPECT_GT(found, 0u);
}

TEST(BinarySearch, EverythingFeasibleConvergesToClean) {
  Oracle o(std::make_shared<ConstantModel>(4, 2, 1));
  RandomizedQuery q(o, gaussian(0.25, 4), 0, 50, 0.001, 1);
  BinarySearchParams params;
  const Vec clean(4, 0.5);
  const auto out = binary_search_localize(clean, q, 0.5, params, 3);
  ASSERT_TRUE(out.found);
  const double gap = distance2(out.mean, clean);
  EXPECT_LE(gap, params.tolerance);
  EXPECT_GT(gap, params.tolerance / 2);
}

TEST(BinarySearch, BisectionCapBoundsTheBracket) {
  Oracle o(std::make_shared<ConstantModel>(4, 2, 1));
  RandomizedQuery q(o, gaussian(0.25, 4), 0, 50, 0.001, 1);
  BinarySearchParams params;
  params.bisections = 3;
  params.tolerance = 1e-6;
  const Vec clean(4, 0.5);
  const auto out = binary_search_localize(clean, q, 0.5, params, 3);
  ASSERT_TRUE(out.found);
  EXPECT_EQ(out.rpq_count, 1u + 3u);
  EXPECT_LE(distance2(out.mean, clean), std::sqrt(4.0) / 8.0);
}

TEST(BinarySearch, AbstainsAfterExactlyNrAttempts) {
  Oracle o(std::make_shared<ConstantModel>(4, 2, 0));
  RandomizedQuery q(o, gaussian(0.25, 4), 0, 50, 0.001, 1);
  BinarySearchParams params;
  params.random_attempts = 17;
  const auto out = binary_search_localize(Vec(4, 0.5), q, 0.5, params, 3);
  EXPECT_FALSE(out.found);
  EXPECT_EQ(out.rpq_count, 17u);
  EXPECT_EQ(q.calls(), 17u);
}

TEST(BinarySearch, HalfspaceBracketsTheThresholdBand) {
  const auto model = halfspace({1.0, 0.0}, -0.6);
  const Vec clean{0.4, 0.5};
  const double a = 0.25;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Oracle o(model, InputBox{-1.0, 2.0});
    RandomizedQuery q(o, gaussian(a, 2), 0, 500, 0.001, seed);
    BinarySearchParams params;
    params.tolerance = 0.05;
    const auto out = binary_search_localize(clean, q, 0.9, params, seed);
    ASSERT_TRUE(out.found);
    ASSERT_TRUE(out.infeasible_end.has_value());
    const double m_feasible = out.mean[0] - 0.6;
    const double m_infeasible = (*out.infeasible_end)[0] - 0.6;
    EXPECT_GE(special::normal_cdf(m_feasible / a), 0.9);
    // a point this deep would pass the N_m = 500 check with overwhelming probability
    EXPECT_LT(special::normal_cdf(m_infeasible / a), 0.97);
    EXPECT_LE(distance2(out.mean, *out.infeasible_end), params.tolerance);
  }
}

TEST(BinarySearch, InvalidParameters) {
  Oracle o(std::make_shared<ConstantModel>(2, 2, 1));
  RandomizedQuery q(o, gaussian(0.25, 2), 0, 50, 0.001, 1);
  EXPECT_THROW(binary_search_localize(Vec(2, 0.5), q, 0.5, {0, 15, 0.1}, 1), ParameterError);
  EXPECT_THROW(binary_search_localize(Vec(2, 0.5), q, 0.5, {85, 15, 0.0}, 1), ParameterError);
}

TEST(RandomLocalize, FirstDrawOrAbstain) {
  Oracle wrong(std::make_shared<ConstantModel>(2, 2, 1));
  RandomizedQuery q1(wrong, gaussian(0.25, 2), 0, 50, 0.001, 1);
  const auto hit = random_localize(q1, 0.5, 10, 1);
  EXPECT_TRUE(hit.found);
  EXPECT_EQ(hit.rpq_count, 1u);

  Oracle right(std::make_shared<ConstantModel>(2, 2, 0));
  RandomizedQuery q2(right, gaussian(0.25, 2), 0, 50, 0.001, 1);
  const auto miss = random_localize(q2, 0.5, 10, 1);
  EXPECT_FALSE(miss.found);
  EXPECT_EQ(miss.rpq_count, 10u);
}
