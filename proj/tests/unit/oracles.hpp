// Independent reference computations used as test oracles. Nothing here shares
// code with the library under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

// Standard normal CDF in long double precision.
inline long double phi(long double z) { return 0.5L * std::erfc(-z / std::sqrt(2.0L)); }

// Inverse of phi by plain bisection, on the lower tail so that 1 - u stays exact.
inline double normal_quantile_bisect(double u) {
  if (u > 0.5) return -normal_quantile_bisect(1.0 - u);
  long double lo = -40.0L, hi = 0.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (phi(mid) < u ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

// P[Bin(n, v) >= k] by direct summation of the pmf.
inline long double binomial_upper_tail(std::uint64_t k, std::uint64_t n, long double v) {
  if (v <= 0.0L) return k == 0 ? 1.0L : 0.0L;
  if (v >= 1.0L) return 1.0L;
  long double total = 0.0L;
  for (std::uint64_t j = k; j <= n; ++j) {
    const long double log_pmf = std::lgamma(static_cast<long double>(n) + 1) -
                                std::lgamma(static_cast<long double>(j) + 1) -
                                std::lgamma(static_cast<long double>(n - j) + 1) +
                                j * std::log(v) + (n - j) * std::log1p(-v);
    total += std::exp(log_pmf);
  }
  return total;
}

// The v with P[Bin(n, v) >= k] = alpha: the one-sided Clopper-Pearson lower bound.
inline double binomial_tail_bound(std::uint64_t k, std::uint64_t n, double alpha) {
  if (k == 0) return 0.0;
  long double lo = 0.0L, hi = 1.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (binomial_upper_tail(k, n, mid) < alpha ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

// sup |F_n - F| of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    worst = std::max({worst, f - i / n, (i + 1) / n - f});
  }
  return worst;
}

// Two-sample KS statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return worst;
}

// DKW half-width at confidence 1 - gamma.
inline double dkw_epsilon(std::size_t n, double gamma) {
  return std::sqrt(std::log(2.0 / gamma) / (2.0 * static_cast<double>(n)));
}

}  // namespace oracle
