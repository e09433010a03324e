#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "certattack/noise.hpp"

namespace certattack {

/// Sorted Monte Carlo draws of the two log likelihood ratios for a shift delta:
///   minus: log phi(eps - delta) - log phi(eps),  eps ~ phi
///   plus:  log phi(eps) - log phi(eps + delta),  eps ~ phi
/// Both sides reuse the same eps draws.
struct CdfPair {
  std::vector<double> minus_samples;
  std::vector<double> plus_samples;
  std::size_t n_cdf = 0;
  /// Uniform CDF error allowance applied when certifying (0 disables the correction).
  double margin = 0.0;
  /// delta == 0: both ratios are the point mass at 0.
  bool zero_shift = false;
};

CdfPair estimate_cdfs(const NoiseSpec& spec, std::span<const double> delta, std::size_t n_cdf,
                      std::uint64_t seed, double margin = 0.0, int width = 1);

/// Right-continuous empirical quantile: the smallest sample s with F_n(s) >= u.
double empirical_quantile(const std::vector<double>& sorted, double u);

/// Lower bound on the shifted distribution's success probability,
///   Phi_plus(t-) - margin  with  t = Phi_minus^{-1}(p_adv_lower - margin).
/// Returns p_adv_lower itself for the zero shift.
double certified_probability(const CdfPair& cdfs, double p_adv_lower);

/// True iff certified_probability(cdfs, p_adv_lower) >= p.
/// Throws ContractError when p_adv_lower < p.
bool certify_shift(const CdfPair& cdfs, double p_adv_lower, double p);

/// Largest l2 shift that keeps the guarantee under N(0, sigma^2 I) noise:
/// sigma * (Phi^{-1}(p_adv_lower) - Phi^{-1}(p)). p_adv_lower is capped at 1 - 1e-12.
double gaussian_max_shift(double p_adv_lower, double p, double sigma);

/// Exact post-shift bound under Gaussian noise: Phi(Phi^{-1}(p_adv_lower) - |delta| / sigma).
double gaussian_certified_probability(double p_adv_lower, double shift_norm, double sigma);

/// Per-shift confidence (1 - alpha)(1 - 2 exp(-2 n delta^2))^2; the DKW factor is
/// clamped at 0 when it would go negative.
double shift_confidence(double alpha, std::size_t n, double delta);

/// Confidence accounting across a run: one factor per certified shift.
struct ConfidenceLedger {
  double alpha = 0.001;
  std::size_t n_m = 0;          // RPQ samples per query
  std::size_t cdf_samples = 0;  // 0 when the CDFs are exact (closed-form path)
  double cdf_error = 0.0;
  std::vector<double> factors;

  /// Appends the factor for one certified shift and returns it.
  double record_shift();
  double product() const;
};

}  // namespace certattack
