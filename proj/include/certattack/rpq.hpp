#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "certattack/linalg.hpp"
#include "certattack/noise.hpp"
#include "certattack/oracle.hpp"
#include "certattack/rng.hpp"

namespace certattack {

/// Outcome of one randomized parallel query at a mean x'.
struct QueryResult {
  std::uint64_t k = 0;  // samples not classified as the clean label
  std::uint64_t n = 0;  // samples queried
  double alpha = 0.0;
  double p_lower = 0.0;  // one-sided (1 - alpha) Clopper-Pearson lower bound on k / n
  std::uint64_t seed = 0;
  /// Delivered (clipped) samples that kept the clean label; the boundary probes
  /// used for direction finding.
  Matrix failed;
};

/// One-sided (1 - alpha) Clopper-Pearson lower bound: the alpha-quantile of
/// Beta(k, n - k + 1), and 0 when k = 0.
double lower_conf_bound(std::uint64_t k, std::uint64_t n, double alpha);

/// Draws n_m noises, clips x' + eps to the oracle box, queries the batch and
/// bounds the misclassification probability. The result is independent of `width`.
QueryResult rpq(Oracle& oracle, std::span<const double> mean, const NoiseSpec& spec, int label,
                std::size_t n_m, double alpha, std::uint64_t seed, int width = 1);

/// Q(.) for a single attack instance: fixed oracle, noise, label and budget,
/// a fresh derived seed per call, and a call counter (#RPQ).
class RandomizedQuery {
 public:
  RandomizedQuery(Oracle& oracle, NoiseSpec spec, int label, std::size_t n_m, double alpha,
                  std::uint64_t seed, int width = 1);

  QueryResult operator()(std::span<const double> mean);

  std::size_t calls() const { return calls_; }
  std::size_t samples_per_call() const { return n_m_; }
  double alpha() const { return alpha_; }
  const NoiseSpec& spec() const { return spec_; }
  int label() const { return label_; }
  Oracle& oracle() { return oracle_; }

 private:
  Oracle& oracle_;
  NoiseSpec spec_;
  int label_;
  std::size_t n_m_;
  double alpha_;
  SeedSequence seeds_;
  int width_;
  std::size_t calls_ = 0;
};

}  // namespace certattack
