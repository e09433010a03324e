#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "certattack/linalg.hpp"
#include "certattack/noise.hpp"
#include "certattack/oracle.hpp"
#include "certattack/rpq.hpp"

namespace certattack {

/// Differentiable feature map F used by self-supervised localization.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual Vec features(std::span<const double> x) const = 0;
  /// Vector-Jacobian product J_F(x)^T v.
  virtual Vec vjp(std::span<const double> x, std::span<const double> v) const = 0;
};

class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(std::size_t dim) : dim_(dim) {}
  std::size_t input_dim() const override { return dim_; }
  std::size_t feature_dim() const override { return dim_; }
  Vec features(std::span<const double> x) const override { return Vec(x.begin(), x.end()); }
  Vec vjp(std::span<const double>, std::span<const double> v) const override {
    return Vec(v.begin(), v.end());
  }

 private:
  std::size_t dim_;
};

/// Fixed random perceptron d -> 4d -> m: F(x) = W2 tanh(W1 x + b1) + b2, with
/// Glorot-scaled Gaussian weights drawn from `seed`.
class RandomMlpExtractor final : public FeatureExtractor {
 public:
  RandomMlpExtractor(std::size_t dim, std::size_t features, std::uint64_t seed);
  std::size_t input_dim() const override { return dim_; }
  std::size_t feature_dim() const override { return out_; }
  Vec features(std::span<const double> x) const override;
  Vec vjp(std::span<const double> x, std::span<const double> v) const override;

 private:
  Vec hidden(std::span<const double> x) const;

  std::size_t dim_, width_, out_;
  Matrix w1_, w2_;
  Vec b1_, b2_;
};

/// L(x') = mean_i |F(x' + eps_i) - F(x + eps_i)|_2 over the rows of `noise`.
double smoothed_distortion(const FeatureExtractor& extractor, std::span<const double> mean,
                           std::span<const double> clean, const Matrix& noise);

/// Gradient of smoothed_distortion with respect to x'. Terms with zero feature
/// distortion contribute the zero subgradient.
Vec distortion_gradient(const FeatureExtractor& extractor, std::span<const double> mean,
                        std::span<const double> clean, const Matrix& noise);

struct SsspParams {
  double budget = 3.0 / 255.0;  // l-inf radius pi around the clean input
  double step = 3.0 / 255.0;    // eta
  std::size_t iterations = 10;  // n_max
  std::size_t noise_samples = 50;  // N_s

  bool operator==(const SsspParams&) const = default;
};

/// Signed-gradient ascent on the smoothed distortion from `start`, projected after
/// every step onto the l-inf ball around `clean` and onto the input box.
///
/// A start equal to `clean` has an all-zero subgradient; in that case the first
/// iterate is a uniform random point of l-inf radius `step` around it.
/// `on_step` sees every projected iterate.
Vec sssp(std::span<const double> start, std::span<const double> clean,
         const FeatureExtractor& extractor, const NoiseSpec& spec, const InputBox& box,
         const SsspParams& params, std::uint64_t seed,
         const std::function<void(std::span<const double>)>& on_step = {});

struct LocalizationOutcome {
  bool found = false;
  Vec mean;                // x' when found
  QueryResult query;       // the RPQ at x' that met the threshold
  std::size_t rpq_count = 0;
  std::optional<Vec> infeasible_end;  // binary search: last point with Q < p
};

struct SsspLocalizeParams {
  double budget_init = 3.0 / 255.0;  // pi_init
  double budget_step = 3.0 / 255.0;  // gamma
  std::size_t max_rounds = 85;       // N_max
  SsspParams inner;                  // budget field is overwritten per round

  bool operator==(const SsspLocalizeParams&) const = default;
};

/// Grows the budget by `budget_step` per round and reruns SSSP from the clean input
/// until Q(x') >= p or `max_rounds` rounds are spent. Every Q evaluation counts,
/// including the initial check at the clean input.
LocalizationOutcome sssp_localize(std::span<const double> clean, const FeatureExtractor& extractor,
                                  RandomizedQuery& query, double p, const SsspLocalizeParams& params,
                                  std::uint64_t seed);

struct BinarySearchParams {
  std::size_t random_attempts = 85;  // N_r
  std::size_t bisections = 15;       // N_b
  double tolerance = 0.1;            // Omega

  bool operator==(const BinarySearchParams&) const = default;
};

/// Uniform random search over the box for a feasible mean, then bisection on the
/// segment to the clean input, keeping the feasible end.
LocalizationOutcome binary_search_localize(std::span<const double> clean, RandomizedQuery& query,
                                           double p, const BinarySearchParams& params,
                                           std::uint64_t seed);

/// Uniform random search over the box only (no bisection).
LocalizationOutcome random_localize(RandomizedQuery& query, double p, std::size_t attempts,
                                    std::uint64_t seed);

}  // namespace certattack
