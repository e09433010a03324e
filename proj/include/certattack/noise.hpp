#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "certattack/linalg.hpp"
#include "certattack/rng.hpp"

namespace certattack {

enum class NoiseFamily { Gaussian, Cauchy, HyperbolicSecant, GeneralizedNormal };

std::string to_string(NoiseFamily family);
NoiseFamily parse_noise_family(const std::string& name);

/// Zero-mean product noise: every coordinate is i.i.d. from the family.
///
/// Per-coordinate densities (up to normalization):
///   Gaussian           exp(-z^2 / (2 a^2))      (a is the standard deviation)
///   Cauchy             a^2 / (z^2 + a^2)
///   HyperbolicSecant   sech(|z / a|)
///   GeneralizedNormal  exp(-|z / a|^b)
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  double a = 0.25;
  double b = 2.0;  // shape, GeneralizedNormal only
  std::size_t dim = 1;

  /// Throws ParameterError unless a > 0, dim > 0 and (for GeneralizedNormal) b > 0.
  void validate() const;

  bool operator==(const NoiseSpec&) const = default;
};

/// n x dim matrix of i.i.d. draws, deterministic in `seed`.
Matrix sample(const NoiseSpec& spec, std::uint64_t seed, std::size_t n);

/// Fills `out` with one draw per coordinate from `rng`.
void sample_into(const NoiseSpec& spec, Rng& rng, std::span<double> out);

/// Unnormalized per-coordinate log kernel. The normalizing constant is dropped;
/// every consumer works with differences of log densities.
double log_kernel(const NoiseSpec& spec, double z);

/// Sum of log_kernel over coordinates.
double log_density(const NoiseSpec& spec, std::span<const double> z);

enum class RatioSide {
  Minus,  // log phi(eps - delta) - log phi(eps)
  Plus,   // log phi(eps) - log phi(eps + delta)
};

double log_likelihood_ratio(const NoiseSpec& spec, std::span<const double> eps,
                            std::span<const double> delta, RatioSide side);

/// Spec whose per-coordinate RMS matches `target_rms`.
///
/// Gaussian uses a = target_rms. The remaining families scale a fixed table of
/// parameters published for RMS 0.25 linearly; GeneralizedNormal shapes outside
/// the table use the closed form a = rms * sqrt(Gamma(1/b) / Gamma(3/b)).
NoiseSpec calibrate(NoiseFamily family, double target_rms, std::size_t dim, double shape = 2.0);

/// Gaussian-equivalent scale used to seed step sizes (a for Gaussian, the
/// calibration RMS for families with finite variance, a itself for Cauchy).
double nominal_scale(const NoiseSpec& spec);

}  // namespace certattack
