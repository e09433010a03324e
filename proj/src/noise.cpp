#include "certattack/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "certattack/errors.hpp"

namespace certattack {

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian:
      return "gaussian";
    case NoiseFamily::Cauchy:
      return "cauchy";
    case NoiseFamily::HyperbolicSecant:
      return "hyperbolic_secant";
    case NoiseFamily::GeneralizedNormal:
      return "generalized_normal";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::Gaussian;
  if (name == "cauchy") return NoiseFamily::Cauchy;
  if (name == "hyperbolic_secant") return NoiseFamily::HyperbolicSecant;
  if (name == "generalized_normal") return NoiseFamily::GeneralizedNormal;
  throw ParameterError("unknown noise family '" + name + "'");
}

void NoiseSpec::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("noise scale a must be positive");
  if (dim == 0) throw ParameterError("noise dimension must be positive");
  if (family == NoiseFamily::GeneralizedNormal && (!(b > 0.0) || !std::isfinite(b)))
    throw ParameterError("generalized normal shape b must be positive");
}

void sample_into(const NoiseSpec& spec, Rng& rng, std::span<double> out) {
  switch (spec.family) {
    case NoiseFamily::Gaussian: {
      std::normal_distribution<double> dist(0.0, spec.a);
      for (double& v : out) v = dist(rng);
      break;
    }
    case NoiseFamily::Cauchy: {
      std::cauchy_distribution<double> dist(0.0, spec.a);
      for (double& v : out) v = dist(rng);
      break;
    }
    case NoiseFamily::HyperbolicSecant: {
      // Inverse CDF of density sech(z/a) / (pi a): F(z) = (2/pi) atan(exp(z/a)).
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (double& v : out) {
        double u = unit(rng);
        while (u <= 0.0) u = unit(rng);
        v = spec.a * std::log(std::tan(0.5 * M_PI * u));
      }
      break;
    }
    case NoiseFamily::GeneralizedNormal: {
      // |z/a|^b ~ Gamma(1/b, 1) with an independent random sign.
      std::gamma_distribution<double> gamma(1.0 / spec.b, 1.0);
      std::bernoulli_distribution sign(0.5);
      for (double& v : out) {
        const double magnitude = spec.a * std::pow(gamma(rng), 1.0 / spec.b);
        v = sign(rng) ? magnitude : -magnitude;
      }
      break;
    }
  }
}

Matrix sample(const NoiseSpec& spec, std::uint64_t seed, std::size_t n) {
  spec.validate();
  if (n == 0) throw ParameterError("sample: n must be at least 1");
  Matrix out(n, spec.dim);
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < n; ++i) sample_into(spec, rng, out.row(i));
  return out;
}

double log_kernel(const NoiseSpec& spec, double z) {
  const double t = z / spec.a;
  switch (spec.family) {
    case NoiseFamily::Gaussian:
      return -std::min(0.5 * t * t, std::numeric_limits<double>::max());
    case NoiseFamily::Cauchy:
      return std::abs(t) < 1e100 ? -std::log1p(t * t) : -2.0 * std::log(std::abs(t));
    case NoiseFamily::HyperbolicSecant: {
      // log sech|t| = -log cosh|t| = -(|t| + log1p(exp(-2|t|)) - log 2)
      const double at = std::abs(t);
      return -(at + std::log1p(std::exp(-2.0 * at)) - std::log(2.0));
    }
    case NoiseFamily::GeneralizedNormal:
      return -std::min(std::pow(std::abs(t), spec.b), std::numeric_limits<double>::max());
  }
  return 0.0;
}

double log_density(const NoiseSpec& spec, std::span<const double> z) {
  require_same_dim(z.size(), spec.dim, "log_density");
  double s = 0.0;
  for (double v : z) s += log_kernel(spec, v);
  return s;
}

double log_likelihood_ratio(const NoiseSpec& spec, std::span<const double> eps,
                            std::span<const double> delta, RatioSide side) {
  require_same_dim(eps.size(), spec.dim, "log_likelihood_ratio");
  require_same_dim(delta.size(), spec.dim, "log_likelihood_ratio");
  double s = 0.0;
  if (side == RatioSide::Minus) {
    for (std::size_t i = 0; i < eps.size(); ++i)
      s += log_kernel(spec, eps[i] - delta[i]) - log_kernel(spec, eps[i]);
  } else {
    for (std::size_t i = 0; i < eps.size(); ++i)
      s += log_kernel(spec, eps[i]) - log_kernel(spec, eps[i] + delta[i]);
  }
  return s;
}

namespace {

constexpr double kReferenceRms = 0.25;
constexpr double kCauchyAtReference = 0.01969;
constexpr double kSecantAtReference = 0.1592;
constexpr double kGenNormal15AtReference = 0.2909;
constexpr double kGenNormal3AtReference = 0.4092;

}  // namespace

NoiseSpec calibrate(NoiseFamily family, double target_rms, std::size_t dim, double shape) {
  if (!(target_rms > 0.0)) throw ParameterError("calibrate: target_rms must be positive");
  NoiseSpec spec;
  spec.family = family;
  spec.dim = dim;
  const double scale = target_rms / kReferenceRms;
  switch (family) {
    case NoiseFamily::Gaussian:
      spec.a = target_rms;
      break;
    case NoiseFamily::Cauchy:
      spec.a = kCauchyAtReference * scale;
      break;
    case NoiseFamily::HyperbolicSecant:
      spec.a = kSecantAtReference * scale;
      break;
    case NoiseFamily::GeneralizedNormal:
      spec.b = shape;
      if (shape == 1.5) {
        spec.a = kGenNormal15AtReference * scale;
      } else if (shape == 3.0) {
        spec.a = kGenNormal3AtReference * scale;
      } else {
        if (!(shape > 0.0)) throw ParameterError("calibrate: shape must be positive");
        spec.a = target_rms * std::sqrt(std::tgamma(1.0 / shape) / std::tgamma(3.0 / shape));
      }
      break;
    default:
      throw ParameterError("calibrate: unsupported family");
  }
  spec.validate();
  return spec;
}

double nominal_scale(const NoiseSpec& spec) {
  switch (spec.family) {
    case NoiseFamily::Gaussian:
      return spec.a;
    case NoiseFamily::Cauchy:
      return spec.a * (kReferenceRms / kCauchyAtReference);
    case NoiseFamily::HyperbolicSecant:
      return spec.a * M_PI / 2.0;
    case NoiseFamily::GeneralizedNormal:
      return spec.a * std::sqrt(std::tgamma(3.0 / spec.b) / std::tgamma(1.0 / spec.b));
  }
  return spec.a;
}

}  // namespace certattack
