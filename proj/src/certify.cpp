#include "certattack/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "certattack/errors.hpp"
#include "certattack/linalg.hpp"
#include "certattack/parallel.hpp"
#include "certattack/special.hpp"

namespace certattack {

CdfPair estimate_cdfs(const NoiseSpec& spec, std::span<const double> delta, std::size_t n_cdf,
                      std::uint64_t seed, double margin, int width) {
  spec.validate();
  require_same_dim(delta.size(), spec.dim, "estimate_cdfs");
  if (n_cdf == 0) throw ParameterError("estimate_cdfs: N_cdf must be positive");
  if (!(margin >= 0.0 && margin < 1.0)) throw ParameterError("estimate_cdfs: margin must be in [0, 1)");
  CdfPair out;
  out.n_cdf = n_cdf;
  out.margin = margin;
  out.zero_shift = std::all_of(delta.begin(), delta.end(), [](double v) { return v == 0.0; });
  out.minus_samples.assign(n_cdf, 0.0);
  out.plus_samples.assign(n_cdf, 0.0);
  if (out.zero_shift) return out;

  const Matrix eps = sample(spec, seed, n_cdf);
  parallel_for(n_cdf, width, [&](std::size_t i) {
    out.minus_samples[i] = log_likelihood_ratio(spec, eps.row(i), delta, RatioSide::Minus);
    out.plus_samples[i] = log_likelihood_ratio(spec, eps.row(i), delta, RatioSide::Plus);
  });
  std::sort(out.minus_samples.begin(), out.minus_samples.end());
  std::sort(out.plus_samples.begin(), out.plus_samples.end());
  return out;
}

double empirical_quantile(const std::vector<double>& sorted, double u) {
  if (sorted.empty()) throw ParameterError("empirical_quantile: no samples");
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(u * n - 1e-12));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

double certified_probability(const CdfPair& cdfs, double p_adv_lower) {
  if (cdfs.zero_shift) return p_adv_lower;
  const double t = empirical_quantile(cdfs.minus_samples, p_adv_lower - cdfs.margin);
  const auto below = std::lower_bound(cdfs.plus_samples.begin(), cdfs.plus_samples.end(), t) -
                     cdfs.plus_samples.begin();
  const double cdf = static_cast<double>(below) / static_cast<double>(cdfs.plus_samples.size());
  return std::max(0.0, cdf - cdfs.margin);
}

bool certify_shift(const CdfPair& cdfs, double p_adv_lower, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("certify_shift: p must be in (0, 1)");
  if (p_adv_lower < p) throw ContractError("certify_shift: requires p_adv_lower >= p");
  if (cdfs.zero_shift) return true;
  return certified_probability(cdfs, p_adv_lower) >= p;
}

namespace {

constexpr double kQuantileCap = 1.0 - 1e-12;

}  // namespace

double gaussian_max_shift(double p_adv_lower, double p, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_max_shift: sigma must be positive");
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("gaussian_max_shift: p must be in (0, 1)");
  if (p_adv_lower < p) throw ContractError("gaussian_max_shift: requires p_adv_lower >= p");
  if (p_adv_lower == p) return 0.0;
  const double capped = std::min(p_adv_lower, kQuantileCap);
  return sigma * (special::normal_quantile(capped) - special::normal_quantile(p));
}

double gaussian_certified_probability(double p_adv_lower, double shift_norm, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_certified_probability: sigma must be positive");
  if (shift_norm == 0.0) return p_adv_lower;
  const double capped = std::min(p_adv_lower, kQuantileCap);
  return special::normal_cdf(special::normal_quantile(capped) - shift_norm / sigma);
}

double shift_confidence(double alpha, std::size_t n, double delta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("shift_confidence: alpha must be in (0, 1)");
  if (n == 0) throw ParameterError("shift_confidence: n must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("shift_confidence: delta must be in (0, 1)");
  const double dkw = 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(n) * delta * delta);
  if (dkw <= 0.0) return 0.0;
  return (1.0 - alpha) * dkw * dkw;
}

double ConfidenceLedger::record_shift() {
  const double f = cdf_samples == 0 ? 1.0 - alpha : shift_confidence(alpha, cdf_samples, cdf_error);
  factors.push_back(f);
  return f;
}

double ConfidenceLedger::product() const {
  double p = 1.0;
  for (double f : factors) p *= f;
  return p;
}

}  // namespace certattack
