#include "certattack/rpq.hpp"

#include <cmath>

#include "certattack/errors.hpp"
#include "certattack/special.hpp"

namespace certattack {

double lower_conf_bound(std::uint64_t k, std::uint64_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("lower_conf_bound: alpha must be in (0, 1)");
  if (n == 0) throw ParameterError("lower_conf_bound: need at least one sample");
  if (k > n) throw ParameterError("lower_conf_bound: k exceeds n");
  if (k == 0) return 0.0;
  if (k == n) return std::pow(alpha, 1.0 / static_cast<double>(n));
  return special::beta_quantile(alpha, static_cast<double>(k), static_cast<double>(n - k + 1));
}

QueryResult rpq(Oracle& oracle, std::span<const double> mean, const NoiseSpec& spec, int label,
                std::size_t n_m, double alpha, std::uint64_t seed, int width) {
  require_same_dim(mean.size(), spec.dim, "rpq");
  require_same_dim(mean.size(), oracle.dim(), "rpq");
  if (n_m == 0) throw ParameterError("rpq: N_m must be at least 1");
  Matrix batch = sample(spec, seed, n_m);
  for (std::size_t i = 0; i < n_m; ++i) {
    auto row = batch.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += mean[j];
    oracle.box().clip(row);
  }
  const auto labels = oracle.classify_batch(batch, width);

  QueryResult r;
  r.n = n_m;
  r.alpha = alpha;
  r.seed = seed;
  for (std::size_t i = 0; i < n_m; ++i) {
    if (labels[i] != label) {
      ++r.k;
    } else {
      r.failed.append_row(batch.row(i));
    }
  }
  r.p_lower = lower_conf_bound(r.k, r.n, alpha);
  return r;
}

RandomizedQuery::RandomizedQuery(Oracle& oracle, NoiseSpec spec, int label, std::size_t n_m,
                                 double alpha, std::uint64_t seed, int width)
    : oracle_(oracle), spec_(spec), label_(label), n_m_(n_m), alpha_(alpha), seeds_(seed), width_(width) {
  spec_.validate();
  if (n_m == 0) throw ParameterError("RandomizedQuery: N_m must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("RandomizedQuery: alpha must be in (0, 1)");
}

QueryResult RandomizedQuery::operator()(std::span<const double> mean) {
  ++calls_;
  return rpq(oracle_, mean, spec_, label_, n_m_, alpha_, seeds_.next(), width_);
}

}  // namespace certattack
