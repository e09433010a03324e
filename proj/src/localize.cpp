#include "certattack/localize.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "certattack/errors.hpp"

namespace certattack {

RandomMlpExtractor::RandomMlpExtractor(std::size_t dim, std::size_t features, std::uint64_t seed)
    : dim_(dim), width_(4 * dim), out_(features), w1_(4 * dim, dim), w2_(features, 4 * dim),
      b1_(4 * dim), b2_(features) {
  if (dim == 0 || features == 0) throw ParameterError("RandomMlpExtractor: empty dimensions");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / static_cast<double>(dim + width_)));
  std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / static_cast<double>(width_ + out_)));
  std::normal_distribution<double> nb(0.0, 0.1);
  for (std::size_t i = 0; i < width_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) w1_(i, j) = n1(rng);
  for (auto& v : b1_) v = nb(rng);
  for (std::size_t i = 0; i < out_; ++i)
    for (std::size_t j = 0; j < width_; ++j) w2_(i, j) = n2(rng);
  for (auto& v : b2_) v = nb(rng);
}

Vec RandomMlpExtractor::hidden(std::span<const double> x) const {
  require_same_dim(x.size(), dim_, "RandomMlpExtractor");
  Vec h(width_);
  for (std::size_t i = 0; i < width_; ++i) h[i] = std::tanh(dot(w1_.row(i), x) + b1_[i]);
  return h;
}

Vec RandomMlpExtractor::features(std::span<const double> x) const {
  const Vec h = hidden(x);
  Vec f(out_);
  for (std::size_t i = 0; i < out_; ++i) f[i] = dot(w2_.row(i), h) + b2_[i];
  return f;
}

Vec RandomMlpExtractor::vjp(std::span<const double> x, std::span<const double> v) const {
  require_same_dim(v.size(), out_, "RandomMlpExtractor::vjp");
  const Vec h = hidden(x);
  Vec back(width_, 0.0);  // (W2^T v) * tanh'
  for (std::size_t i = 0; i < out_; ++i) {
    const auto row = w2_.row(i);
    for (std::size_t j = 0; j < width_; ++j) back[j] += row[j] * v[i];
  }
  for (std::size_t j = 0; j < width_; ++j) back[j] *= 1.0 - h[j] * h[j];
  Vec g(dim_, 0.0);
  for (std::size_t j = 0; j < width_; ++j) {
    const auto row = w1_.row(j);
    for (std::size_t k = 0; k < dim_; ++k) g[k] += row[k] * back[j];
  }
  return g;
}

double smoothed_distortion(const FeatureExtractor& extractor, std::span<const double> mean,
                           std::span<const double> clean, const Matrix& noise) {
  require_same_dim(mean.size(), clean.size(), "smoothed_distortion");
  if (noise.rows() == 0) throw ParameterError("smoothed_distortion: empty noise batch");
  double total = 0.0;
  for (std::size_t i = 0; i < noise.rows(); ++i) {
    const Vec fa = extractor.features(add(mean, noise.row(i)));
    const Vec fb = extractor.features(add(clean, noise.row(i)));
    total += distance2(fa, fb);
  }
  return total / static_cast<double>(noise.rows());
}

Vec distortion_gradient(const FeatureExtractor& extractor, std::span<const double> mean,
                        std::span<const double> clean, const Matrix& noise) {
  require_same_dim(mean.size(), clean.size(), "distortion_gradient");
  if (noise.rows() == 0) throw ParameterError("distortion_gradient: empty noise batch");
  Vec grad(mean.size(), 0.0);
  for (std::size_t i = 0; i < noise.rows(); ++i) {
    const Vec za = add(mean, noise.row(i));
    Vec diff = sub(extractor.features(za), extractor.features(add(clean, noise.row(i))));
    const double len = norm2(diff);
    if (len == 0.0) continue;
    for (double& v : diff) v /= len;
    const Vec g = extractor.vjp(za, diff);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
  }
  for (double& v : grad) v /= static_cast<double>(noise.rows());
  return grad;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void project(std::span<double> x, std::span<const double> clean, double budget, const InputBox& box) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], clean[j] - budget, clean[j] + budget);
  box.clip(x);
}

}  // namespace

Vec sssp(std::span<const double> start, std::span<const double> clean,
         const FeatureExtractor& extractor, const NoiseSpec& spec, const InputBox& box,
         const SsspParams& params, std::uint64_t seed,
         const std::function<void(std::span<const double>)>& on_step) {
  require_same_dim(start.size(), clean.size(), "sssp");
  require_same_dim(start.size(), extractor.input_dim(), "sssp");
  if (!(params.budget > 0.0)) throw ParameterError("sssp: budget must be positive");
  if (!(params.step > 0.0)) throw ParameterError("sssp: step must be positive");
  Vec cur(start.begin(), start.end());
  if (params.iterations == 0) return cur;
  if (params.noise_samples == 0) throw ParameterError("sssp: N_s must be positive");

  SeedSequence seeds(seed);
  if (std::equal(cur.begin(), cur.end(), clean.begin())) {
    Rng rng = make_rng(seeds.next());
    std::uniform_real_distribution<double> jitter(-params.step, params.step);
    for (double& v : cur) v += jitter(rng);
    project(cur, clean, params.budget, box);
  }
  for (std::size_t n = 0; n < params.iterations; ++n) {
    const Matrix noise = sample(spec, seeds.next(), params.noise_samples);
    const Vec g = distortion_gradient(extractor, cur, clean, noise);
    for (std::size_t j = 0; j < cur.size(); ++j) cur[j] += params.step * sign(g[j]);
    project(cur, clean, params.budget, box);
    if (on_step) on_step(cur);
  }
  return cur;
}

LocalizationOutcome sssp_localize(std::span<const double> clean, const FeatureExtractor& extractor,
                                  RandomizedQuery& query, double p, const SsspLocalizeParams& params,
                                  std::uint64_t seed) {
  if (!(params.budget_init > 0.0) || !(params.budget_step > 0.0))
    throw ParameterError("sssp_localize: budgets must be positive");
  LocalizationOutcome out;
  Vec mean(clean.begin(), clean.end());
  QueryResult r = query(mean);
  out.rpq_count = 1;
  SeedSequence seeds(seed);
  SsspParams inner = params.inner;
  inner.budget = params.budget_init;
  for (std::size_t round = 0; r.p_lower < p && round < params.max_rounds; ++round) {
    inner.budget += params.budget_step;
    mean = sssp(clean, clean, extractor, query.spec(), query.oracle().box(), inner, seeds.next());
    r = query(mean);
    ++out.rpq_count;
  }
  if (r.p_lower >= p) {
    out.found = true;
    out.mean = std::move(mean);
    out.query = std::move(r);
  }
  return out;
}

LocalizationOutcome binary_search_localize(std::span<const double> clean, RandomizedQuery& query,
                                           double p, const BinarySearchParams& params,
                                           std::uint64_t seed) {
  if (params.random_attempts == 0 || params.bisections == 0)
    throw ParameterError("binary_search_localize: N_r and N_b must be at least 1");
  if (!(params.tolerance > 0.0)) throw ParameterError("binary_search_localize: Omega must be positive");
  const InputBox& box = query.oracle().box();
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> uniform(box.lo, box.hi);

  LocalizationOutcome out;
  Vec feasible(clean.size());
  QueryResult feasible_query;
  bool found = false;
  for (std::size_t attempt = 0; attempt < params.random_attempts && !found; ++attempt) {
    for (double& v : feasible) v = uniform(rng);
    feasible_query = query(feasible);
    ++out.rpq_count;
    found = feasible_query.p_lower >= p;
  }
  if (!found) return out;

  Vec infeasible(clean.begin(), clean.end());
  for (std::size_t m = 0; m < params.bisections && distance2(feasible, infeasible) > params.tolerance;
       ++m) {
    Vec mid(clean.size());
    for (std::size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (feasible[j] + infeasible[j]);
    QueryResult r = query(mid);
    ++out.rpq_count;
    if (r.p_lower >= p) {
      feasible = std::move(mid);
      feasible_query = std::move(r);
    } else {
      infeasible = std::move(mid);
    }
  }
  out.found = true;
  out.mean = std::move(feasible);
  out.query = std::move(feasible_query);
  out.infeasible_end = std::move(infeasible);
  return out;
}

LocalizationOutcome random_localize(RandomizedQuery& query, double p, std::size_t attempts,
                                    std::uint64_t seed) {
  if (attempts == 0) throw ParameterError("random_localize: need at least one attempt");
  const InputBox& box = query.oracle().box();
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> uniform(box.lo, box.hi);
  LocalizationOutcome out;
  Vec candidate(query.spec().dim);
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    for (double& v : candidate) v = uniform(rng);
    QueryResult r = query(candidate);
    ++out.rpq_count;
    if (r.p_lower >= p) {
      out.found = true;
      out.mean = candidate;
      out.query = std::move(r);
      break;
    }
  }
  return out;
}

}  // namespace certattack
