#include "certattack/refine.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "certattack/errors.hpp"

namespace certattack {

namespace {

// Unit vectors v_i = (mean - failed_i) / |.|, dropping zero-length rows.
Matrix probe_directions(std::span<const double> mean, const Matrix& failed) {
  Matrix out;
  for (std::size_t i = 0; i < failed.rows(); ++i) {
    Vec v = sub(mean, failed.row(i));
    const double len = norm2(v);
    if (len == 0.0) continue;
    for (double& x : v) x /= len;
    out.append_row(v);
  }
  return out;
}

Vec unit_towards(std::span<const double> from, std::span<const double> to) {
  Vec u = sub(to, from);
  const double len = norm2(u);
  if (len == 0.0) return {};
  for (double& x : u) x /= len;
  return u;
}

double objective(std::span<const double> w, std::span<const double> u, const Matrix& probes) {
  const double wn = norm2(w);
  double total = u.empty() ? 0.0 : dot(u, w) / wn;
  for (std::size_t i = 0; i < probes.rows(); ++i) {
    const double c = std::clamp(dot(probes.row(i), w) / wn, -1.0, 1.0);
    total += std::sqrt(1.0 - c * c);
  }
  return total;
}

// Gradient w.r.t. w of the objective (unit-vector inputs u, v_i).
Vec objective_gradient(std::span<const double> w, std::span<const double> u, const Matrix& probes) {
  const double wn = norm2(w);
  Vec what = scaled(w, 1.0 / wn);
  Vec g(w.size(), 0.0);
  const auto add_cos_grad = [&](std::span<const double> a, double weight) {
    const double c = dot(a, what);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += weight * (a[j] - c * what[j]) / wn;
  };
  if (!u.empty()) add_cos_grad(u, 1.0);
  for (std::size_t i = 0; i < probes.rows(); ++i) {
    const double c = std::clamp(dot(probes.row(i), what), -1.0, 1.0);
    const double s = std::max(std::sqrt(1.0 - c * c), 1e-12);
    add_cos_grad(probes.row(i), -c / s);
  }
  return g;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double direction_objective(std::span<const double> w, std::span<const double> mean,
                           std::span<const double> clean, const Matrix& failed) {
  if (norm2(w) == 0.0) throw ParameterError("direction_objective: zero direction");
  return objective(w, unit_towards(mean, clean), probe_directions(mean, failed));
}

Vec shifting_direction(std::span<const double> mean, std::span<const double> clean,
                       const Matrix& failed, const DirectionParams& params, std::uint64_t seed) {
  require_same_dim(mean.size(), clean.size(), "shifting_direction");
  const Vec u = unit_towards(mean, clean);
  const Matrix probes = probe_directions(mean, failed);
  if (probes.rows() == 0) {
    if (u.empty()) throw DegenerateGeometryError("shifting_direction: mean equals clean input and no probes");
    return u;
  }

  Rng rng = make_rng(seed);
  std::normal_distribution<double> n01;
  Vec w(mean.size());
  do {
    for (double& v : w) v = n01(rng);
  } while (norm2(w) == 0.0);
  w = scaled(w, 1.0 / norm2(w));

  Vec best = w;
  double best_value = objective(w, u, probes);
  if (!u.empty()) {
    const double at_u = objective(u, u, probes);
    if (at_u > best_value) {
      best = u;
      best_value = at_u;
    }
  }
  for (std::size_t it = 0; it < params.iterations; ++it) {
    const Vec g = objective_gradient(w, u, probes);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += params.step * sign(g[j]);
    const double len = norm2(w);
    if (len == 0.0) break;
    for (double& v : w) v /= len;
    const double value = objective(w, u, probes);
    if (value > best_value) {
      best = w;
      best_value = value;
    }
  }
  return best;
}

std::string to_string(CertifyPath path) {
  switch (path) {
    case CertifyPath::Auto:
      return "auto";
    case CertifyPath::ClosedForm:
      return "closed_form";
    case CertifyPath::MonteCarlo:
      return "monte_carlo";
  }
  return "auto";
}

CertifyPath parse_certify_path(const std::string& name) {
  if (name == "auto") return CertifyPath::Auto;
  if (name == "closed_form") return CertifyPath::ClosedForm;
  if (name == "monte_carlo") return CertifyPath::MonteCarlo;
  throw ParameterError("unknown certify path '" + name + "'");
}

ShiftCertifier::ShiftCertifier(NoiseSpec spec, CertifierConfig config)
    : spec_(spec), config_(config), closed_form_(false) {
  spec_.validate();
  const bool gaussian = spec_.family == NoiseFamily::Gaussian;
  switch (config_.path) {
    case CertifyPath::Auto:
      closed_form_ = gaussian;
      break;
    case CertifyPath::ClosedForm:
      if (!gaussian) throw ParameterError("closed-form certification requires Gaussian noise");
      closed_form_ = true;
      break;
    case CertifyPath::MonteCarlo:
      closed_form_ = false;
      break;
  }
  if (!closed_form_) {
    if (config_.n_cdf == 0) throw ParameterError("certifier: N_cdf must be positive");
    if (!(config_.cdf_error > 0.0 && config_.cdf_error < 1.0))
      throw ParameterError("certifier: cdf_error must be in (0, 1)");
  }
}

double ShiftCertifier::certified_probability(double p_adv_lower, std::span<const double> delta,
                                             std::uint64_t seed) const {
  if (closed_form_) return gaussian_certified_probability(p_adv_lower, norm2(delta), spec_.a);
  const double margin = config_.conservative ? config_.cdf_error : 0.0;
  const CdfPair cdfs = estimate_cdfs(spec_, delta, config_.n_cdf, seed, margin, config_.width);
  return certattack::certified_probability(cdfs, p_adv_lower);
}

ConfidenceLedger ShiftCertifier::make_ledger(double alpha, std::size_t n_m) const {
  ConfidenceLedger ledger;
  ledger.alpha = alpha;
  ledger.n_m = n_m;
  ledger.cdf_samples = closed_form_ ? 0 : config_.n_cdf;
  ledger.cdf_error = closed_form_ ? 0.0 : config_.cdf_error;
  return ledger;
}

DistanceResult shifting_distance(const QueryResult& query, double p, std::span<const double> w,
                                 const ShiftCertifier& certifier, const DistanceParams& params,
                                 std::uint64_t seed) {
  require_same_dim(w.size(), certifier.spec().dim, "shifting_distance");
  if (query.p_lower < p) throw ContractError("shifting_distance: requires p_lower >= p");
  if (std::abs(norm2(w) - 1.0) > 1e-9) throw ContractError("shifting_distance: direction must be a unit vector");
  if (!(params.tolerance > 0.0)) throw ParameterError("shifting_distance: tolerance e must be positive");

  const double scale = nominal_scale(certifier.spec());
  const double cap = params.cap > 0.0 ? params.cap : 1e6 * scale;
  DistanceResult out;
  out.delta.assign(w.size(), 0.0);
  out.certified_bound = query.p_lower;
  if (query.p_lower == p) return out;

  const auto bound_at = [&](double magnitude) {
    ++out.evaluations;
    return certifier.certified_probability(query.p_lower, scaled(w, magnitude), seed);
  };

  if (certifier.closed_form()) {
    double m = gaussian_max_shift(query.p_lower, p, certifier.spec().a) * (1.0 - 1e-9);
    if (m >= cap) {
      m = cap;
      out.hit_cap = true;
    }
    out.delta = scaled(w, m);
    out.certified_bound = bound_at(m);
    return out;
  }

  double feasible = 0.0;
  double feasible_bound = query.p_lower;
  double infeasible = params.initial_step > 0.0 ? params.initial_step : 0.1 * scale;
  for (int doubling = 0;; ++doubling) {
    if (infeasible >= cap) infeasible = cap;
    const double b = bound_at(infeasible);
    if (b < p) break;
    feasible = infeasible;
    feasible_bound = b;
    if (infeasible == cap || doubling > 60) {
      out.hit_cap = true;
      out.delta = scaled(w, feasible);
      out.certified_bound = feasible_bound;
      return out;
    }
    infeasible *= 2.0;
  }
  for (std::size_t n = 0; n < params.bisections && feasible_bound > p + params.tolerance; ++n) {
    const double mid = 0.5 * (feasible + infeasible);
    const double b = bound_at(mid);
    if (b >= p) {
      feasible = mid;
      feasible_bound = b;
    } else {
      infeasible = mid;
    }
  }
  out.delta = scaled(w, feasible);
  out.certified_bound = feasible_bound;
  return out;
}

ShiftLoopResult shift_loop(std::span<const double> start, const QueryResult& initial,
                           std::span<const double> clean, RandomizedQuery& query, double p, const ShiftCertifier& certifier,
                           const ShiftLoopParams& params, std::uint64_t seed) {
  require_same_dim(start.size(), clean.size(), "shift_loop");
  ShiftLoopResult out;
  out.ledger = certifier.make_ledger(query.alpha(), query.samples_per_call());
  out.mean.assign(start.begin(), start.end());
  QueryResult r = initial;
  if (r.p_lower < p) throw ContractError("shift_loop: starting mean does not satisfy Q(x') >= p");
  out.certified_bound = r.p_lower;

  DistanceParams distance = params.distance;
  if (distance.cap <= 0.0) distance.cap = query.oracle().box().diameter(start.size());

  SeedSequence seeds(seed);
  out.stop_reason = "max_iterations";
  for (std::size_t n = 0; n < params.max_iterations; ++n) {
    if (r.p_lower <= p) {
      out.stop_reason = "slack_exhausted";
      break;
    }
    const bool toward_clean = r.failed.rows() == 0;
    const double gap = distance2(out.mean, clean);
    if (toward_clean && gap == 0.0) {
      out.stop_reason = "at_clean_input";
      break;
    }
    const Vec w = shifting_direction(out.mean, clean, r.failed, params.direction, seeds.next());
    const std::uint64_t cert_seed = seeds.next();
    DistanceResult d = shifting_distance(r, p, w, certifier, distance, cert_seed);
    double magnitude = norm2(d.delta);
    if (magnitude < params.min_shift) {
      out.stop_reason = "min_shift";
      break;
    }
    if (toward_clean && magnitude >= gap) {
      // Landing exactly on the clean input is a shorter move along the same ray.
      const Vec to_clean = sub(clean, out.mean);
      const double b = certifier.certified_probability(r.p_lower, to_clean, cert_seed);
      if (b >= p) {
        d.delta = to_clean;
        d.certified_bound = b;
        magnitude = gap;
      }
    } else if (!toward_clean && gap <= magnitude) {
      out.stop_reason = "reached_clean_radius";
      break;
    }

    for (std::size_t j = 0; j < out.mean.size(); ++j) out.mean[j] += d.delta[j];
    out.ledger.record_shift();
    QueryResult fresh = query(out.mean);
    ++out.rpq_count;

    ShiftStep step;
    step.direction = w;
    step.delta = d.delta;
    step.pre_p_lower = r.p_lower;
    step.post_p_lower = fresh.p_lower;
    step.certified_bound = d.certified_bound;
    step.certified = d.certified_bound >= p;
    step.toward_clean = toward_clean;
    out.steps.push_back(std::move(step));

    out.certified_bound = std::max(d.certified_bound, fresh.p_lower);
    r = std::move(fresh);
  }
  out.last_query = std::move(r);
  return out;
}

ShiftLoopResult shift_loop(std::span<const double> start, std::span<const double> clean,
                           RandomizedQuery& query, double p, const ShiftCertifier& certifier,
                           const ShiftLoopParams& params, std::uint64_t seed) {
  const QueryResult initial = query(start);
  ShiftLoopResult out = shift_loop(start, initial, clean, query, p, certifier, params, seed);
  ++out.rpq_count;
  return out;
}

}  // namespace certattack
