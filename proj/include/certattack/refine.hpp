#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "certattack/certify.hpp"
#include "certattack/linalg.hpp"
#include "certattack/noise.hpp"
#include "certattack/rpq.hpp"

namespace certattack {

/// Sum_i sin(v_i, w) + cos(u, w), with v_i = normalized (mean - failed_i) and
/// u = normalized (clean - mean). Zero-length vectors contribute nothing.
double direction_objective(std::span<const double> w, std::span<const double> mean,
                           std::span<const double> clean, const Matrix& failed);

struct DirectionParams {
  std::size_t iterations = 20;  // M
  double step = 0.05;           // eta'

  bool operator==(const DirectionParams&) const = default;
};

/// Shifting direction. With no failed samples this is the unit vector towards the
/// clean input. Otherwise: random unit start, `iterations` signed-gradient ascent
/// steps on direction_objective with renormalization; the best of the start, every
/// iterate and u is returned. Throws DegenerateGeometryError when mean == clean and
/// there are no failed samples.
Vec shifting_direction(std::span<const double> mean, std::span<const double> clean,
                       const Matrix& failed, const DirectionParams& params, std::uint64_t seed);

enum class CertifyPath { Auto, ClosedForm, MonteCarlo };

std::string to_string(CertifyPath path);
CertifyPath parse_certify_path(const std::string& name);

struct CertifierConfig {
  CertifyPath path = CertifyPath::Auto;
  std::size_t n_cdf = 100000;
  double cdf_error = 0.01;  // DKW allowance Delta
  bool conservative = true;  // apply cdf_error inside the Monte Carlo certificate
  int width = 1;

  bool operator==(const CertifierConfig&) const = default;
};

/// Post-shift success-probability bound: closed form for Gaussian noise, Monte Carlo
/// likelihood-ratio CDFs otherwise (or whenever the Monte Carlo path is forced).
class ShiftCertifier {
 public:
  ShiftCertifier(NoiseSpec spec, CertifierConfig config);

  bool closed_form() const { return closed_form_; }
  const NoiseSpec& spec() const { return spec_; }
  const CertifierConfig& config() const { return config_; }

  /// Lower bound on P[misclassified] after shifting the mean by `delta`, given a
  /// certified p_adv_lower at the current mean. Deterministic in `seed`.
  double certified_probability(double p_adv_lower, std::span<const double> delta,
                               std::uint64_t seed) const;

  /// Fresh ledger with this certifier's accounting parameters.
  ConfidenceLedger make_ledger(double alpha, std::size_t n_m) const;

 private:
  NoiseSpec spec_;
  CertifierConfig config_;
  bool closed_form_;
};

struct DistanceParams {
  double tolerance = 0.01;        // e
  std::size_t bisections = 20;    // N_k
  double initial_step = 0.0;      // 0: 0.1 x nominal noise scale
  double cap = 0.0;               // 0: no cap beyond 1e6 x nominal scale

  bool operator==(const DistanceParams&) const = default;
};

struct DistanceResult {
  Vec delta;
  double certified_bound = 0.0;  // certified_probability at delta
  bool hit_cap = false;
  std::size_t evaluations = 0;
};

/// Largest certified shift along unit direction `w`, by doubling then bisection on
/// the magnitude. The returned delta always satisfies the certificate.
/// Throws ContractError if query.p_lower < p or |w| != 1.
DistanceResult shifting_distance(const QueryResult& query, double p, std::span<const double> w,
                                 const ShiftCertifier& certifier, const DistanceParams& params,
                                 std::uint64_t seed);

struct ShiftStep {
  Vec direction;
  Vec delta;
  double pre_p_lower = 0.0;
  double post_p_lower = 0.0;
  double certified_bound = 0.0;
  bool certified = false;
  bool toward_clean = false;
};

struct ShiftLoopParams {
  DirectionParams direction;
  DistanceParams distance;
  double min_shift = 0.0025;   // e_s
  std::size_t max_iterations = 72;  // N_h

  bool operator==(const ShiftLoopParams&) const = default;
};

struct ShiftLoopResult {
  Vec mean;
  QueryResult last_query;
  /// Certified lower bound on the success probability at `mean` (>= p).
  double certified_bound = 0.0;
  std::vector<ShiftStep> steps;
  std::size_t rpq_count = 0;
  std::string stop_reason;
  ConfidenceLedger ledger;
};

/// Certified shifting towards the clean input. Every move is certified from the
/// previous RPQ before the mean changes; a fresh RPQ follows each move.
/// Stops when the slack is gone, the certified move is shorter than min_shift,
/// the next geometric move would reach past the clean input, or after
/// max_iterations moves. Moves along u that would overshoot land on the clean input.
/// `initial` is the query result already obtained at `start` (throws ContractError
/// if its bound is below p).
ShiftLoopResult shift_loop(std::span<const double> start, const QueryResult& initial,
                           std::span<const double> clean, RandomizedQuery& query, double p, const ShiftCertifier& certifier,
                           const ShiftLoopParams& params, std::uint64_t seed);

/// Same loop, starting with a fresh query at `start` (counted in rpq_count).
ShiftLoopResult shift_loop(std::span<const double> start, std::span<const double> clean,
                           RandomizedQuery& query, double p, const ShiftCertifier& certifier,
                           const ShiftLoopParams& params, std::uint64_t seed);

}  // namespace certattack
