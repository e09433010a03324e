#include "certattack/pipeline.hpp"

#include <cmath>
#include <limits>

#include "certattack/errors.hpp"

namespace certattack {

AdversarialDistribution AdversarialDistribution::make(Vec mean, NoiseSpec spec, double p,
                                                      double certified_bound, Vec clean, int label,
                                                      InputBox box, ConfidenceLedger ledger) {
  spec.validate();
  require_same_dim(mean.size(), spec.dim, "AdversarialDistribution");
  require_same_dim(clean.size(), spec.dim, "AdversarialDistribution");
  if (!(certified_bound >= p)) throw ContractError("AdversarialDistribution: certified bound below p");
  AdversarialDistribution d;
  d.mean_ = std::move(mean);
  d.spec_ = spec;
  d.p_ = p;
  d.p_lower_ = certified_bound;
  d.clean_ = std::move(clean);
  d.label_ = label;
  d.box_ = box;
  d.ledger_ = std::move(ledger);
  return d;
}

SampledExamples sample_aes(const AdversarialDistribution& dist, std::size_t n, bool verify,
                           std::uint64_t seed, Oracle* oracle) {
  if (n == 0) throw ParameterError("sample_aes: n must be at least 1");
  if (verify && !oracle) throw ParameterError("sample_aes: verification needs an oracle");
  SampledExamples out;
  out.points = sample(dist.spec(), seed, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.points.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += dist.mean()[j];
    dist.box().clip(row);
  }
  if (verify) out.labels = oracle->classify_batch(out.points);
  return out;
}

double diffusion_alpha_bar(double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("diffusion_alpha_bar: sigma must be positive");
  return 1.0 / (sigma * sigma + 1.0);
}

Vec diffusion_scale(std::span<const double> x, double alpha_bar) {
  return scaled(x, std::sqrt(alpha_bar));
}

Denoiser identity_denoiser(double alpha_bar) {
  const double inv = 1.0 / std::sqrt(alpha_bar);
  return [inv](std::span<const double> xt) { return scaled(xt, inv); };
}

DenoisedModel::DenoisedModel(std::shared_ptr<const Model> inner, Denoiser denoiser, double alpha_bar)
    : inner_(std::move(inner)), denoiser_(std::move(denoiser)), alpha_bar_(alpha_bar) {
  if (!inner_ || !denoiser_) throw ParameterError("DenoisedModel: missing model or denoiser");
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) throw ParameterError("DenoisedModel: alpha_bar must be in (0, 1]");
}

int DenoisedModel::label(std::span<const double> x) const {
  const Vec restored = denoiser_(diffusion_scale(x, alpha_bar_));
  require_same_dim(restored.size(), inner_->dim(), "denoiser output");
  return inner_->label(restored);
}

std::shared_ptr<const Model> with_denoiser(std::shared_ptr<const Model> inner, const NoiseSpec& noise,
                                           Denoiser denoiser) {
  if (noise.family != NoiseFamily::Gaussian)
    throw ParameterError("denoiser hook requires Gaussian attack noise");
  return std::make_shared<DenoisedModel>(std::move(inner), std::move(denoiser),
                                         diffusion_alpha_bar(noise.a));
}

std::string to_string(LocalizationMethod method) {
  switch (method) {
    case LocalizationMethod::Sssp:
      return "sssp";
    case LocalizationMethod::BinarySearch:
      return "binary_search";
    case LocalizationMethod::Random:
      return "random";
  }
  return "binary_search";
}

LocalizationMethod parse_localization_method(const std::string& name) {
  if (name == "sssp") return LocalizationMethod::Sssp;
  if (name == "binary_search") return LocalizationMethod::BinarySearch;
  if (name == "random") return LocalizationMethod::Random;
  throw ParameterError("unknown localization method '" + name + "'");
}

std::unique_ptr<FeatureExtractor> make_extractor(const ExtractorConfig& config, std::size_t dim) {
  if (config.kind == ExtractorKind::Identity) return std::make_unique<IdentityExtractor>(dim);
  return std::make_unique<RandomMlpExtractor>(dim, config.features, config.seed);
}

AttackEntry run_attack(std::span<const double> clean, int label, Oracle& oracle,
                       const AttackConfig& config) {
  require_same_dim(clean.size(), oracle.dim(), "run_attack");
  require_same_dim(clean.size(), config.noise.dim, "run_attack");
  if (!oracle.box().contains(clean)) throw DomainError("run_attack: clean input outside the box");
  if (label < 0 || label >= oracle.num_classes()) throw ParameterError("run_attack: label out of range");
  if (!(config.p > 0.0 && config.p < 1.0)) throw ParameterError("run_attack: p must be in (0, 1)");

  SeedSequence seeds(config.seed);
  const std::uint64_t query_seed = seeds.next();
  const std::uint64_t localize_seed = seeds.next();
  const std::uint64_t shift_seed = seeds.next();
  const std::uint64_t sample_seed = seeds.next();

  const std::uint64_t queries_before = oracle.query_count();
  RandomizedQuery query(oracle, config.noise, label, config.n_m, config.alpha, query_seed, config.width);

  AttackEntry entry;
  entry.label = label;
  entry.clean.assign(clean.begin(), clean.end());
  entry.samples_per_rpq = config.n_m;
  entry.dist_l2 = std::numeric_limits<double>::quiet_NaN();
  entry.mean_dist_l2 = std::numeric_limits<double>::quiet_NaN();

  LocalizationOutcome found;
  switch (config.localization) {
    case LocalizationMethod::Sssp: {
      const auto extractor = make_extractor(config.extractor, clean.size());
      found = sssp_localize(clean, *extractor, query, config.p, config.sssp, localize_seed);
      break;
    }
    case LocalizationMethod::BinarySearch:
      found = binary_search_localize(clean, query, config.p, config.binary, localize_seed);
      break;
    case LocalizationMethod::Random:
      found = random_localize(query, config.p, config.binary.random_attempts, localize_seed);
      break;
  }
  entry.localization_rpq = found.rpq_count;

  if (!found.found) {
    entry.stop_reason = "localization_abstain";
    entry.rpq_count = query.calls();
    entry.query_count = oracle.query_count() - queries_before;
    return entry;
  }

  const ShiftCertifier certifier(config.noise, config.certifier);
  Vec mean = found.mean;
  double bound = found.query.p_lower;
  double rpq_p_lower = found.query.p_lower;
  ConfidenceLedger ledger = certifier.make_ledger(config.alpha, config.n_m);
  if (config.refine) {
    ShiftLoopResult shifted =
        shift_loop(found.mean, found.query, clean, query, config.p, certifier, config.shifting, shift_seed);
    mean = std::move(shifted.mean);
    bound = shifted.certified_bound;
    rpq_p_lower = shifted.last_query.p_lower;
    ledger = std::move(shifted.ledger);
    entry.steps = std::move(shifted.steps);
    entry.stop_reason = shifted.stop_reason;
  } else {
    entry.stop_reason = "refinement_disabled";
  }

  auto dist = AdversarialDistribution::make(mean, config.noise, config.p, bound, entry.clean, label,
                                            oracle.box(), std::move(ledger));
  entry.mean_dist_l2 = distance2(dist.mean(), clean);
  if (config.dist_samples > 0) {
    const auto samples = sample_aes(dist, config.dist_samples, false, sample_seed);
    double total = 0.0;
    for (std::size_t i = 0; i < samples.points.rows(); ++i) total += distance2(samples.points.row(i), clean);
    entry.dist_l2 = total / static_cast<double>(samples.points.rows());
  }
  entry.certified = true;
  entry.rpq_p_lower = rpq_p_lower;
  entry.rpq_count = query.calls();
  entry.query_count = oracle.query_count() - queries_before;
  entry.distribution = std::move(dist);
  return entry;
}

ReportAggregates aggregate(const std::vector<AttackEntry>& entries) {
  ReportAggregates a;
  a.inputs = entries.size();
  for (const auto& e : entries) {
    a.rpq_count += static_cast<double>(e.rpq_count);
    a.query_count += static_cast<double>(e.query_count);
    if (!e.certified) continue;
    ++a.certified;
    a.mean_dist_l2 += e.mean_dist_l2;
    a.dist_l2 += e.dist_l2;
  }
  if (a.inputs > 0) {
    a.certified_accuracy = static_cast<double>(a.certified) / static_cast<double>(a.inputs);
    a.rpq_count /= static_cast<double>(a.inputs);
    a.query_count /= static_cast<double>(a.inputs);
  }
  if (a.certified > 0) {
    a.mean_dist_l2 /= static_cast<double>(a.certified);
    a.dist_l2 /= static_cast<double>(a.certified);
  } else {
    a.mean_dist_l2 = a.dist_l2 = std::numeric_limits<double>::quiet_NaN();
  }
  return a;
}

}  // namespace certattack
