#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certattack/certify.hpp"
#include "certattack/linalg.hpp"
#include "certattack/localize.hpp"
#include "certattack/noise.hpp"
#include "certattack/oracle.hpp"
#include "certattack/refine.hpp"

namespace certattack {

/// Noise distribution centered at a certified mean. Only constructible when the
/// certified bound meets the threshold.
class AdversarialDistribution {
 public:
  /// Throws ContractError if certified_bound < p.
  static AdversarialDistribution make(Vec mean, NoiseSpec spec, double p, double certified_bound,
                                      Vec clean, int label, InputBox box,
                                      ConfidenceLedger ledger = {});

  const Vec& mean() const { return mean_; }
  const NoiseSpec& spec() const { return spec_; }
  double p() const { return p_; }
  double p_lower() const { return p_lower_; }
  const Vec& clean() const { return clean_; }
  int label() const { return label_; }
  const InputBox& box() const { return box_; }
  const ConfidenceLedger& ledger() const { return ledger_; }

 private:
  AdversarialDistribution() = default;

  Vec mean_;
  NoiseSpec spec_;
  double p_ = 0.0;
  double p_lower_ = 0.0;
  Vec clean_;
  int label_ = 0;
  InputBox box_;
  ConfidenceLedger ledger_;
};

struct SampledExamples {
  Matrix points;            // mean + eps, clipped to the box
  std::vector<int> labels;  // filled only when verified
};

/// Draws n adversarial examples. With `verify`, each sample is queried once on
/// `oracle` (counted as ordinary queries); without it no query is issued.
SampledExamples sample_aes(const AdversarialDistribution& dist, std::size_t n, bool verify,
                           std::uint64_t seed, Oracle* oracle = nullptr);

/// Forward-process weight bridging a Gaussian attack scale sigma to a diffusion
/// timestep: alpha_bar = 1 / (sigma^2 + 1).
double diffusion_alpha_bar(double sigma);

/// The input a denoiser receives for an attack sample: sqrt(alpha_bar) * x.
Vec diffusion_scale(std::span<const double> x, double alpha_bar);

/// Maps a diffusion input x_t to an estimate of the clean sample.
using Denoiser = std::function<Vec(std::span<const double>)>;

/// Inverts the scaling only: x_t / sqrt(alpha_bar). Makes the composed model equal
/// the wrapped one; used to exercise the hook without a trained denoiser.
Denoiser identity_denoiser(double alpha_bar);

/// f'(z) = f(D(sqrt(alpha_bar) z)).
class DenoisedModel final : public Model {
 public:
  DenoisedModel(std::shared_ptr<const Model> inner, Denoiser denoiser, double alpha_bar);
  std::size_t dim() const override { return inner_->dim(); }
  int num_classes() const override { return inner_->num_classes(); }
  int label(std::span<const double> x) const override;

 private:
  std::shared_ptr<const Model> inner_;
  Denoiser denoiser_;
  double alpha_bar_;
};

/// Wraps `inner` with the denoiser for the given attack noise. Gaussian only.
std::shared_ptr<const Model> with_denoiser(std::shared_ptr<const Model> inner, const NoiseSpec& noise,
                                           Denoiser denoiser);

enum class LocalizationMethod { Sssp, BinarySearch, Random };

std::string to_string(LocalizationMethod method);
LocalizationMethod parse_localization_method(const std::string& name);

enum class ExtractorKind { Identity, RandomMlp };

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::RandomMlp;
  std::uint64_t seed = 7;
  std::size_t features = 32;

  bool operator==(const ExtractorConfig&) const = default;
};

std::unique_ptr<FeatureExtractor> make_extractor(const ExtractorConfig& config, std::size_t dim);

struct AttackConfig {
  NoiseSpec noise;
  double p = 0.9;
  double alpha = 0.001;
  std::size_t n_m = 500;
  int width = 1;  // RPQ fan-out per attack instance
  LocalizationMethod localization = LocalizationMethod::BinarySearch;
  SsspLocalizeParams sssp;
  BinarySearchParams binary;
  ExtractorConfig extractor;
  ShiftLoopParams shifting;
  CertifierConfig certifier;
  bool refine = true;
  std::size_t dist_samples = 100;
  std::uint64_t seed = 1;

  bool operator==(const AttackConfig&) const = default;
};

struct AttackEntry {
  bool certified = false;
  int label = 0;
  Vec clean;
  /// Mean over dist_samples seed-pinned samples of |x_adv - x|_2 (NaN on abstain).
  double dist_l2 = 0.0;
  /// |x' - x|_2 (NaN on abstain).
  double mean_dist_l2 = 0.0;
  std::size_t rpq_count = 0;
  std::size_t localization_rpq = 0;
  std::uint64_t query_count = 0;
  std::size_t samples_per_rpq = 0;
  double rpq_p_lower = 0.0;
  std::vector<ShiftStep> steps;
  std::string stop_reason;
  std::optional<AdversarialDistribution> distribution;
};

/// Localization, certified shifting and distribution construction for one input.
AttackEntry run_attack(std::span<const double> clean, int label, Oracle& oracle,
                       const AttackConfig& config);

struct ReportAggregates {
  std::size_t inputs = 0;
  std::size_t certified = 0;
  double certified_accuracy = 0.0;
  double mean_dist_l2 = 0.0;  // averaged over certified entries
  double dist_l2 = 0.0;       // averaged over certified entries
  double rpq_count = 0.0;     // averaged over all entries
  double query_count = 0.0;   // averaged over all entries
};

ReportAggregates aggregate(const std::vector<AttackEntry>& entries);

}  // namespace certattack
