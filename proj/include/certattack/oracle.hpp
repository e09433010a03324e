#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "certattack/linalg.hpp"
#include "certattack/rng.hpp"

namespace certattack {

/// Hard-label decision function, total on R^d.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t dim() const = 0;
  virtual int num_classes() const = 0;
  virtual int label(std::span<const double> x) const = 0;

  virtual bool has_logits() const { return false; }
  /// Throws CapabilityError unless has_logits().
  virtual Vec logits(std::span<const double> x) const;

  /// Labels for every row. Stochastic models draw their randomness in row order
  /// before fanning out, so the result does not depend on `width`.
  virtual std::vector<int> label_batch(const Matrix& xs, int width) const;
};

/// Always answers `label`. Stand-in for "misclassifies everything" / "never misclassifies".
class ConstantModel final : public Model {
 public:
  ConstantModel(std::size_t dim, int num_classes, int label);
  std::size_t dim() const override { return dim_; }
  int num_classes() const override { return num_classes_; }
  int label(std::span<const double>) const override { return label_; }

 private:
  std::size_t dim_;
  int num_classes_;
  int label_;
};

struct Halfspace {
  Vec w;
  double b = 0.0;
};

struct Polytope {
  std::vector<Halfspace> faces;
};

enum class Activation { Relu, Tanh };

struct DenseLayer {
  Matrix weight;  // out x in
  Vec bias;
};

struct TinyMlp {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::Relu;
};

/// Desk-scale classifiers with controllable decision boundaries.
///
/// Halfspace: label 1 iff w.x + b > 0 (logits {0, w.x + b}).
/// Polytope: label 0 inside the intersection of {w_i.x + b_i <= 0}, 1 outside
///           (logits {0, max_i w_i.x + b_i}).
/// TinyMlp: argmax of the final layer; activation between layers.
class SyntheticModel final : public Model {
 public:
  using Kind = std::variant<Halfspace, Polytope, TinyMlp>;

  SyntheticModel(Kind kind, std::size_t dim);

  std::size_t dim() const override { return dim_; }
  int num_classes() const override { return num_classes_; }
  int label(std::span<const double> x) const override;
  bool has_logits() const override { return true; }
  Vec logits(std::span<const double> x) const override;

  const Kind& kind() const { return kind_; }
  std::string kind_name() const;

  /// Signed distance to the decision boundary (positive on the label-1 side).
  /// Defined for Halfspace only.
  double signed_distance(std::span<const double> x) const;

 private:
  Kind kind_;
  std::size_t dim_;
  int num_classes_;
};

/// Reads a model file: a text header `kind C d` (`mlp C d [relu|tanh]`) followed by
/// whitespace-separated numbers. Lines starting with '#' are comments.
///   halfspace: w_1 .. w_d b
///   polytope:  one (w_1 .. w_d b) group per face
///   mlp:       L, then per layer: out, weight (out x in, row-major), bias (out)
SyntheticModel read_model_file(const std::filesystem::path& path);
SyntheticModel parse_model(const std::string& text);
std::string format_model(const SyntheticModel& model);

/// Random unit normal; the boundary passes through a point drawn uniformly from
/// the central half of [lo, hi]^d.
SyntheticModel random_halfspace(std::size_t dim, std::uint64_t seed, double lo = 0.0,
                                double hi = 1.0);
/// Polytope of `faces` random faces around a random interior center.
SyntheticModel random_polytope(std::size_t dim, std::size_t faces, std::uint64_t seed,
                               double lo = 0.0, double hi = 1.0);

/// Input-side randomization: classifies x + eta, eta ~ N(0, sigma^2 I) fresh per call.
class RandPreModel final : public Model {
 public:
  RandPreModel(std::shared_ptr<const Model> inner, double sigma, std::uint64_t seed);

  std::size_t dim() const override { return inner_->dim(); }
  int num_classes() const override { return inner_->num_classes(); }
  int label(std::span<const double> x) const override;
  std::vector<int> label_batch(const Matrix& xs, int width) const override;

  /// The input the wrapped model would see for `x` with the next noise draw.
  /// Consumes a draw; exposed for defense-composition checks.
  Vec perturb(std::span<const double> x) const;

 private:
  std::shared_ptr<const Model> inner_;
  double sigma_;
  mutable std::mutex mutex_;
  mutable Rng rng_;
};

/// Output-side randomization: argmax(logits(x) + eta), eta ~ N(0, sigma^2 I).
class RandPostModel final : public Model {
 public:
  /// Throws CapabilityError if `inner` exposes no logits.
  RandPostModel(std::shared_ptr<const Model> inner, double sigma, std::uint64_t seed);

  std::size_t dim() const override { return inner_->dim(); }
  int num_classes() const override { return inner_->num_classes(); }
  int label(std::span<const double> x) const override;
  std::vector<int> label_batch(const Matrix& xs, int width) const override;

 private:
  std::shared_ptr<const Model> inner_;
  double sigma_;
  mutable std::mutex mutex_;
  mutable Rng rng_;
};

struct InputBox {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(std::span<const double> x) const;
  void clip(std::span<double> x) const;
  double diameter(std::size_t dim) const;

  bool operator==(const InputBox&) const = default;
};

struct DetectorParams {
  std::size_t window = 16;
  double quant_step = 50.0 / 255.0;
  std::size_t threshold = 25;

  bool operator==(const DetectorParams&) const = default;
};

struct DetectionResult {
  bool detected = false;
  std::size_t matched = 0;
};

/// Query-similarity detector: quantize, hash every sliding window, count how many
/// of the query's window hashes were seen in earlier queries.
class BlacklightDetector {
 public:
  explicit BlacklightDetector(DetectorParams params = {});

  /// Scores `x` against the store, then adds its fingerprints to the store.
  DetectionResult check(std::span<const double> x);
  /// Scores without storing.
  DetectionResult peek(std::span<const double> x) const;

  std::size_t detections() const;
  std::size_t queries_seen() const;
  std::size_t store_size() const;
  const DetectorParams& params() const { return params_; }

  std::vector<std::uint64_t> fingerprints(std::span<const double> x) const;

 private:
  DetectionResult score(const std::vector<std::uint64_t>& prints) const;

  DetectorParams params_;
  mutable std::mutex mutex_;
  std::unordered_set<std::uint64_t> store_;
  std::size_t detections_ = 0;
  std::size_t queries_ = 0;
};

/// Box-checked, query-counting front of a Model.
class Oracle {
 public:
  Oracle(std::shared_ptr<const Model> model, InputBox box = {});

  /// Throws DomainError for inputs outside the box.
  int classify(std::span<const double> x);
  std::vector<int> classify_batch(const Matrix& xs, int width = 1);

  std::uint64_t query_count() const { return queries_.load(); }
  std::size_t dim() const { return model_->dim(); }
  int num_classes() const { return model_->num_classes(); }
  const InputBox& box() const { return box_; }
  const Model& model() const { return *model_; }
  std::shared_ptr<const Model> model_ptr() const { return model_; }

  void attach_detector(std::shared_ptr<BlacklightDetector> detector);
  const BlacklightDetector* detector() const { return detector_.get(); }

 private:
  void check_box(std::span<const double> x) const;

  std::shared_ptr<const Model> model_;
  InputBox box_;
  std::atomic<std::uint64_t> queries_{0};
  std::shared_ptr<BlacklightDetector> detector_;
};

/// Deterministic finite-difference style probe stream (the contrast baseline for
/// the detector): row 0 is x, row i nudges coordinate (i-1) mod d by `step`.
Matrix deterministic_probe_stream(std::span<const double> x, std::size_t n, double step,
                                  const InputBox& box);

}  // namespace certattack
