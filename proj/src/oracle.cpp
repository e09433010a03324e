#include "certattack/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "certattack/errors.hpp"
#include "certattack/parallel.hpp"

namespace certattack {

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Vec Model::logits(std::span<const double>) const {
  throw CapabilityError("model does not expose logits");
}

std::vector<int> Model::label_batch(const Matrix& xs, int width) const {
  std::vector<int> out(xs.rows());
  parallel_for(xs.rows(), width, [&](std::size_t i) { out[i] = label(xs.row(i)); });
  return out;
}

ConstantModel::ConstantModel(std::size_t dim, int num_classes, int label)
    : dim_(dim), num_classes_(num_classes), label_(label) {
  if (label < 0 || label >= num_classes) throw ParameterError("ConstantModel: label out of range");
}

// --- SyntheticModel ---------------------------------------------------------

namespace {

struct ClassCount {
  std::size_t dim;
  int operator()(const Halfspace& h) const {
    require_same_dim(h.w.size(), dim, "halfspace");
    return 2;
  }
  int operator()(const Polytope& p) const {
    if (p.faces.empty()) throw ParameterError("polytope needs at least one face");
    for (const auto& f : p.faces) require_same_dim(f.w.size(), dim, "polytope face");
    return 2;
  }
  int operator()(const TinyMlp& m) const {
    if (m.layers.empty()) throw ParameterError("mlp needs at least one layer");
    std::size_t in = dim;
    for (const auto& layer : m.layers) {
      require_same_dim(layer.weight.cols(), in, "mlp layer");
      require_same_dim(layer.bias.size(), layer.weight.rows(), "mlp bias");
      in = layer.weight.rows();
    }
    if (in < 2) throw ParameterError("mlp needs at least two output classes");
    return static_cast<int>(in);
  }
};

Vec mlp_forward(const TinyMlp& m, std::span<const double> x) {
  Vec h(x.begin(), x.end());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    Vec next(layer.weight.rows());
    for (std::size_t r = 0; r < next.size(); ++r) next[r] = dot(layer.weight.row(r), h) + layer.bias[r];
    if (l + 1 < m.layers.size()) {
      for (double& v : next) v = m.activation == Activation::Relu ? std::max(v, 0.0) : std::tanh(v);
    }
    h = std::move(next);
  }
  return h;
}

double polytope_score(const Polytope& p, std::span<const double> x) {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& f : p.faces) s = std::max(s, dot(f.w, x) + f.b);
  return s;
}

}  // namespace

SyntheticModel::SyntheticModel(Kind kind, std::size_t dim)
    : kind_(std::move(kind)), dim_(dim), num_classes_(std::visit(ClassCount{dim}, kind_)) {
  if (dim == 0) throw ParameterError("model dimension must be positive");
}

Vec SyntheticModel::logits(std::span<const double> x) const {
  require_same_dim(x.size(), dim_, "classify");
  if (const auto* h = std::get_if<Halfspace>(&kind_)) return {0.0, dot(h->w, x) + h->b};
  if (const auto* p = std::get_if<Polytope>(&kind_)) return {0.0, polytope_score(*p, x)};
  return mlp_forward(std::get<TinyMlp>(kind_), x);
}

int SyntheticModel::label(std::span<const double> x) const {
  require_same_dim(x.size(), dim_, "classify");
  if (const auto* h = std::get_if<Halfspace>(&kind_)) return dot(h->w, x) + h->b > 0.0 ? 1 : 0;
  if (const auto* p = std::get_if<Polytope>(&kind_)) return polytope_score(*p, x) > 0.0 ? 1 : 0;
  return argmax(mlp_forward(std::get<TinyMlp>(kind_), x));
}

std::string SyntheticModel::kind_name() const {
  if (std::holds_alternative<Halfspace>(kind_)) return "halfspace";
  if (std::holds_alternative<Polytope>(kind_)) return "polytope";
  return "mlp";
}

double SyntheticModel::signed_distance(std::span<const double> x) const {
  const auto* h = std::get_if<Halfspace>(&kind_);
  if (!h) throw CapabilityError("signed_distance is defined for halfspace models only");
  return (dot(h->w, x) + h->b) / norm2(h->w);
}

// --- model files -------------------------------------------------------------

namespace {

std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    out += line;
    out += '\n';
  }
  return out;
}

class NumberReader {
 public:
  explicit NumberReader(std::istream& in) : in_(in) {}
  double next(const char* what) {
    double v;
    if (!(in_ >> v)) throw FormatError(std::string("model file: expected number for ") + what);
    return v;
  }
  std::size_t next_count(const char* what) {
    const double v = next(what);
    if (v < 1 || v != std::floor(v)) throw FormatError(std::string("model file: bad count for ") + what);
    return static_cast<std::size_t>(v);
  }
  bool exhausted() {
    in_ >> std::ws;
    return in_.eof();
  }

 private:
  std::istream& in_;
};

Halfspace read_halfspace(NumberReader& r, std::size_t d) {
  Halfspace h;
  h.w.resize(d);
  for (auto& v : h.w) v = r.next("weight");
  h.b = r.next("bias");
  return h;
}

}  // namespace

SyntheticModel parse_model(const std::string& text) {
  std::istringstream in(strip_comments(text));
  std::string kind;
  long long classes = 0, dim = 0;
  if (!(in >> kind >> classes >> dim)) throw FormatError("model file: expected header 'kind C d'");
  if (dim <= 0 || classes < 2) throw FormatError("model file: header needs C >= 2 and d >= 1");
  const auto d = static_cast<std::size_t>(dim);
  NumberReader r(in);
  if (kind == "halfspace") {
    if (classes != 2) throw FormatError("model file: halfspace models have C = 2");
    auto h = read_halfspace(r, d);
    if (!r.exhausted()) throw FormatError("model file: trailing data after halfspace");
    return SyntheticModel(std::move(h), d);
  }
  if (kind == "polytope") {
    if (classes != 2) throw FormatError("model file: polytope models have C = 2");
    Polytope p;
    while (!r.exhausted()) p.faces.push_back(read_halfspace(r, d));
    if (p.faces.empty()) throw FormatError("model file: polytope has no faces");
    return SyntheticModel(std::move(p), d);
  }
  if (kind == "mlp") {
    TinyMlp m;
    std::string act;
    in >> std::ws;
    if (std::isalpha(in.peek())) {
      in >> act;
      if (act == "relu") {
        m.activation = Activation::Relu;
      } else if (act == "tanh") {
        m.activation = Activation::Tanh;
      } else {
        throw FormatError("model file: unknown activation '" + act + "'");
      }
    }
    const std::size_t layers = r.next_count("layer count");
    std::size_t in_dim = d;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t out = r.next_count("layer width");
      DenseLayer layer{Matrix(out, in_dim), Vec(out)};
      for (std::size_t i = 0; i < out; ++i)
        for (std::size_t j = 0; j < in_dim; ++j) layer.weight(i, j) = r.next("weight");
      for (auto& v : layer.bias) v = r.next("bias");
      m.layers.push_back(std::move(layer));
      in_dim = out;
    }
    if (in_dim != static_cast<std::size_t>(classes))
      throw FormatError("model file: final layer width differs from C");
    if (!r.exhausted()) throw FormatError("model file: trailing data after mlp");
    return SyntheticModel(std::move(m), d);
  }
  throw FormatError("model file: unknown kind '" + kind + "'");
}

SyntheticModel read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string format_model(const SyntheticModel& model) {
  std::ostringstream out;
  out.precision(17);
  const auto write_face = [&](const Halfspace& h) {
    for (double v : h.w) out << v << ' ';
    out << h.b << '\n';
  };
  const auto& kind = model.kind();
  if (const auto* h = std::get_if<Halfspace>(&kind)) {
    out << "halfspace 2 " << model.dim() << '\n';
    write_face(*h);
  } else if (const auto* p = std::get_if<Polytope>(&kind)) {
    out << "polytope 2 " << model.dim() << '\n';
    for (const auto& f : p->faces) write_face(f);
  } else {
    const auto& m = std::get<TinyMlp>(kind);
    out << "mlp " << model.num_classes() << ' ' << model.dim() << ' '
        << (m.activation == Activation::Relu ? "relu" : "tanh") << '\n'
        << m.layers.size() << '\n';
    for (const auto& layer : m.layers) {
      out << layer.weight.rows() << '\n';
      for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
        for (std::size_t j = 0; j < layer.weight.cols(); ++j) out << layer.weight(i, j) << ' ';
        out << '\n';
      }
      for (double v : layer.bias) out << v << ' ';
      out << '\n';
    }
  }
  return out.str();
}

namespace {

Vec random_unit(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n01;
  Vec w(dim);
  double s = 0.0;
  do {
    for (auto& v : w) v = n01(rng);
    s = norm2(w);
  } while (s == 0.0);
  for (auto& v : w) v /= s;
  return w;
}

}  // namespace

SyntheticModel random_halfspace(std::size_t dim, std::uint64_t seed, double lo, double hi) {
  Rng rng = make_rng(seed);
  Halfspace h;
  h.w = random_unit(dim, rng);
  std::uniform_real_distribution<double> center(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo));
  Vec anchor(dim);
  for (auto& v : anchor) v = center(rng);
  h.b = -dot(h.w, anchor);
  return SyntheticModel(std::move(h), dim);
}

SyntheticModel random_polytope(std::size_t dim, std::size_t faces, std::uint64_t seed, double lo,
                               double hi) {
  if (faces == 0) throw ParameterError("random_polytope: need at least one face");
  Rng rng = make_rng(seed);
  const double span = hi - lo;
  std::uniform_real_distribution<double> center(lo + 0.3 * span, hi - 0.3 * span);
  std::uniform_real_distribution<double> radius(0.15 * span, 0.35 * span);
  Vec c(dim);
  for (auto& v : c) v = center(rng);
  Polytope p;
  for (std::size_t i = 0; i < faces; ++i) {
    Halfspace f;
    f.w = random_unit(dim, rng);
    f.b = -dot(f.w, c) - radius(rng);
    p.faces.push_back(std::move(f));
  }
  return SyntheticModel(std::move(p), dim);
}

// --- defenses ----------------------------------------------------------------

RandPreModel::RandPreModel(std::shared_ptr<const Model> inner, double sigma, std::uint64_t seed)
    : inner_(std::move(inner)), sigma_(sigma), rng_(make_rng(seed)) {
  if (!inner_) throw ParameterError("RandPreModel: null inner model");
  if (!(sigma >= 0.0)) throw ParameterError("RandPreModel: sigma must be non-negative");
}

Vec RandPreModel::perturb(std::span<const double> x) const {
  Vec z(x.begin(), x.end());
  if (sigma_ == 0.0) return z;
  std::normal_distribution<double> noise(0.0, sigma_);
  std::lock_guard lock(mutex_);
  for (double& v : z) v += noise(rng_);
  return z;
}

int RandPreModel::label(std::span<const double> x) const { return inner_->label(perturb(x)); }

std::vector<int> RandPreModel::label_batch(const Matrix& xs, int width) const {
  Matrix perturbed(xs.rows(), xs.cols());
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const Vec z = perturb(xs.row(i));
    std::copy(z.begin(), z.end(), perturbed.row(i).begin());
  }
  return inner_->label_batch(perturbed, width);
}

RandPostModel::RandPostModel(std::shared_ptr<const Model> inner, double sigma, std::uint64_t seed)
    : inner_(std::move(inner)), sigma_(sigma), rng_(make_rng(seed)) {
  if (!inner_) throw ParameterError("RandPostModel: null inner model");
  if (!inner_->has_logits()) throw CapabilityError("RandPostModel: inner model exposes no logits");
  if (!(sigma >= 0.0)) throw ParameterError("RandPostModel: sigma must be non-negative");
}

int RandPostModel::label(std::span<const double> x) const {
  Vec z = inner_->logits(x);
  if (sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_);
    std::lock_guard lock(mutex_);
    for (double& v : z) v += noise(rng_);
  }
  return argmax(z);
}

std::vector<int> RandPostModel::label_batch(const Matrix& xs, int width) const {
  const auto classes = static_cast<std::size_t>(inner_->num_classes());
  Matrix noise(xs.rows(), classes);
  if (sigma_ > 0.0) {
    std::normal_distribution<double> dist(0.0, sigma_);
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < xs.rows(); ++i)
      for (std::size_t c = 0; c < classes; ++c) noise(i, c) = dist(rng_);
  }
  std::vector<int> out(xs.rows());
  parallel_for(xs.rows(), width, [&](std::size_t i) {
    Vec z = inner_->logits(xs.row(i));
    for (std::size_t c = 0; c < classes; ++c) z[c] += noise(i, c);
    out[i] = argmax(z);
  });
  return out;
}

// --- box, detector, oracle -----------------------------------------------------

bool InputBox::contains(std::span<const double> x) const {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v >= lo && v <= hi; });
}

void InputBox::clip(std::span<double> x) const {
  for (double& v : x) v = std::clamp(v, lo, hi);
}

double InputBox::diameter(std::size_t dim) const {
  return (hi - lo) * std::sqrt(static_cast<double>(dim));
}

BlacklightDetector::BlacklightDetector(DetectorParams params) : params_(params) {
  if (params_.window == 0) throw ParameterError("detector window must be positive");
  if (!(params_.quant_step > 0.0)) throw ParameterError("detector quantization step must be positive");
  if (params_.threshold == 0) throw ParameterError("detector threshold must be positive");
}

std::vector<std::uint64_t> BlacklightDetector::fingerprints(std::span<const double> x) const {
  std::vector<std::int64_t> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    q[i] = static_cast<std::int64_t>(std::floor(x[i] / params_.quant_step));
  const std::size_t w = std::min(params_.window, q.size());
  std::vector<std::uint64_t> out;
  for (std::size_t start = 0; start + w <= q.size(); ++start) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over (position-free) window content
    for (std::size_t j = start; j < start + w; ++j) {
      auto bits = static_cast<std::uint64_t>(q[j]);
      for (int byte = 0; byte < 8; ++byte) {
        h ^= (bits >> (8 * byte)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DetectionResult BlacklightDetector::score(const std::vector<std::uint64_t>& prints) const {
  DetectionResult r;
  for (auto h : prints) r.matched += store_.count(h);
  r.detected = r.matched >= params_.threshold;
  return r;
}

DetectionResult BlacklightDetector::check(std::span<const double> x) {
  const auto prints = fingerprints(x);
  std::lock_guard lock(mutex_);
  const auto r = score(prints);
  store_.insert(prints.begin(), prints.end());
  ++queries_;
  if (r.detected) ++detections_;
  return r;
}

DetectionResult BlacklightDetector::peek(std::span<const double> x) const {
  const auto prints = fingerprints(x);
  std::lock_guard lock(mutex_);
  return score(prints);
}

std::size_t BlacklightDetector::detections() const {
  std::lock_guard lock(mutex_);
  return detections_;
}

std::size_t BlacklightDetector::queries_seen() const {
  std::lock_guard lock(mutex_);
  return queries_;
}

std::size_t BlacklightDetector::store_size() const {
  std::lock_guard lock(mutex_);
  return store_.size();
}

Oracle::Oracle(std::shared_ptr<const Model> model, InputBox box) : model_(std::move(model)), box_(box) {
  if (!model_) throw ParameterError("Oracle: null model");
  if (!(box_.lo < box_.hi)) throw ParameterError("Oracle: empty input box");
}

void Oracle::check_box(std::span<const double> x) const {
  require_same_dim(x.size(), model_->dim(), "classify");
  if (!box_.contains(x)) throw DomainError("query outside the input box");
}

int Oracle::classify(std::span<const double> x) {
  check_box(x);
  if (detector_) detector_->check(x);
  ++queries_;
  return model_->label(x);
}

std::vector<int> Oracle::classify_batch(const Matrix& xs, int width) {
  for (std::size_t i = 0; i < xs.rows(); ++i) check_box(xs.row(i));
  if (detector_) {
    for (std::size_t i = 0; i < xs.rows(); ++i) detector_->check(xs.row(i));
  }
  queries_ += xs.rows();
  return model_->label_batch(xs, width);
}

void Oracle::attach_detector(std::shared_ptr<BlacklightDetector> detector) {
  detector_ = std::move(detector);
}

Matrix deterministic_probe_stream(std::span<const double> x, std::size_t n, double step,
                                  const InputBox& box) {
  Matrix out(n, x.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    std::copy(x.begin(), x.end(), row.begin());
    if (i > 0) {
      const std::size_t j = (i - 1) % x.size();
      row[j] = row[j] + step <= box.hi ? row[j] + step : row[j] - step;
    }
    box.clip(row);
  }
  return out;
}

}  // namespace certattack
