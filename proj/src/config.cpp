#include "certattack/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace certattack {

ConfigError::ConfigError(int line, const std::string& message)
    : Error(line > 0 ? "config:" + std::to_string(line) + ": " + message : "config: " + message),
      line_(line) {}

std::string to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::None:
      return "none";
    case DefenseKind::RandPre:
      return "rand_pre";
    case DefenseKind::RandPost:
      return "rand_post";
    case DefenseKind::Blacklight:
      return "blacklight";
  }
  return "none";
}

NoiseSpec RunConfig::noise(std::size_t dim) const {
  NoiseSpec spec;
  spec.family = noise_family;
  spec.a = noise_a;
  spec.b = noise_b;
  spec.dim = dim;
  return spec;
}

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

// Reads typed values out of a mapping, rejecting unknown keys.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::set<std::string> known)
      : node_(node), path_(std::move(path)), valid_(node && !node.IsNull()) {
    if (!valid_) return;
    if (!node_.IsMap()) throw ConfigError(line_of(node_), path_ + " must be a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known.count(key)) throw ConfigError(line_of(kv.first), "unknown key '" + prefixed(key) + "'");
    }
  }

  bool has(const std::string& key) const { return valid_ && node_[key]; }
  YAML::Node child(const std::string& key) const { return has(key) ? node_[key] : YAML::Node(); }
  int line(const std::string& key) const { return has(key) ? line_of(node_[key]) : line_of(node_); }

  template <typename T>
  void get(const std::string& key, T& out) const {
    if (!has(key)) return;
    const YAML::Node v = node_[key];
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(line_of(v), "bad value for '" + prefixed(key) + "'");
    }
  }

  void positive(const std::string& key, double value) const {
    if (!(value > 0.0)) throw ConfigError(line(key), "'" + prefixed(key) + "' must be positive");
  }
  void positive_count(const std::string& key, std::size_t value) const {
    if (value == 0) throw ConfigError(line(key), "'" + prefixed(key) + "' must be at least 1");
  }
  void unit_open(const std::string& key, double value) const {
    if (!(value > 0.0 && value < 1.0)) throw ConfigError(line(key), "'" + prefixed(key) + "' must be in (0, 1)");
  }
  std::string prefixed(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  YAML::Node node_;
  std::string path_;
  bool valid_ = false;
};

template <typename Parse>
auto parse_enum(const Section& s, const std::string& key, Parse parse, decltype(parse(std::string())) fallback) {
  if (!s.has(key)) return fallback;
  std::string name;
  s.get(key, name);
  try {
    return parse(name);
  } catch (const Error& e) {
    throw ConfigError(s.line(key), e.what());
  }
}

DefenseKind parse_defense_kind(const std::string& name) {
  if (name == "none") return DefenseKind::None;
  if (name == "rand_pre") return DefenseKind::RandPre;
  if (name == "rand_post") return DefenseKind::RandPost;
  if (name == "blacklight") return DefenseKind::Blacklight;
  throw ParameterError("unknown defense '" + name + "'");
}

ExtractorKind parse_extractor_kind(const std::string& name) {
  if (name == "identity") return ExtractorKind::Identity;
  if (name == "random_mlp") return ExtractorKind::RandomMlp;
  throw ParameterError("unknown extractor '" + name + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.mark.line + 1, e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);

  RunConfig c;
  c.base_dir = base_dir;
  const Section top(root, "",
                    {"schema_version", "noise", "p", "alpha", "n_m", "parallelism", "localization",
                     "shifting", "certify", "defense", "oracle", "input_box", "dataset", "denoiser",
                     "refine", "dist_samples", "seed", "output_dir", "jobs"});
  top.get("schema_version", c.schema_version);
  if (c.schema_version != 1) throw ConfigError(top.line("schema_version"), "unsupported schema_version");

  AttackConfig& a = c.attack;
  top.get("p", a.p);
  top.unit_open("p", a.p);
  top.get("alpha", a.alpha);
  top.unit_open("alpha", a.alpha);
  top.get("n_m", a.n_m);
  top.positive_count("n_m", a.n_m);
  top.get("parallelism", a.width);
  if (a.width < 1) throw ConfigError(top.line("parallelism"), "'parallelism' must be at least 1");
  top.get("refine", a.refine);
  top.get("dist_samples", a.dist_samples);
  top.get("seed", a.seed);
  top.get("denoiser", c.denoiser);
  if (c.denoiser != "none" && c.denoiser != "identity")
    throw ConfigError(top.line("denoiser"), "'denoiser' must be none or identity");
  top.get("output_dir", c.output_dir);
  top.get("jobs", c.jobs);
  if (c.jobs < 1) throw ConfigError(top.line("jobs"), "'jobs' must be at least 1");

  const Section noise(top.child("noise"), "noise", {"family", "a", "b", "target_rms"});
  c.noise_family = parse_enum(noise, "family", parse_noise_family, NoiseFamily::Gaussian);
  noise.get("b", c.noise_b);
  if (c.noise_family == NoiseFamily::GeneralizedNormal) noise.positive("b", c.noise_b);
  if (noise.has("target_rms")) {
    double rms = 0.0;
    noise.get("target_rms", rms);
    noise.positive("target_rms", rms);
    c.target_rms = rms;
  }
  if (noise.has("a")) {
    noise.get("a", c.noise_a);
    noise.positive("a", c.noise_a);
  } else if (c.target_rms) {
    c.noise_a = calibrate(c.noise_family, *c.target_rms, 1, c.noise_b).a;
  }

  const Section loc(top.child("localization"), "localization",
                    {"method", "pi_init", "gamma", "n_max_rounds", "n_steps", "eta", "n_s", "n_r",
                     "n_b", "omega", "extractor"});
  a.localization = parse_enum(loc, "method", parse_localization_method, LocalizationMethod::BinarySearch);
  loc.get("pi_init", a.sssp.budget_init);
  loc.positive("pi_init", a.sssp.budget_init);
  loc.get("gamma", a.sssp.budget_step);
  loc.positive("gamma", a.sssp.budget_step);
  loc.get("n_max_rounds", a.sssp.max_rounds);
  loc.get("n_steps", a.sssp.inner.iterations);
  loc.get("eta", a.sssp.inner.step);
  loc.positive("eta", a.sssp.inner.step);
  loc.get("n_s", a.sssp.inner.noise_samples);
  loc.positive_count("n_s", a.sssp.inner.noise_samples);
  loc.get("n_r", a.binary.random_attempts);
  loc.positive_count("n_r", a.binary.random_attempts);
  loc.get("n_b", a.binary.bisections);
  loc.positive_count("n_b", a.binary.bisections);
  loc.get("omega", a.binary.tolerance);
  loc.positive("omega", a.binary.tolerance);
  const Section ext(loc.child("extractor"), "localization.extractor", {"kind", "seed", "features"});
  a.extractor.kind = parse_enum(ext, "kind", parse_extractor_kind, ExtractorKind::RandomMlp);
  ext.get("seed", a.extractor.seed);
  ext.get("features", a.extractor.features);
  ext.positive_count("features", a.extractor.features);

  const Section shift(top.child("shifting"), "shifting", {"m", "eta_prime", "e", "e_s", "n_h", "n_k"});
  shift.get("m", a.shifting.direction.iterations);
  shift.get("eta_prime", a.shifting.direction.step);
  shift.positive("eta_prime", a.shifting.direction.step);
  shift.get("e", a.shifting.distance.tolerance);
  shift.positive("e", a.shifting.distance.tolerance);
  shift.get("e_s", a.shifting.min_shift);
  shift.positive("e_s", a.shifting.min_shift);
  shift.get("n_h", a.shifting.max_iterations);
  shift.get("n_k", a.shifting.distance.bisections);

  const Section cert(top.child("certify"), "certify", {"path", "n_cdf", "cdf_error", "conservative"});
  a.certifier.path = parse_enum(cert, "path", parse_certify_path, CertifyPath::Auto);
  cert.get("n_cdf", a.certifier.n_cdf);
  cert.positive_count("n_cdf", a.certifier.n_cdf);
  cert.get("cdf_error", a.certifier.cdf_error);
  cert.unit_open("cdf_error", a.certifier.cdf_error);
  cert.get("conservative", a.certifier.conservative);
  if (a.certifier.path == CertifyPath::ClosedForm && c.noise_family != NoiseFamily::Gaussian)
    throw ConfigError(cert.line("path"), "closed_form certification requires gaussian noise");

  const Section def(top.child("defense"), "defense", {"kind", "sigma", "window", "quant_step", "threshold"});
  c.defense.kind = parse_enum(def, "kind", parse_defense_kind, DefenseKind::None);
  def.get("sigma", c.defense.sigma);
  if (c.defense.sigma < 0.0) throw ConfigError(def.line("sigma"), "'defense.sigma' must be non-negative");
  def.get("window", c.defense.detector.window);
  def.positive_count("window", c.defense.detector.window);
  def.get("quant_step", c.defense.detector.quant_step);
  def.positive("quant_step", c.defense.detector.quant_step);
  def.get("threshold", c.defense.detector.threshold);
  def.positive_count("threshold", c.defense.detector.threshold);

  const Section orc(top.child("oracle"), "oracle", {"model_file", "synthetic", "dim", "faces", "seed"});
  orc.get("model_file", c.oracle.model_file);
  orc.get("synthetic", c.oracle.synthetic);
  if (c.oracle.synthetic != "halfspace" && c.oracle.synthetic != "polytope")
    throw ConfigError(orc.line("synthetic"), "'oracle.synthetic' must be halfspace or polytope");
  orc.get("dim", c.oracle.dim);
  orc.positive_count("dim", c.oracle.dim);
  orc.get("faces", c.oracle.faces);
  orc.positive_count("faces", c.oracle.faces);
  orc.get("seed", c.oracle.seed);

  if (top.has("input_box")) {
    const YAML::Node box = top.child("input_box");
    if (!box.IsSequence() || box.size() != 2) throw ConfigError(line_of(box), "'input_box' must be [lo, hi]");
    try {
      c.box.lo = box[0].as<double>();
      c.box.hi = box[1].as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(line_of(box), "bad value for 'input_box'");
    }
    if (!(c.box.lo < c.box.hi)) throw ConfigError(line_of(box), "'input_box' needs lo < hi");
  }

  if (top.has("dataset")) {
    const YAML::Node ds = top.child("dataset");
    if (ds.IsScalar()) {
      c.dataset.file = ds.as<std::string>();
    } else {
      const Section dss(ds, "dataset", {"file", "uniform", "seed"});
      dss.get("file", c.dataset.file);
      dss.get("uniform", c.dataset.uniform_count);
      dss.get("seed", c.dataset.seed);
    }
  }
  if (c.dataset.file.empty() && c.dataset.uniform_count == 0)
    throw ConfigError(top.line("dataset"), "'dataset' needs a file or a uniform count");
  if (c.denoiser != "none" && c.noise_family != NoiseFamily::Gaussian)
    throw ConfigError(top.line("denoiser"), "the denoiser hook requires gaussian noise");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

std::string serialize_config(const RunConfig& c) {
  const AttackConfig& a = c.attack;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << c.schema_version;
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << to_string(c.noise_family);
  out << YAML::Key << "a" << YAML::Value << c.noise_a;
  out << YAML::Key << "b" << YAML::Value << c.noise_b;
  if (c.target_rms) out << YAML::Key << "target_rms" << YAML::Value << *c.target_rms;
  out << YAML::EndMap;
  out << YAML::Key << "p" << YAML::Value << a.p;
  out << YAML::Key << "alpha" << YAML::Value << a.alpha;
  out << YAML::Key << "n_m" << YAML::Value << a.n_m;
  out << YAML::Key << "parallelism" << YAML::Value << a.width;
  out << YAML::Key << "refine" << YAML::Value << a.refine;
  out << YAML::Key << "dist_samples" << YAML::Value << a.dist_samples;
  out << YAML::Key << "seed" << YAML::Value << a.seed;

  out << YAML::Key << "localization" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "method" << YAML::Value << to_string(a.localization);
  out << YAML::Key << "pi_init" << YAML::Value << a.sssp.budget_init;
  out << YAML::Key << "gamma" << YAML::Value << a.sssp.budget_step;
  out << YAML::Key << "n_max_rounds" << YAML::Value << a.sssp.max_rounds;
  out << YAML::Key << "n_steps" << YAML::Value << a.sssp.inner.iterations;
  out << YAML::Key << "eta" << YAML::Value << a.sssp.inner.step;
  out << YAML::Key << "n_s" << YAML::Value << a.sssp.inner.noise_samples;
  out << YAML::Key << "n_r" << YAML::Value << a.binary.random_attempts;
  out << YAML::Key << "n_b" << YAML::Value << a.binary.bisections;
  out << YAML::Key << "omega" << YAML::Value << a.binary.tolerance;
  out << YAML::Key << "extractor" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value
      << (a.extractor.kind == ExtractorKind::Identity ? "identity" : "random_mlp");
  out << YAML::Key << "seed" << YAML::Value << a.extractor.seed;
  out << YAML::Key << "features" << YAML::Value << a.extractor.features;
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "shifting" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "m" << YAML::Value << a.shifting.direction.iterations;
  out << YAML::Key << "eta_prime" << YAML::Value << a.shifting.direction.step;
  out << YAML::Key << "e" << YAML::Value << a.shifting.distance.tolerance;
  out << YAML::Key << "e_s" << YAML::Value << a.shifting.min_shift;
  out << YAML::Key << "n_h" << YAML::Value << a.shifting.max_iterations;
  out << YAML::Key << "n_k" << YAML::Value << a.shifting.distance.bisections;
  out << YAML::EndMap;

  out << YAML::Key << "certify" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "path" << YAML::Value << to_string(a.certifier.path);
  out << YAML::Key << "n_cdf" << YAML::Value << a.certifier.n_cdf;
  out << YAML::Key << "cdf_error" << YAML::Value << a.certifier.cdf_error;
  out << YAML::Key << "conservative" << YAML::Value << a.certifier.conservative;
  out << YAML::EndMap;

  out << YAML::Key << "defense" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(c.defense.kind);
  out << YAML::Key << "sigma" << YAML::Value << c.defense.sigma;
  out << YAML::Key << "window" << YAML::Value << c.defense.detector.window;
  out << YAML::Key << "quant_step" << YAML::Value << c.defense.detector.quant_step;
  out << YAML::Key << "threshold" << YAML::Value << c.defense.detector.threshold;
  out << YAML::EndMap;

  out << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
  if (!c.oracle.model_file.empty()) out << YAML::Key << "model_file" << YAML::Value << c.oracle.model_file;
  out << YAML::Key << "synthetic" << YAML::Value << c.oracle.synthetic;
  out << YAML::Key << "dim" << YAML::Value << c.oracle.dim;
  out << YAML::Key << "faces" << YAML::Value << c.oracle.faces;
  out << YAML::Key << "seed" << YAML::Value << c.oracle.seed;
  out << YAML::EndMap;

  out << YAML::Key << "input_box" << YAML::Value << YAML::Flow << YAML::BeginSeq << c.box.lo << c.box.hi
      << YAML::EndSeq;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  if (!c.dataset.file.empty()) out << YAML::Key << "file" << YAML::Value << c.dataset.file;
  out << YAML::Key << "uniform" << YAML::Value << c.dataset.uniform_count;
  out << YAML::Key << "seed" << YAML::Value << c.dataset.seed;
  out << YAML::EndMap;
  out << YAML::Key << "denoiser" << YAML::Value << c.denoiser;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::Key << "jobs" << YAML::Value << c.jobs;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace certattack
