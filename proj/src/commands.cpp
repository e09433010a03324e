#include "certattack/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "certattack/parallel.hpp"
#include "certattack/rng.hpp"
#include "certattack/tensor_io.hpp"

namespace certattack {

namespace {

std::filesystem::path resolve(const RunConfig& config, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() || config.base_dir.empty() ? p : config.base_dir / p;
}

std::shared_ptr<const Model> attack_model(const RunConfig& config, std::shared_ptr<const Model> model) {
  if (config.denoiser == "identity") {
    const NoiseSpec noise = config.noise(model->dim());
    model = with_denoiser(std::move(model), noise, identity_denoiser(diffusion_alpha_bar(noise.a)));
  }
  return model;
}

AttackConfig instance_config(const RunConfig& config, std::size_t dim, std::size_t index) {
  AttackConfig a = config.attack;
  a.noise = config.noise(dim);
  a.certifier.width = a.width;
  a.seed = derive_seed(config.attack.seed, index);
  return a;
}

}  // namespace

RunInputs load_inputs(const RunConfig& config) {
  RunInputs run;
  if (!config.oracle.model_file.empty()) {
    run.model = std::make_shared<SyntheticModel>(read_model_file(resolve(config, config.oracle.model_file)));
  } else if (config.oracle.synthetic == "polytope") {
    run.model = std::make_shared<SyntheticModel>(random_polytope(
        config.oracle.dim, config.oracle.faces, config.oracle.seed, config.box.lo, config.box.hi));
  } else {
    run.model = std::make_shared<SyntheticModel>(
        random_halfspace(config.oracle.dim, config.oracle.seed, config.box.lo, config.box.hi));
  }
  const std::size_t dim = run.model->dim();

  std::vector<std::optional<int>> file_labels;
  if (!config.dataset.file.empty()) {
    TensorFile tensor = read_tensor_file(resolve(config, config.dataset.file));
    if (tensor.rows.cols() != dim)
      throw ShapeError("dataset rows have " + std::to_string(tensor.rows.cols()) + " values, model expects " +
                       std::to_string(dim));
    run.inputs = std::move(tensor.rows);
    file_labels = std::move(tensor.labels);
  } else {
    Rng rng = make_rng(config.dataset.seed);
    std::uniform_real_distribution<double> u(config.box.lo, config.box.hi);
    Vec row(dim);
    for (std::size_t i = 0; i < config.dataset.uniform_count; ++i) {
      for (double& v : row) v = u(rng);
      run.inputs.append_row(row);
    }
  }
  for (std::size_t i = 0; i < run.inputs.rows(); ++i) {
    const bool given = i < file_labels.size() && file_labels[i].has_value();
    run.labels.push_back(given ? *file_labels[i] : run.model->label(run.inputs.row(i)));
  }
  return run;
}

std::unique_ptr<Oracle> make_oracle(const RunConfig& config, std::shared_ptr<const Model> model,
                                    std::uint64_t defense_seed) {
  std::shared_ptr<const Model> seen = attack_model(config, std::move(model));
  switch (config.defense.kind) {
    case DefenseKind::RandPre:
      seen = std::make_shared<RandPreModel>(seen, config.defense.sigma, defense_seed);
      break;
    case DefenseKind::RandPost:
      seen = std::make_shared<RandPostModel>(seen, config.defense.sigma, defense_seed);
      break;
    case DefenseKind::None:
    case DefenseKind::Blacklight:
      break;
  }
  auto oracle = std::make_unique<Oracle>(seen, config.box);
  if (config.defense.kind == DefenseKind::Blacklight)
    oracle->attach_detector(std::make_shared<BlacklightDetector>(config.defense.detector));
  return oracle;
}

BatchResult run_batch(const RunConfig& config, int jobs) {
  const RunInputs run = load_inputs(config);
  const std::size_t n = run.inputs.rows();
  BatchResult batch;
  batch.config = config;
  batch.model_text = format_model(*run.model);
  batch.entries.resize(n);
  batch.detections.assign(n, 0);

  parallel_for(n, jobs, [&](std::size_t i) {
    const AttackConfig attack = instance_config(config, run.model->dim(), i);
    auto oracle = make_oracle(config, run.model, derive_seed(attack.seed, 0xdef));
    batch.entries[i] = run_attack(run.inputs.row(i), run.labels[i], *oracle, attack);
    if (const auto* detector = oracle->detector()) batch.detections[i] = detector->detections();
    spdlog::info("input {}: {} after {} RPQ ({})", i, batch.entries[i].certified ? "certified" : "abstain",
                 batch.entries[i].rpq_count, batch.entries[i].stop_reason);
  });
  batch.aggregates = aggregate(batch.entries);
  return batch;
}

void write_outputs(const BatchResult& batch, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "transcript");
  for (std::size_t i = 0; i < batch.entries.size(); ++i)
    write_file_atomic(out_dir / "transcript" / (std::to_string(i) + ".json"),
                      transcript_json(batch.entries[i], i));
  write_file_atomic(out_dir / "metrics.csv", metrics_csv(batch));
  write_file_atomic(out_dir / "report.json", report_json(batch));
}

bool VerifyOutcome::passed() const {
  for (const auto& line : lines)
    if (!line.passed) return false;
  return true;
}

VerifyOutcome verify_report(const std::filesystem::path& report_path, std::size_t n_samples,
                            std::uint64_t seed, int width) {
  if (n_samples == 0) throw ParameterError("verify: n_samples must be positive");
  std::ifstream in(report_path);
  if (!in) throw FormatError("cannot open " + report_path.string());
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(report_path.string() + ": " + e.what());
  }

  VerifyOutcome outcome;
  try {
    const RunConfig config = parse_config(report.at("config").get<std::string>());
    const auto model = std::make_shared<SyntheticModel>(parse_model(report.at("model").get<std::string>()));
    for (const auto& e : report.at("entries")) {
      if (e.at("status").get<std::string>() != "certified") continue;
      const auto index = e.at("index").get<std::size_t>();
      const auto& noise = e.at("noise");
      NoiseSpec spec;
      spec.family = parse_noise_family(noise.at("family").get<std::string>());
      spec.a = noise.at("a").get<double>();
      spec.b = noise.at("b").get<double>();
      spec.dim = noise.at("dim").get<std::size_t>();

      VerifyLine line;
      line.index = index;
      line.p = e.at("p").get<double>();
      line.floor = line.p - 3.0 * std::sqrt(line.p * (1.0 - line.p) / static_cast<double>(n_samples));
      const auto label = e.at("label").get<int>();

      const std::uint64_t entry_seed = derive_seed(seed, index);
      auto oracle = make_oracle(config, model, derive_seed(entry_seed, 0xdef));
      Matrix xs = sample(spec, derive_seed(entry_seed, 1), n_samples);
      const auto mean = e.at("mean").get<Vec>();
      require_same_dim(mean.size(), xs.cols(), "verify");
      for (std::size_t r = 0; r < xs.rows(); ++r) {
        auto row = xs.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += mean[j];
        config.box.clip(row);
      }
      const auto labels = oracle->classify_batch(xs, width);
      std::size_t wrong = 0;
      for (int y : labels) wrong += y != label;
      line.empirical = static_cast<double>(wrong) / static_cast<double>(n_samples);
      line.passed = line.empirical >= line.floor;
      outcome.lines.push_back(line);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(report_path.string() + ": " + e.what());
  }
  return outcome;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "sigma") return SweepAxis::Sigma;
  if (name == "p") return SweepAxis::P;
  if (name == "family") return SweepAxis::Family;
  throw ParameterError("unknown sweep axis '" + name + "' (sigma, p, family)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Sigma:
      return "sigma";
    case SweepAxis::P:
      return "p";
    case SweepAxis::Family:
      return "family";
  }
  return "sigma";
}

namespace {

double parse_value(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) throw ParameterError("bad sweep value '" + text + "'");
  return v;
}

}  // namespace

RunConfig apply_sweep_value(const RunConfig& base, SweepAxis axis, const std::string& value) {
  RunConfig c = base;
  switch (axis) {
    case SweepAxis::Sigma: {
      const double sigma = parse_value(value);
      if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
      if (c.noise_family == NoiseFamily::Gaussian) {
        c.noise_a = sigma;
        c.target_rms.reset();
      } else {
        c.target_rms = sigma;
        c.noise_a = calibrate(c.noise_family, sigma, 1, c.noise_b).a;
      }
      break;
    }
    case SweepAxis::P: {
      const double p = parse_value(value);
      if (!(p > 0.0 && p < 1.0)) throw ParameterError("p must be in (0, 1)");
      c.attack.p = p;
      break;
    }
    case SweepAxis::Family: {
      const double rms = base.target_rms ? *base.target_rms
                         : base.noise_family == NoiseFamily::Gaussian ? base.noise_a
                                                                      : 0.25;
      c.noise_family = parse_noise_family(value);
      c.target_rms = rms;
      c.noise_a = calibrate(c.noise_family, rms, 1, c.noise_b).a;
      if (c.noise_family != NoiseFamily::Gaussian) {
        if (c.attack.certifier.path == CertifyPath::ClosedForm) c.attack.certifier.path = CertifyPath::Auto;
        if (c.denoiser != "none") throw ParameterError("the denoiser hook requires gaussian noise");
      }
      break;
    }
  }
  return c;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "axis,value,inputs,certified,certified_accuracy,mean_dist_l2,dist_l2,rpq_count,query_count\n";
  for (const auto& row : rows) {
    const auto& a = row.aggregates;
    out << to_string(axis) << ',' << row.value << ',' << a.inputs << ',' << a.certified << ','
        << format_double(a.certified_accuracy) << ',' << format_double(a.mean_dist_l2) << ','
        << format_double(a.dist_l2) << ',' << format_double(a.rpq_count) << ',' << format_double(a.query_count)
        << '\n';
  }
  return out.str();
}

namespace {

struct Prepared {
  RunConfig config;
  std::filesystem::path out_dir;
  int jobs = 1;
};

Prepared prepare(const AttackOptions& options) {
  Prepared p{load_config(options.config), {}, 1};
  if (options.seed) p.config.attack.seed = *options.seed;
  if (options.jobs) {
    if (*options.jobs < 1) throw ParameterError("--jobs must be at least 1");
    p.config.jobs = *options.jobs;
  }
  p.jobs = p.config.jobs;
  p.out_dir = options.out ? *options.out : resolve(p.config, p.config.output_dir);
  return p;
}

void summarize(std::ostream& out, const ReportAggregates& a) {
  out << "certified " << a.certified << "/" << a.inputs << " mean_dist_l2 " << format_double(a.mean_dist_l2)
      << " rpq_count " << format_double(a.rpq_count) << " query_count " << format_double(a.query_count)
      << "\n";
}

}  // namespace

int cmd_attack(const AttackOptions& options, std::ostream& out, std::ostream& err) {
  Prepared run;
  try {
    run = prepare(options);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config;
  }
  try {
    const BatchResult batch = run_batch(run.config, run.jobs);
    write_outputs(batch, run.out_dir);
    summarize(out, batch.aggregates);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config;
  }
  return exit_code::ok;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  if (options.n_samples == 0) {
    err << "error: --n-samples must be positive\n";
    return exit_code::usage;
  }
  VerifyOutcome outcome;
  try {
    outcome = verify_report(options.report, options.n_samples, options.seed, options.jobs);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config;
  }
  for (const auto& line : outcome.lines) {
    out << "input " << line.index << ": empirical " << format_double(line.empirical) << " certified p "
        << format_double(line.p) << " floor " << format_double(line.floor) << (line.passed ? " ok" : " FAIL")
        << "\n";
  }
  out << outcome.lines.size() << " certified distributions checked\n";
  return outcome.passed() ? exit_code::ok : exit_code::verification;
}

int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err) {
  SweepAxis axis{};
  try {
    axis = parse_sweep_axis(options.axis);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }
  if (options.values.empty()) {
    err << "error: --values needs at least one value\n";
    return exit_code::usage;
  }
  Prepared base;
  std::vector<RunConfig> configs;
  try {
    base = prepare(options.attack);
    for (const auto& value : options.values) configs.push_back(apply_sweep_value(base.config, axis, value));
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config;
  }
  std::vector<SweepRow> rows;
  try {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const BatchResult batch = run_batch(configs[i], base.jobs);
      write_outputs(batch, base.out_dir / (to_string(axis) + "_" + options.values[i]));
      rows.push_back({options.values[i], batch.aggregates});
      out << to_string(axis) << "=" << options.values[i] << ": ";
      summarize(out, batch.aggregates);
    }
    std::filesystem::create_directories(base.out_dir);
    write_file_atomic(base.out_dir / "sweep.csv", sweep_csv(axis, rows));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config;
  }
  return exit_code::ok;
}

}  // namespace certattack
