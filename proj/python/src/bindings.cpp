#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

#include "certattack/commands.hpp"
#include "certattack/config.hpp"
#include "certattack/errors.hpp"
#include "certattack/noise.hpp"
#include "certattack/refine.hpp"
#include "certattack/report.hpp"
#include "certattack/rpq.hpp"
#include "certattack/special.hpp"

namespace py = pybind11;
using namespace certattack;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec to_vec(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return Vec(a.data(), a.data() + a.size());
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.flat().begin(), m.flat().end(), out.mutable_data());
  return out;
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Certified adversarial distributions against black-box classifiers";

  // Translators run newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());

  py::enum_<NoiseFamily>(m, "NoiseFamily")
      .value("gaussian", NoiseFamily::Gaussian)
      .value("cauchy", NoiseFamily::Cauchy)
      .value("hyperbolic_secant", NoiseFamily::HyperbolicSecant)
      .value("generalized_normal", NoiseFamily::GeneralizedNormal);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init([](const std::string& family, double a, double b, std::size_t dim) {
             NoiseSpec s{parse_noise_family(family), a, b, dim};
             s.validate();
             return s;
           }),
           py::arg("family") = "gaussian", py::arg("a") = 0.25, py::arg("b") = 2.0, py::arg("dim") = 1)
      .def_readwrite("family", &NoiseSpec::family)
      .def_readwrite("a", &NoiseSpec::a)
      .def_readwrite("b", &NoiseSpec::b)
      .def_readwrite("dim", &NoiseSpec::dim)
      .def("__repr__", [](const NoiseSpec& s) {
        std::ostringstream o;
        o << "NoiseSpec(" << to_string(s.family) << ", a=" << s.a << ", b=" << s.b << ", dim=" << s.dim << ")";
        return o.str();
      });

  m.def("sample", [](const NoiseSpec& s, std::uint64_t seed, std::size_t n) { return from_matrix(sample(s, seed, n)); },
        py::arg("spec"), py::arg("seed"), py::arg("n"), "n x dim noise draws, deterministic in seed");
  m.def("calibrate", &calibrate, py::arg("family"), py::arg("target_rms"), py::arg("dim"), py::arg("shape") = 2.0);
  m.def(
      "log_density", [](const NoiseSpec& s, const Array& z) { return log_density(s, to_vec(z)); }, py::arg("spec"),
      py::arg("z"));

  m.def("normal_quantile", &special::normal_quantile);
  m.def("beta_quantile", &special::beta_quantile);
  m.def("lower_conf_bound", &lower_conf_bound, py::arg("k"), py::arg("n"), py::arg("alpha"),
        "one-sided Clopper-Pearson lower bound");

  m.def("gaussian_max_shift", &gaussian_max_shift, py::arg("p_adv_lower"), py::arg("p"), py::arg("sigma"));
  m.def("gaussian_certified_probability", &gaussian_certified_probability, py::arg("p_adv_lower"),
        py::arg("shift_norm"), py::arg("sigma"));
  m.def("shift_confidence", &shift_confidence, py::arg("alpha"), py::arg("n"), py::arg("delta"));
  m.def(
      "certified_probability",
      [](const NoiseSpec& s, double p_adv_lower, const Array& delta, std::size_t n_cdf, double cdf_error,
         bool monte_carlo, std::uint64_t seed) {
        CertifierConfig c;
        c.path = monte_carlo ? CertifyPath::MonteCarlo : CertifyPath::Auto;
        c.n_cdf = n_cdf;
        c.cdf_error = cdf_error;
        return ShiftCertifier(s, c).certified_probability(p_adv_lower, to_vec(delta), seed);
      },
      py::arg("spec"), py::arg("p_adv_lower"), py::arg("delta"), py::arg("n_cdf") = 100000,
      py::arg("cdf_error") = 0.01, py::arg("monte_carlo") = false, py::arg("seed") = 1,
      "certified success probability after shifting the mean by delta");

  py::class_<SyntheticModel, std::shared_ptr<SyntheticModel>>(m, "Model")
      .def_static(
          "halfspace",
          [](std::size_t dim, std::uint64_t seed) { return std::make_shared<SyntheticModel>(random_halfspace(dim, seed)); },
          py::arg("dim"), py::arg("seed"))
      .def_static(
          "polytope",
          [](std::size_t dim, std::size_t faces, std::uint64_t seed) {
            return std::make_shared<SyntheticModel>(random_polytope(dim, faces, seed));
          },
          py::arg("dim"), py::arg("faces"), py::arg("seed"))
      .def_static("parse", [](const std::string& text) { return std::make_shared<SyntheticModel>(parse_model(text)); })
      .def("text", [](const SyntheticModel& s) { return format_model(s); })
      .def_property_readonly("dim", &SyntheticModel::dim)
      .def("label", [](const SyntheticModel& s, const Array& x) { return s.label(to_vec(x)); });

  m.def(
      "rpq",
      [](std::shared_ptr<SyntheticModel> model, const Array& mean, const NoiseSpec& spec, int label, std::size_t n_m,
         double alpha, std::uint64_t seed) {
        Oracle oracle(model);
        const QueryResult r = rpq(oracle, to_vec(mean), spec, label, n_m, alpha, seed);
        py::dict d;
        d["k"] = r.k;
        d["n"] = r.n;
        d["p_lower"] = r.p_lower;
        d["queries"] = oracle.query_count();
        return d;
      },
      py::arg("model"), py::arg("mean"), py::arg("spec"), py::arg("label"), py::arg("n_m") = 500,
      py::arg("alpha") = 0.001, py::arg("seed") = 1, "one randomized parallel query");

  m.def(
      "parse_config", [](const std::string& text) { return serialize_config(parse_config(text)); }, py::arg("text"),
      "validates a run config and returns it in normalized form");
  m.def(
      "attack",
      [](const std::string& config_text, const std::string& base_dir, int jobs) {
        const RunConfig config = parse_config(config_text, base_dir);
        BatchResult batch;
        {
          py::gil_scoped_release release;
          batch = run_batch(config, jobs);
        }
        return json_loads(report_json(batch));
      },
      py::arg("config"), py::arg("base_dir") = ".", py::arg("jobs") = 1,
      "runs the attack over the configured dataset and returns the report");
  m.def(
      "verify",
      [](const std::filesystem::path& report, std::size_t n_samples, std::uint64_t seed) {
        VerifyOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = verify_report(report, n_samples, seed);
        }
        py::list lines;
        for (const auto& l : outcome.lines) {
          py::dict d;
          d["index"] = l.index;
          d["p"] = l.p;
          d["empirical"] = l.empirical;
          d["floor"] = l.floor;
          d["passed"] = l.passed;
          lines.append(d);
        }
        return lines;
      },
      py::arg("report"), py::arg("n_samples") = 1000, py::arg("seed") = 1,
      "re-samples every certified distribution of a report.json");
  m.def(
      "attack_files",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out, std::optional<int> jobs) {
        AttackOptions o;
        o.config = config;
        o.out = std::move(out);
        o.jobs = jobs;
        std::ostringstream so, se;
        int code;
        {
          py::gil_scoped_release release;
          code = cmd_attack(o, so, se);
        }
        return py::make_tuple(code, se.str());
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("jobs") = py::none(),
      "the attack subcommand: writes report.json, metrics.csv and transcripts; returns (exit code, diagnostics)");
}
