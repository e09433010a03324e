#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "certattack/config.hpp"
#include "certattack/report.hpp"

namespace certattack {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int config = 2;
inline constexpr int verification = 3;
}  // namespace exit_code

/// Resolved inputs of a run: the classifier and the dataset rows with their labels.
struct RunInputs {
  std::shared_ptr<const SyntheticModel> model;
  Matrix inputs;
  std::vector<int> labels;
};

RunInputs load_inputs(const RunConfig& config);

/// The oracle seen by one attack instance: the model behind the configured defense
/// (randomized defenses seeded with `defense_seed`), with a fresh detector when the
/// defense is blacklight.
std::unique_ptr<Oracle> make_oracle(const RunConfig& config, std::shared_ptr<const Model> model,
                                    std::uint64_t defense_seed);

/// Attacks every dataset row, up to `jobs` inputs at a time.
BatchResult run_batch(const RunConfig& config, int jobs);

/// report.json, metrics.csv and transcript/<index>.json under `out_dir`.
void write_outputs(const BatchResult& batch, const std::filesystem::path& out_dir);

struct VerifyLine {
  std::size_t index = 0;
  double p = 0.0;
  double empirical = 0.0;
  double floor = 0.0;  // p - 3 binomial sigma
  bool passed = true;
};

struct VerifyOutcome {
  std::vector<VerifyLine> lines;
  bool passed() const;
};

/// Re-samples every certified distribution in a report and queries the oracle
/// the report was produced against.
VerifyOutcome verify_report(const std::filesystem::path& report, std::size_t n_samples,
                            std::uint64_t seed, int width = 1);

enum class SweepAxis { Sigma, P, Family };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

/// Copy of `base` with one axis set from its textual value. Family values keep the
/// RMS of the base noise (target_rms if given, else 0.25).
RunConfig apply_sweep_value(const RunConfig& base, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;
  ReportAggregates aggregates;
};

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

struct AttackOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

struct VerifyOptions {
  std::filesystem::path report;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct SweepOptions {
  AttackOptions attack;
  std::string axis;
  std::vector<std::string> values;
};

int cmd_attack(const AttackOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err);

}  // namespace certattack
