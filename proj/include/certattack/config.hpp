#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "certattack/errors.hpp"
#include "certattack/oracle.hpp"
#include "certattack/pipeline.hpp"

namespace certattack {

/// Config validation failure anchored at a line of the config file (0 = unknown).
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

enum class DefenseKind { None, RandPre, RandPost, Blacklight };

std::string to_string(DefenseKind kind);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::None;
  double sigma = 0.0;
  DetectorParams detector;
  bool operator==(const DefenseConfig&) const = default;
};

/// Where the classifier comes from: a model file, or a seeded synthetic model.
struct OracleSource {
  std::string model_file;           // resolved against the config directory
  std::string synthetic = "halfspace";  // halfspace | polytope (when model_file is empty)
  std::size_t dim = 16;
  std::size_t faces = 8;
  std::uint64_t seed = 1;
  bool operator==(const OracleSource&) const = default;
};

/// Dataset: a tensor file, or `uniform_count` points drawn uniformly in the box.
struct DatasetSource {
  std::string file;
  std::size_t uniform_count = 0;
  std::uint64_t seed = 1;
  bool operator==(const DatasetSource&) const = default;
};

struct RunConfig {
  int schema_version = 1;
  NoiseFamily noise_family = NoiseFamily::Gaussian;
  double noise_a = 0.25;
  double noise_b = 2.0;
  std::optional<double> target_rms;
  AttackConfig attack;  // attack.noise.dim is resolved from the oracle
  DefenseConfig defense;
  OracleSource oracle;
  InputBox box;
  DatasetSource dataset;
  std::string denoiser = "none";  // none | identity
  std::string output_dir = "out";
  int jobs = 1;
  std::filesystem::path base_dir;  // directory relative paths resolve against

  NoiseSpec noise(std::size_t dim) const;
  bool operator==(const RunConfig&) const = default;
};

/// Parses the YAML key tree. Missing keys take the defaults above.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

}  // namespace certattack
