#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "covert_lab/detectors.hpp"
#include "covert_lab/ipd_distribution.hpp"

namespace covert {

/// Invalid or unreadable experiment configuration. Maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind : std::uint8_t {
  kPoissonAchievability,
  kPoissonConverse,
  kBuffering,
  kBufferingConverse,
  kTwoPhase,
  kOnePhase,
  kKlExpansion,
  kFisher,
};

std::string_view experiment_kind_name(ExperimentKind kind) noexcept;
ExperimentKind parse_experiment_kind(std::string_view name);

/// Parses "family" or "family:key=value,key=value", e.g.
/// "gamma:shape=2,scale=0.5". Throws ConfigError.
IpdDistribution parse_distribution_spec(std::string_view spec);

inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ExperimentKind kind = ExperimentKind::kFisher;
  std::string name;
  std::uint64_t seed = 0;
  std::size_t trials = 500;

  std::vector<IpdDistribution> channels;
  double lambda = 1.0;
  std::vector<double> horizons;
  std::vector<std::size_t> sizes;
  std::vector<double> rhos;
  std::vector<double> epsilons;
  std::vector<double> gammas;
  double psi = 0.5;
  double alpha = 0.05;
  double backlog_exponent = 0.75;
  std::string detector;
  MeanIpdMode mean_ipd_mode = MeanIpdMode::kSlowdown;

  /// File names relative to the output directory. Empty disables the file.
  std::string csv_path;
  std::string svg_path;
  std::string metadata_path;

  const IpdDistribution& channel() const { return channels.front(); }
  double epsilon() const { return epsilons.front(); }
};

/// Parses and validates a JSON document. Every key must be known for the
/// experiment kind; missing grids required by the kind are errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

/// Re-checks the invariants parse_config enforces, for configs assembled in
/// code or modified after parsing.
void validate_config(const ExperimentConfig& config);

/// Canonical JSON form used for hashing and metadata.
std::string canonical_config_json(const ExperimentConfig& config);

}  // namespace covert
