#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covert_lab/config.hpp"

namespace covert {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional confidence band; empty or the same length as x.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
  /// Least-squares slope of log y on log x for series[slope_series].
  std::optional<double> slope;
  std::size_t slope_series = 0;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// One row per grid point. Cells are preformatted; numbers use the shortest
/// round-trip decimal form so the CSV text is a pure function of the
/// config.
struct SweepResult {
  ExperimentKind kind{};
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  PlotSpec plot;
  std::map<std::string, double> summary;
  std::vector<Check> checks;
  RunMetadata metadata;

  bool all_passed() const;
  /// Cell lookup by column name; throws std::out_of_range.
  const std::string& cell(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
};

/// Columns shared by every error-rate experiment.
inline const std::vector<std::string> kTrialEstimateColumns = {
    "detector", "regime", "param_json", "trials", "p_fa", "p_fa_ci", "p_md", "p_md_ci", "seed"};

SweepResult run_experiment(const ExperimentConfig& config);

std::string csv_text(const SweepResult& result);
std::string metadata_json(const SweepResult& result, const ExperimentConfig& config);

/// Standalone SVG. Throws std::invalid_argument on an empty plot and
/// std::runtime_error on I/O failure.
std::string render_svg(const PlotSpec& plot);
void render_plots(const SweepResult& result, const std::string& path);

/// Writes the CSV, SVG and metadata files named in the config under `dir`
/// (created if missing). Returns the paths written.
std::vector<std::string> write_outputs(const SweepResult& result, const ExperimentConfig& config,
                                       const std::string& dir);

/// Shortest round-trip decimal.
std::string format_number(double value);
/// Least-squares slope of log y against log x. Requires two distinct x.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
/// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace covert
