#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "covert_lab/packet_stream.hpp"

namespace covert {

enum class Hypothesis : std::uint8_t { kH0, kH1 };

std::string_view hypothesis_name(Hypothesis h) noexcept;

struct DetectionReport {
  double statistic = 0.0;
  double threshold = 0.0;
  Hypothesis decision = Hypothesis::kH0;
  double alpha = 0.0;
  std::string detector;
};

/// H1 iff S > lambda T + sqrt(lambda T / alpha), S = arrivals in [0, T].
DetectionReport count_threshold_detect(const PacketStream& stream, double lambda, double horizon,
                                       double alpha);
/// Same rule applied to a precomputed count.
DetectionReport count_threshold_decide(std::size_t count, double lambda, double horizon,
                                       double alpha);

/// Rejection region of the mean-IPD test. U = sqrt(sigma2 / (alpha n)).
enum class MeanIpdMode : std::uint8_t {
  /// H1 iff S > 1/lambda + U. Detects slowdown buffering.
  kSlowdown,
  /// H1 iff S < 1/lambda + U, the insertion rule exactly as usually quoted.
  /// Its false-alarm rate tends to 1 under H0.
  kInsertionAsQuoted,
  /// H1 iff S < 1/lambda - U. Detects insertion with false alarm <= alpha.
  kInsertion,
};

std::string_view mean_ipd_mode_name(MeanIpdMode mode) noexcept;
MeanIpdMode parse_mean_ipd_mode(std::string_view name);

DetectionReport mean_ipd_detect(std::span<const double> ipds, double lambda, double sigma2,
                                double alpha, MeanIpdMode mode);

struct LrtResult {
  double log_ratio = 0.0;
  double ratio = 1.0;
  /// H1 iff ratio > 1; a tie decides H0.
  Hypothesis decision = Hypothesis::kH0;
};

/// Lambda(n) = exp(-delta T) (1 + delta / lambda)^n, the Poisson count
/// likelihood ratio of rate lambda + delta against rate lambda.
LrtResult poisson_count_lrt(std::size_t n, double lambda, double delta, double horizon);

struct WilsonInterval {
  double lower = 0.0;
  double upper = 1.0;
  double half_width() const noexcept { return 0.5 * (upper - lower); }
};

/// 95% Wilson score interval for `successes` out of `trials`.
WilsonInterval wilson_interval(std::size_t successes, std::size_t trials);

struct TrialEstimate {
  std::size_t trials = 0;
  std::size_t false_alarms = 0;
  std::size_t misses = 0;
  double p_fa = 0.0;
  double p_md = 0.0;
  WilsonInterval p_fa_ci;
  WilsonInterval p_md_ci;
  std::uint64_t seed = 0;

  double error_sum() const noexcept { return p_fa + p_md; }
  /// Conservative half-width for the sum: the two half-widths added.
  double error_sum_half_width() const noexcept {
    return p_fa_ci.half_width() + p_md_ci.half_width();
  }
};

/// Wraps an exception raised while generating or scoring one trial.
class TrialError : public std::runtime_error {
 public:
  TrialError(const std::string& what, Hypothesis hypothesis, std::size_t index)
      : std::runtime_error(what), hypothesis_(hypothesis), index_(index) {}
  Hypothesis hypothesis() const noexcept { return hypothesis_; }
  std::size_t index() const noexcept { return index_; }

 private:
  Hypothesis hypothesis_;
  std::size_t index_;
};

using StreamGenerator = std::function<PacketStream(std::uint64_t seed)>;
using StreamDetector = std::function<Hypothesis(const PacketStream&)>;

/// Runs `trials` H0 and `trials` H1 streams through `detector`. Trial i of
/// hypothesis h uses seed derive_seed(master_seed, {h, i}), so the result
/// does not depend on scheduling. Requires trials >= 100.
TrialEstimate estimate_error_sum(const StreamGenerator& h0, const StreamGenerator& h1,
                                 const StreamDetector& detector, std::size_t trials,
                                 std::uint64_t master_seed);

}  // namespace covert
