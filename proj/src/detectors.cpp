#include "covert_lab/detectors.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "covert_lab/parallel.hpp"
#include "covert_lab/renewal.hpp"
#include "covert_lab/rng.hpp"

namespace covert {

namespace {

constexpr double kZ95 = 1.959963984540054;

void require_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(where) + ": alpha must lie in (0, 1)");
  }
}

}  // namespace

std::string_view hypothesis_name(Hypothesis h) noexcept { return h == Hypothesis::kH0 ? "H0" : "H1"; }

DetectionReport count_threshold_decide(std::size_t count, double lambda, double horizon,
                                       double alpha) {
  require_alpha(alpha, "count_threshold_detect");
  if (!(lambda > 0.0) || !(horizon > 0.0)) {
    throw std::invalid_argument("count_threshold_detect: lambda and T must be positive");
  }
  const double mean = lambda * horizon;
  DetectionReport r;
  r.statistic = static_cast<double>(count);
  r.threshold = mean + std::sqrt(mean / alpha);
  r.decision = r.statistic > r.threshold ? Hypothesis::kH1 : Hypothesis::kH0;
  r.alpha = alpha;
  r.detector = "count-threshold";
  return r;
}

DetectionReport count_threshold_detect(const PacketStream& stream, double lambda, double horizon,
                                       double alpha) {
  if (!(horizon > 0.0)) throw std::invalid_argument("count_threshold_detect: T must be positive");
  return count_threshold_decide(count_arrivals(stream, horizon), lambda, horizon, alpha);
}

std::string_view mean_ipd_mode_name(MeanIpdMode mode) noexcept {
  switch (mode) {
    case MeanIpdMode::kSlowdown: return "slowdown";
    case MeanIpdMode::kInsertionAsQuoted: return "insertion-as-quoted";
    case MeanIpdMode::kInsertion: return "insertion";
  }
  return "slowdown";
}

MeanIpdMode parse_mean_ipd_mode(std::string_view name) {
  for (auto m : {MeanIpdMode::kSlowdown, MeanIpdMode::kInsertionAsQuoted, MeanIpdMode::kInsertion}) {
    if (mean_ipd_mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown mean-IPD mode '" + std::string(name) + "'");
}

DetectionReport mean_ipd_detect(std::span<const double> ipds, double lambda, double sigma2,
                                double alpha, MeanIpdMode mode) {
  if (ipds.empty()) throw std::invalid_argument("mean_ipd_detect: no IPDs");
  require_alpha(alpha, "mean_ipd_detect");
  if (!(lambda > 0.0) || !(sigma2 > 0.0)) {
    throw std::invalid_argument("mean_ipd_detect: lambda and sigma2 must be positive");
  }
  const double n = static_cast<double>(ipds.size());
  const double mean = std::accumulate(ipds.begin(), ipds.end(), 0.0) / n;
  const double u = std::sqrt(sigma2 / (alpha * n));
  DetectionReport r;
  r.statistic = mean;
  r.alpha = alpha;
  r.detector = "mean-ipd/" + std::string(mean_ipd_mode_name(mode));
  switch (mode) {
    case MeanIpdMode::kSlowdown:
      r.threshold = 1.0 / lambda + u;
      r.decision = mean > r.threshold ? Hypothesis::kH1 : Hypothesis::kH0;
      break;
    case MeanIpdMode::kInsertionAsQuoted:
      r.threshold = 1.0 / lambda + u;
      r.decision = mean < r.threshold ? Hypothesis::kH1 : Hypothesis::kH0;
      break;
    case MeanIpdMode::kInsertion:
      r.threshold = 1.0 / lambda - u;
      r.decision = mean < r.threshold ? Hypothesis::kH1 : Hypothesis::kH0;
      break;
  }
  return r;
}

LrtResult poisson_count_lrt(std::size_t n, double lambda, double delta, double horizon) {
  if (!(lambda > 0.0) || !(delta >= 0.0) || !(horizon > 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("poisson_count_lrt: need lambda > 0, delta >= 0, T > 0");
  }
  LrtResult r;
  r.log_ratio = -delta * horizon + static_cast<double>(n) * std::log1p(delta / lambda);
  r.ratio = std::exp(r.log_ratio);
  r.decision = r.log_ratio > 0.0 ? Hypothesis::kH1 : Hypothesis::kH0;
  return r;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  if (successes > trials) throw std::invalid_argument("wilson_interval: successes > trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double spread = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // The bounds touch 0 and 1 exactly at the extremes; the formula leaves
  // rounding residue there.
  const double lower = successes == 0 ? 0.0 : std::max(0.0, centre - spread);
  const double upper = successes == trials ? 1.0 : std::min(1.0, centre + spread);
  return {lower, upper};
}

TrialEstimate estimate_error_sum(const StreamGenerator& h0, const StreamGenerator& h1,
                                 const StreamDetector& detector, std::size_t trials,
                                 std::uint64_t master_seed) {
  if (trials < 100) throw std::invalid_argument("estimate_error_sum: need at least 100 trials");
  // Index k < trials is H0 trial k, otherwise H1 trial k - trials.
  const auto decisions = parallel_map(2 * trials, [&](std::size_t k) -> std::uint8_t {
    const bool alt = k >= trials;
    const std::size_t i = alt ? k - trials : k;
    const Hypothesis truth = alt ? Hypothesis::kH1 : Hypothesis::kH0;
    const std::uint64_t seed = derive_seed(master_seed, {alt ? 1u : 0u, i});
    try {
      const PacketStream stream = alt ? h1(seed) : h0(seed);
      return detector(stream) == Hypothesis::kH1 ? 1 : 0;
    } catch (const std::exception& e) {
      throw TrialError(std::string(hypothesis_name(truth)) + " trial " + std::to_string(i) +
                           ": " + e.what(),
                       truth, i);
    }
  });
  TrialEstimate est;
  est.trials = trials;
  est.seed = master_seed;
  for (std::size_t k = 0; k < trials; ++k) est.false_alarms += decisions[k];
  for (std::size_t k = trials; k < 2 * trials; ++k) est.misses += 1 - decisions[k];
  est.p_fa = static_cast<double>(est.false_alarms) / static_cast<double>(trials);
  est.p_md = static_cast<double>(est.misses) / static_cast<double>(trials);
  est.p_fa_ci = wilson_interval(est.false_alarms, trials);
  est.p_md_ci = wilson_interval(est.misses, trials);
  return est;
}

}  // namespace covert
