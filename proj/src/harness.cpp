#include "covert_lab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "covert_lab/covert_stats.hpp"
#include "covert_lab/detectors.hpp"
#include "covert_lab/parallel.hpp"
#include "covert_lab/renewal.hpp"
#include "covert_lab/rng.hpp"
#include "covert_lab/strategies.hpp"
#include "json.hpp"

namespace covert {

using nlohmann::json;

namespace {

std::string fmt(double v) { return format_number(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::uint64_t trial_seed(const ExperimentConfig& c, std::size_t grid, std::size_t trial) {
  return derive_seed(c.seed, {grid, trial});
}

std::vector<std::string> trial_estimate_row(const std::string& detector, const std::string& regime,
                                            const json& params, const TrialEstimate& e) {
  return {detector,          regime,
          params.dump(),     fmt(e.trials),
          fmt(e.p_fa),       fmt(e.p_fa_ci.half_width()),
          fmt(e.p_md),       fmt(e.p_md_ci.half_width()),
          std::to_string(e.seed)};
}

void add_error_sum_point(PlotSeries& s, double x, const TrialEstimate& e) {
  s.x.push_back(x);
  s.y.push_back(e.error_sum());
  s.lower.push_back(std::max(0.0, e.error_sum() - e.error_sum_half_width()));
  s.upper.push_back(std::min(2.0, e.error_sum() + e.error_sum_half_width()));
}

std::string pass_detail(const std::string& what, double value, const std::string& bound) {
  return what + " = " + fmt(value) + " (" + bound + ")";
}

// ---------------------------------------------------------------------------

SweepResult poisson_achievability(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = kTrialEstimateColumns;
  r.plot = {"Poisson insertion: warden error sum", "T (s)", "P_FA + P_MD", true, false, {}, {}, 0};
  const double lambda = c.lambda;
  const IpdDistribution jack_law = IpdDistribution::exponential(lambda);
  std::size_t grid = 0;
  for (double eps : c.epsilons) {
    PlotSeries series{"eps=" + fmt(eps), {}, {}, {}, {}};
    for (double horizon : c.horizons) {
      const auto plan = PoissonInsertionPlan::make(lambda, horizon, eps);
      const double delta = plan.delta();
      StreamGenerator h0 = [&](std::uint64_t s) {
        return sample_stream(jack_law, Horizon{horizon}, s);
      };
      StreamGenerator h1 = [&](std::uint64_t s) {
        return poisson_insertion(sample_stream(jack_law, Horizon{horizon}, derive_seed(s, {0})),
                                 plan, derive_seed(s, {1}));
      };
      StreamDetector detector;
      if (c.detector == "lrt") {
        detector = [&](const PacketStream& s) {
          return poisson_count_lrt(count_arrivals(s, horizon), lambda, delta, horizon).decision;
        };
      } else {
        detector = [&](const PacketStream& s) {
          return count_threshold_detect(s, lambda, horizon, c.alpha).decision;
        };
      }
      const std::uint64_t master = derive_seed(c.seed, {grid});
      const TrialEstimate e = estimate_error_sum(h0, h1, detector, c.trials, master);
      json params = {{"lambda", lambda}, {"T", horizon}, {"epsilon", eps}, {"delta", delta}};
      if (c.detector != "lrt") params["alpha"] = c.alpha;
      r.rows.push_back(trial_estimate_row(c.detector, "poisson-achievability", params, e));
      add_error_sum_point(series, horizon, e);

      const double kl = kl_poisson_counts(lambda, delta, horizon).kl.value;
      const double floor_bound = covertness_lower_bound(kl);
      const std::string at = " at T=" + fmt(horizon) + ", eps=" + fmt(eps);
      r.checks.push_back({"error sum >= 1 - eps - CI" + at,
                          e.error_sum() >= 1.0 - eps - e.error_sum_half_width(),
                          pass_detail("sum", e.error_sum(),
                                      "need >= " + fmt(1.0 - eps) + " - " +
                                          fmt(e.error_sum_half_width()))});
      r.checks.push_back({"error sum >= 1 - sqrt(D/2) - CI" + at,
                          e.error_sum() >= floor_bound - e.error_sum_half_width(),
                          pass_detail("sum", e.error_sum(), "bound " + fmt(floor_bound))});
      ++grid;
    }
    r.plot.series.push_back(std::move(series));
  }
  return r;
}

SweepResult poisson_converse(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = kTrialEstimateColumns;
  r.plot = {"Fixed-size insertion vs count detector", "T (s)", "P_FA + P_MD", true, false, {}, {},
            0};
  const double lambda = c.lambda;
  const IpdDistribution jack_law = IpdDistribution::exponential(lambda);
  std::size_t grid = 0;
  for (double gamma : c.gammas) {
    PlotSeries series{"gamma=" + fmt(gamma), {}, {}, {}, {}};
    std::vector<TrialEstimate> along;
    for (double horizon : c.horizons) {
      const auto n_a = static_cast<std::size_t>(std::llround(std::pow(lambda * horizon, gamma)));
      StreamGenerator h0 = [&](std::uint64_t s) {
        return sample_stream(jack_law, Horizon{horizon}, s);
      };
      StreamGenerator h1 = [&](std::uint64_t s) {
        return fixed_count_insertion(sample_stream(jack_law, Horizon{horizon}, derive_seed(s, {0})),
                                     horizon, n_a, derive_seed(s, {1}));
      };
      StreamDetector detector = [&](const PacketStream& s) {
        return count_threshold_detect(s, lambda, horizon, c.alpha).decision;
      };
      const std::uint64_t master = derive_seed(c.seed, {grid});
      const TrialEstimate e = estimate_error_sum(h0, h1, detector, c.trials, master);
      json params = {{"lambda", lambda}, {"T", horizon},  {"gamma", gamma},
                     {"n_a", n_a},       {"alpha", c.alpha}};
      r.rows.push_back(trial_estimate_row("count-threshold", "poisson-converse", params, e));
      add_error_sum_point(series, horizon, e);
      r.checks.push_back({"P_FA <= alpha at T=" + fmt(horizon) + ", gamma=" + fmt(gamma),
                          e.p_fa <= c.alpha, pass_detail("P_FA", e.p_fa, "alpha " + fmt(c.alpha))});
      along.push_back(e);
      ++grid;
    }
    const std::string g = "gamma=" + fmt(gamma);
    if (gamma > 0.5) {
      const auto& last = along.back();
      r.checks.push_back({"error sum < 0.1 at largest T, " + g, last.error_sum() < 0.1,
                          pass_detail("sum", last.error_sum(), "need < 0.1")});
      bool monotone = true;
      for (std::size_t i = 1; i < along.size(); ++i) {
        if (along[i].p_md > along[i - 1].p_md + along[i - 1].p_md_ci.half_width() +
                                along[i].p_md_ci.half_width()) {
          monotone = false;
        }
      }
      r.checks.push_back({"P_MD non-increasing within CI along T, " + g, monotone, ""});
      r.checks.push_back({"P_MD < 0.05 at largest T, " + g, last.p_md < 0.05,
                          pass_detail("P_MD", last.p_md, "need < 0.05")});
    } else if (gamma < 0.5) {
      bool high = true;
      double lowest = 2.0;
      for (const auto& e : along) {
        lowest = std::min(lowest, e.error_sum());
        high = high && e.error_sum() > 0.8;
      }
      r.checks.push_back({"error sum > 0.8 at every T, " + g, high,
                          pass_detail("min sum", lowest, "need > 0.8")});
    }
    r.plot.series.push_back(std::move(series));
  }
  return r;
}

struct BufferingTrial {
  double m = 0.0;
  double mean_delay = 0.0;
};

SweepResult buffering(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = {"N",        "rho1",     "trials",     "median_m",       "mean_m",
               "m_lower",  "m_upper",  "coverage",   "coverage_ci",    "mean_delay",
               "predicted_delay", "delay_rel_err", "seed"};
  const IpdDistribution& dist = c.channel();
  const double cc = fisher_constant_c_analytic(dist);
  const double eps = c.epsilon();
  PlotSeries med{"median m", {}, {}, {}, {}};
  PlotSeries lo{"eps sqrt(N/4c)", {}, {}, {}, {}};
  PlotSeries hi{"eps sqrt(4N/c)", {}, {}, {}, {}};
  std::vector<double> coverages;
  for (std::size_t g = 0; g < c.sizes.size(); ++g) {
    const std::size_t n = c.sizes[g];
    const double nn = static_cast<double>(n);
    const double rho = eps / std::sqrt(cc * nn);
    if (!(rho < 1.0)) throw std::invalid_argument("buffering: rho1 >= 1 for N=" + fmt(n));
    const auto trials = parallel_map(c.trials, [&](std::size_t i) {
      const std::uint64_t s = trial_seed(c, g, i);
      const BufferingOutcome o = with_stream_retry(
          dist, suggested_stream_length(n, rho), derive_seed(s, {0}),
          [&](const PacketStream& jack) { return buffering_run(jack, n, rho); });
      return BufferingTrial{static_cast<double>(o.m), o.mean_delay};
    });
    const double lower = eps * std::sqrt(nn / (4.0 * cc));
    const double upper = eps * std::sqrt(4.0 * nn / cc);
    std::vector<double> ms;
    std::vector<double> delays;
    std::size_t inside = 0;
    for (const auto& t : trials) {
      ms.push_back(t.m);
      delays.push_back(t.mean_delay);
      if (t.m >= lower && t.m <= upper) ++inside;
    }
    const double coverage = static_cast<double>(inside) / static_cast<double>(c.trials);
    const auto ci = wilson_interval(inside, c.trials);
    const double predicted = rho / (1.0 - rho) * (nn + 1.0) / 2.0 * dist.mean();
    const double delay = mean(delays);
    const double rel = std::abs(delay - predicted) / predicted;
    const double median_m = median(ms);
    r.rows.push_back({fmt(n), fmt(rho), fmt(c.trials), fmt(median_m), fmt(mean(ms)), fmt(lower),
                      fmt(upper), fmt(coverage), fmt(ci.half_width()), fmt(delay), fmt(predicted),
                      fmt(rel), std::to_string(c.seed)});
    med.x.push_back(nn);
    med.y.push_back(std::max(median_m, 0.5));
    lo.x.push_back(nn);
    lo.y.push_back(lower);
    hi.x.push_back(nn);
    hi.y.push_back(upper);
    coverages.push_back(coverage);
    r.checks.push_back({"mean delay within 5% of prediction at N=" + fmt(n), rel <= 0.05,
                        pass_detail("relative error", rel, "need <= 0.05")});
  }
  r.checks.push_back({"coverage >= 0.95 at largest N", coverages.back() >= 0.95,
                      pass_detail("coverage", coverages.back(), "need >= 0.95")});
  bool nondecreasing = true;
  for (std::size_t i = 1; i < coverages.size(); ++i) {
    nondecreasing = nondecreasing && coverages[i] >= coverages[i - 1];
  }
  r.checks.push_back({"coverage non-decreasing in N", nondecreasing, ""});
  r.plot = {"Slowdown buffering backlog", "N", "m", true, true, {med, lo, hi}, {}, 0};
  if (med.x.size() >= 2) {
    const double slope = fit_loglog_slope(med.x, med.y);
    r.plot.slope = slope;
    r.summary["median_m_slope"] = slope;
  }
  return r;
}

SweepResult buffering_converse(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = kTrialEstimateColumns;
  const IpdDistribution& dist = c.channel();
  const std::string detector = "mean-ipd/" + std::string(mean_ipd_mode_name(c.mean_ipd_mode));
  PlotSeries series{"m = N^" + fmt(c.backlog_exponent), {}, {}, {}, {}};
  for (std::size_t g = 0; g < c.sizes.size(); ++g) {
    const std::size_t n = c.sizes[g];
    const auto backlog = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(n), c.backlog_exponent)));
    StreamGenerator h0 = [&](std::uint64_t s) { return sample_stream(dist, Count{n}, s); };
    StreamGenerator h1 = [&](std::uint64_t s) {
      const PacketStream jack = sample_stream(dist, Count{n + backlog}, s);
      return buffering_run(jack, n, rho_for_backlog(jack, n, backlog)).bob_output;
    };
    StreamDetector det = [&](const PacketStream& s) {
      const auto ipds = extract_ipds(s);
      return mean_ipd_detect(ipds, dist.rate(), dist.variance(), c.alpha, c.mean_ipd_mode)
          .decision;
    };
    const TrialEstimate e = estimate_error_sum(h0, h1, det, c.trials, derive_seed(c.seed, {g}));
    json params = {{"N", n}, {"m", backlog}, {"alpha", c.alpha}, {"channel", dist.describe()}};
    r.rows.push_back(trial_estimate_row(detector, "buffering-converse", params, e));
    add_error_sum_point(series, static_cast<double>(n), e);
    r.checks.push_back({"P_FA <= alpha at N=" + fmt(n), e.p_fa <= c.alpha,
                        pass_detail("P_FA", e.p_fa, "alpha " + fmt(c.alpha))});
    r.checks.push_back({"P_MD <= 0.05 at N=" + fmt(n), e.p_md <= 0.05,
                        pass_detail("P_MD", e.p_md, "need <= 0.05")});
  }
  r.plot = {"Mean-IPD detector vs slowdown buffering", "N", "P_FA + P_MD", true, false,
            {series}, {}, 0};
  return r;
}

struct TwoPhaseTrial {
  double n_b = 0.0;
  bool completed = true;
  std::size_t ipd_checked = 0;
  std::size_t ipd_mismatches = 0;
  // Deviations above 1e-9 relative that are still within the rounding of
  // the timestamps themselves.
  std::size_t ipd_rounding_only = 0;
  double max_rel_dev = 0.0;
  std::size_t invariant_failures = 0;
};

TwoPhaseTrial analyze_two_phase(const PacketStream& jack, const TwoPhasePlan& plan,
                                const TwoPhaseOutcome& o) {
  TwoPhaseTrial t;
  t.n_b = static_cast<double>(o.n_b);
  t.completed = o.completed;
  const auto& bob = o.bob_output;
  for (std::size_t k = o.bob_phase2_start; k < bob.size(); ++k) {
    const std::size_t j = o.jack_phase2_start + (k - o.bob_phase2_start);  // 1-based
    const double jack_ipd = jack[j - 1].time - jack[j - 2].time;
    const double bob_ipd = bob[k].time - bob[k - 1].time;
    const double dev = std::abs(bob_ipd - jack_ipd);
    const double ulp = std::nextafter(bob[k].time, INFINITY) - bob[k].time;
    ++t.ipd_checked;
    t.max_rel_dev = std::max(t.max_rel_dev, dev / jack_ipd);
    if (dev > std::max(1e-9 * jack_ipd, ulp)) {
      ++t.ipd_mismatches;
    } else if (dev > 1e-9 * jack_ipd) {
      ++t.ipd_rounding_only;
    }
  }
  const std::size_t n = plan.phase1_count();
  auto fail_unless = [&](bool ok) { t.invariant_failures += ok ? 0 : 1; };
  fail_unless(o.alice_output.size() == plan.n_total);
  fail_unless(o.alice_output.count(Source::kAlice) == o.achieved);
  fail_unless(o.replaced_indices.size() == o.achieved);
  fail_unless(!o.completed || o.replaced_indices.size() == o.n_b);
  for (std::size_t idx : o.replaced_indices) fail_unless(idx > n + o.m && idx <= plan.n_total);
  fail_unless(bob.count(Source::kAlice) == 0);
  for (std::size_t k = 1; k < bob.size(); ++k) fail_unless(bob[k].seq > bob[k - 1].seq);
  fail_unless(bob.size() + o.bob_buffer_remaining + o.alice_stored == plan.n_total);
  return t;
}

SweepResult two_phase(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = {"N",           "rho2",           "trials",          "median_nb",
               "mean_nb",     "incomplete",     "ipd_checked",     "ipd_mismatches",
               "ipd_rounding_only", "max_ipd_rel_dev", "invariant_failures", "seed"};
  const IpdDistribution& dist = c.channel();
  PlotSeries med{"median N_b", {}, {}, {}, {}};
  std::size_t total_mismatches = 0;
  std::size_t total_rounding = 0;
  std::size_t total_invariant = 0;
  for (std::size_t g = 0; g < c.sizes.size(); ++g) {
    const std::size_t n = c.sizes[g];
    const TwoPhasePlan plan = TwoPhasePlan::make(n, c.psi, c.epsilon(), dist);
    const auto trials = parallel_map(c.trials, [&](std::size_t i) {
      const std::uint64_t s = trial_seed(c, g, i);
      const std::size_t initial =
          std::max(n, suggested_stream_length(plan.phase1_count(), plan.rho2));
      return with_stream_retry(dist, initial, derive_seed(s, {0}), [&](const PacketStream& jack) {
        return analyze_two_phase(jack, plan, two_phase_run(jack, plan, derive_seed(s, {1})));
      });
    });
    std::vector<double> nbs;
    std::size_t incomplete = 0, checked = 0, mismatches = 0, rounding = 0, invariant = 0;
    double max_dev = 0.0;
    for (const auto& t : trials) {
      nbs.push_back(t.n_b);
      incomplete += t.completed ? 0 : 1;
      checked += t.ipd_checked;
      mismatches += t.ipd_mismatches;
      rounding += t.ipd_rounding_only;
      invariant += t.invariant_failures;
      max_dev = std::max(max_dev, t.max_rel_dev);
    }
    const double median_nb = median(nbs);
    r.rows.push_back({fmt(n), fmt(plan.rho2), fmt(c.trials), fmt(median_nb), fmt(mean(nbs)),
                      fmt(incomplete), fmt(checked), fmt(mismatches), fmt(rounding), fmt(max_dev),
                      fmt(invariant), std::to_string(c.seed)});
    med.x.push_back(static_cast<double>(n));
    med.y.push_back(std::max(median_nb, 0.5));
    total_mismatches += mismatches;
    total_rounding += rounding;
    total_invariant += invariant;
    r.checks.push_back({"phase-2 IPDs reproduce Jack's at N=" + fmt(n), mismatches == 0,
                        fmt(checked) + " IPDs, " + fmt(mismatches) + " mismatches, " + fmt(rounding) +
                            " within timestamp rounding only, max rel dev " + fmt(max_dev)});
  }
  r.checks.push_back({"construction invariants hold", total_invariant == 0,
                      fmt(total_invariant) + " violations"});
  r.summary["ipd_mismatches"] = static_cast<double>(total_mismatches);
  r.summary["ipd_rounding_only"] = static_cast<double>(total_rounding);
  r.plot = {"Two-phase buffered packets", "N", "N_b", true, true, {med}, {}, 0};
  if (med.x.size() >= 2) {
    const double slope = fit_loglog_slope(med.x, med.y);
    r.plot.slope = slope;
    r.summary["median_nb_slope"] = slope;
    r.checks.push_back({"median N_b log-log slope in [0.45, 0.55]", slope >= 0.45 && slope <= 0.55,
                        pass_detail("slope", slope, "need [0.45, 0.55]")});
  }
  return r;
}

struct OnePhaseTrial {
  double n_a = 0.0;
  std::uint32_t min_buffer = 0;
};

SweepResult one_phase(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = {"N",         "rho4",      "trials",    "p_na_ge_log_n", "p_ci",
               "median_na", "mean_na",   "min_buffer", "seed"};
  const IpdDistribution& dist = c.channel();
  PlotSeries series{"P(N_a >= ln N)", {}, {}, {}, {}};
  std::vector<double> probs;
  std::uint32_t global_min = UINT32_MAX;
  for (std::size_t g = 0; g < c.sizes.size(); ++g) {
    const std::size_t n = c.sizes[g];
    const double threshold = std::log(static_cast<double>(n));
    const auto trials = parallel_map(c.trials, [&](std::size_t i) {
      const std::uint64_t s = trial_seed(c, g, i);
      const OnePhaseOutcome o = with_stream_retry(
          dist, n, derive_seed(s, {0}), [&](const PacketStream& jack) {
            return one_phase_run(jack, n, c.epsilon(), dist, derive_seed(s, {1}));
          });
      const auto mn = o.buffer_trajectory.empty()
                          ? 0u
                          : *std::min_element(o.buffer_trajectory.begin(), o.buffer_trajectory.end());
      return OnePhaseTrial{static_cast<double>(o.n_a), mn};
    });
    std::vector<double> nas;
    std::size_t hits = 0;
    std::uint32_t min_buffer = UINT32_MAX;
    for (const auto& t : trials) {
      nas.push_back(t.n_a);
      if (t.n_a >= threshold) ++hits;
      min_buffer = std::min(min_buffer, t.min_buffer);
    }
    global_min = std::min(global_min, min_buffer);
    const double p = static_cast<double>(hits) / static_cast<double>(c.trials);
    const auto ci = wilson_interval(hits, c.trials);
    r.rows.push_back({fmt(n), fmt(one_phase_rho(n, c.epsilon(), dist)), fmt(c.trials), fmt(p),
                      fmt(ci.half_width()), fmt(median(nas)), fmt(mean(nas)),
                      fmt(static_cast<std::size_t>(min_buffer)), std::to_string(c.seed)});
    series.x.push_back(static_cast<double>(n));
    series.y.push_back(p);
    series.lower.push_back(ci.lower);
    series.upper.push_back(ci.upper);
    probs.push_back(p);
  }
  const double highest = *std::max_element(probs.begin(), probs.end());
  r.checks.push_back({"P(N_a >= ln N) never exceeds 0.95", highest <= 0.95,
                      pass_detail("max", highest, "need <= 0.95")});
  bool increasing = probs.size() >= 2;
  for (std::size_t i = 1; i < probs.size(); ++i) increasing = increasing && probs[i] > probs[i - 1];
  r.checks.push_back({"no monotone increase across the N grid", !increasing, ""});
  r.checks.push_back({"buffer occupancy never negative", true,
                      "minimum " + fmt(static_cast<std::size_t>(global_min))});
  r.plot = {"One-phase insertion", "N", "P(N_a >= ln N)", true, false, {series}, {}, 0};
  return r;
}

SweepResult kl_expansion(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = {"family", "c", "rho", "kl_quadrature", "kl_closed_form", "abs_diff", "ratio"};
  r.plot = {"Scaled-renewal relative entropy / (c rho^2 / 2)", "rho", "ratio", true, false, {}, {},
            0};
  std::vector<double> rhos = c.rhos;
  std::sort(rhos.begin(), rhos.end(), std::greater<>());
  for (const auto& dist : c.channels) {
    const double cc = fisher_constant_c(dist);
    PlotSeries series{dist.describe(), {}, {}, {}, {}};
    std::vector<double> ratios;
    for (double rho : rhos) {
      const double q = kl_scaled_renewal(dist, rho).value;
      const double cf = kl_scaled_renewal_closed_form(dist, rho).value;
      const double ratio = q / (cc * rho * rho / 2.0);
      r.rows.push_back({dist.describe(), fmt(cc), fmt(rho), fmt(q), fmt(cf), fmt(std::abs(q - cf)),
                        fmt(ratio)});
      series.x.push_back(rho);
      series.y.push_back(ratio);
      ratios.push_back(ratio);
    }
    bool band = true;
    bool toward_one = true;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      band = band && ratios[i] >= 0.9 && ratios[i] <= 1.1;
      if (i > 0) toward_one = toward_one && std::abs(ratios[i] - 1.0) < std::abs(ratios[i - 1] - 1.0);
    }
    r.checks.push_back({"ratio within [0.9, 1.1] for " + dist.describe(), band, ""});
    r.checks.push_back({"ratio moves monotonically toward 1 for " + dist.describe(), toward_one, ""});
    r.plot.series.push_back(std::move(series));
  }
  return r;
}

SweepResult fisher(const ExperimentConfig& c) {
  SweepResult r;
  r.columns = {"family", "analytic", "quadrature", "abs_diff"};
  PlotSeries analytic{"analytic", {}, {}, {}, {}};
  PlotSeries numeric{"quadrature", {}, {}, {}, {}};
  double worst = 0.0;
  for (std::size_t i = 0; i < c.channels.size(); ++i) {
    const auto& dist = c.channels[i];
    const double a = fisher_constant_c_analytic(dist);
    const double q = fisher_constant_c_quadrature(dist);
    worst = std::max(worst, std::abs(a - q));
    r.rows.push_back({dist.describe(), fmt(a), fmt(q), fmt(std::abs(a - q))});
    analytic.x.push_back(static_cast<double>(i + 1));
    analytic.y.push_back(a);
    numeric.x.push_back(static_cast<double>(i + 1));
    numeric.y.push_back(q);
  }
  r.summary["max_abs_diff"] = worst;
  r.checks.push_back({"analytic and quadrature agree within 1e-6", worst < 1e-6,
                      pass_detail("max |diff|", worst, "need < 1e-6")});
  r.plot = {"Fisher constant c by family", "family index", "c", false, false, {analytic, numeric},
            {}, 0};
  return r;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_loglog_slope: need two or more points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw std::invalid_argument("fit_loglog_slope: values must be positive");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) throw std::invalid_argument("fit_loglog_slope: x values coincide");
  return (n * sxy - sx * sy) / denom;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool SweepResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const std::string& SweepResult::cell(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw std::out_of_range("no column '" + column + "'");
  return rows.at(row).at(static_cast<std::size_t>(it - columns.begin()));
}

double SweepResult::number(std::size_t row, const std::string& column) const {
  return std::stod(cell(row, column));
}

SweepResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  SweepResult r;
  switch (config.kind) {
    case ExperimentKind::kPoissonAchievability: r = poisson_achievability(config); break;
    case ExperimentKind::kPoissonConverse: r = poisson_converse(config); break;
    case ExperimentKind::kBuffering: r = buffering(config); break;
    case ExperimentKind::kBufferingConverse: r = buffering_converse(config); break;
    case ExperimentKind::kTwoPhase: r = two_phase(config); break;
    case ExperimentKind::kOnePhase: r = one_phase(config); break;
    case ExperimentKind::kKlExpansion: r = kl_expansion(config); break;
    case ExperimentKind::kFisher: r = fisher(config); break;
  }
  r.kind = config.kind;
  r.name = config.name;
  r.metadata.seed = config.seed;
  r.metadata.config_hash = fnv1a_hex(canonical_config_json(config));
  r.metadata.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string csv_text(const SweepResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.columns.size(); ++i) {
    out += (i ? "," : "") + csv_escape(result.columns[i]);
  }
  out += '\n';
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_escape(row[i]);
    out += '\n';
  }
  return out;
}

std::string metadata_json(const SweepResult& result, const ExperimentConfig& config) {
  json j;
  j["name"] = result.name;
  j["kind"] = std::string(experiment_kind_name(result.kind));
  j["config_hash"] = result.metadata.config_hash;
  j["config"] = json::parse(canonical_config_json(config));
  j["seed"] = result.metadata.seed;
  j["wall_seconds"] = result.metadata.wall_seconds;
  j["rows"] = result.rows.size();
  j["summary"] = result.summary;
  json checks = json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  j["checks"] = checks;
  return j.dump(2) + "\n";
}

std::string render_svg(const PlotSpec& plot) {
  std::vector<const PlotSeries*> series;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_svg: ragged series");
    if (!s.x.empty()) series.push_back(&s);
  }
  if (series.empty()) throw std::invalid_argument("render_svg: nothing to plot");

  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto* s : series) {
    for (std::size_t i = 0; i < s->x.size(); ++i) {
      x0 = std::min(x0, tx(s->x[i]));
      x1 = std::max(x1, tx(s->x[i]));
      y0 = std::min(y0, ty(s->y[i]));
      y1 = std::max(y1, ty(s->y[i]));
      if (!s->lower.empty()) {
        y0 = std::min(y0, ty(s->lower[i]));
        y1 = std::max(y1, ty(s->upper[i]));
      }
    }
  }
  // A single point (or a flat series) still needs a nonzero span.
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const double padx = 0.05 * (x1 - x0), pady = 0.08 * (y1 - y0);
  x0 -= padx; x1 += padx; y0 -= pady; y1 += pady;

  constexpr double W = 720, H = 460, L = 80, R = 200, T = 50, B = 60;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  s << "<metadata><![CDATA[\nseries,x,y,lower,upper\n";
  for (const auto* ser : series) {
    for (std::size_t i = 0; i < ser->x.size(); ++i) {
      s << csv_escape(ser->name) << ',' << format_number(ser->x[i]) << ',' << format_number(ser->y[i]) << ','
        << (ser->lower.empty() ? "" : format_number(ser->lower[i])) << ','
        << (ser->upper.empty() ? "" : format_number(ser->upper[i])) << '\n';
    }
  }
  s << "]]></metadata>\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">"
    << xml_escape(plot.title) << "</text>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
    << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Ticks: decades on log axes, five even steps otherwise.
  auto ticks = [](double lo, double hi, bool log_axis) {
    std::vector<double> t;
    if (log_axis) {
      // Decades, plus 2x and 5x marks when the span is short.
      const bool dense = hi - lo < 2.0;
      for (double d = std::floor(lo); d <= std::ceil(hi); d += 1.0) {
        for (double mantissa : {1.0, 2.0, 5.0}) {
          if (mantissa != 1.0 && !dense) continue;
          const double v = mantissa * std::pow(10.0, d);
          if (std::log10(v) >= lo && std::log10(v) <= hi) t.push_back(v);
        }
      }
      if (t.empty()) t.push_back(std::pow(10.0, 0.5 * (lo + hi)));
    } else {
      for (int i = 0; i <= 4; ++i) t.push_back(lo + (hi - lo) * i / 4.0);
    }
    return t;
  };
  for (double v : ticks(x0, x1, plot.log_x)) {
    s << "<line x1=\"" << px(v) << "\" y1=\"" << H - B << "\" x2=\"" << px(v) << "\" y2=\""
      << H - B + 5 << "\" stroke=\"black\"/>"
      << "<text x=\"" << px(v) << "\" y=\"" << H - B + 20
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << tick_label(v) << "</text>\n";
  }
  for (double v : ticks(y0, y1, plot.log_y)) {
    s << "<line x1=\"" << L - 5 << "\" y1=\"" << py(v) << "\" x2=\"" << L << "\" y2=\"" << py(v)
      << "\" stroke=\"black\"/>"
      << "<text x=\"" << L - 8 << "\" y=\"" << py(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << tick_label(v) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << xml_escape(plot.x_label) << "</text>\n";
  s << "<text x=\"20\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 20 "
    << (T + H - B) / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << xml_escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = *series[k];
    const char* color = kColors[k % std::size(kColors)];
    if (!ser.lower.empty()) {
      s << "<polygon class=\"ci-band\" fill=\"" << color << "\" fill-opacity=\"0.18\" points=\"";
      for (std::size_t i = 0; i < ser.x.size(); ++i) s << px(ser.x[i]) << ',' << py(ser.upper[i]) << ' ';
      for (std::size_t i = ser.x.size(); i-- > 0;) s << px(ser.x[i]) << ',' << py(ser.lower[i]) << ' ';
      s << "\"/>\n";
    }
    if (ser.x.size() > 1) {
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
      for (std::size_t i = 0; i < ser.x.size(); ++i) s << px(ser.x[i]) << ',' << py(ser.y[i]) << ' ';
      s << "\"/>\n";
    }
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      s << "<circle cx=\"" << px(ser.x[i]) << "\" cy=\"" << py(ser.y[i]) << "\" r=\"3.5\" fill=\""
        << color << "\"/>\n";
    }
    if (ser.x.size() == 1) {
      s << "<text x=\"" << px(ser.x[0]) + 8 << "\" y=\"" << py(ser.y[0]) - 8
        << "\" font-family=\"sans-serif\" font-size=\"11\">(" << format_number(ser.x[0]) << ", "
        << format_number(ser.y[0]) << ")</text>\n";
    }
    s << "<text x=\"" << W - R + 12 << "\" y=\"" << T + 16 + 18 * k << "\" fill=\"" << color
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(ser.name) << "</text>\n";
  }
  if (plot.slope && plot.slope_series < plot.series.size()) {
    const auto& ser = plot.series[plot.slope_series];
    // Fitted line through the centroid in log-log coordinates.
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      mx += std::log10(ser.x[i]);
      my += std::log10(ser.y[i]);
    }
    mx /= static_cast<double>(ser.x.size());
    my /= static_cast<double>(ser.x.size());
    const double xa = ser.x.front(), xb = ser.x.back();
    const double ya = std::pow(10.0, my + *plot.slope * (std::log10(xa) - mx));
    const double yb = std::pow(10.0, my + *plot.slope * (std::log10(xb) - mx));
    s << "<line class=\"fit\" x1=\"" << px(xa) << "\" y1=\"" << py(ya) << "\" x2=\"" << px(xb)
      << "\" y2=\"" << py(yb) << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
    s << "<text class=\"slope\" x=\"" << W - R + 12 << "\" y=\"" << H - B - 10
      << "\" font-family=\"sans-serif\" font-size=\"13\">slope = "
      << format_number(std::round(*plot.slope * 1e4) / 1e4) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void render_plots(const SweepResult& result, const std::string& path) {
  const std::string svg = render_svg(result.plot);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("render_plots: cannot open '" + path + "'");
  out << svg;
  if (!out) throw std::runtime_error("render_plots: write failed for '" + path + "'");
}

std::vector<std::string> write_outputs(const SweepResult& result, const ExperimentConfig& config,
                                       const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto write_text = [&](const std::string& name, const std::string& text) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
    written.push_back(path);
  };
  if (!config.csv_path.empty()) write_text(config.csv_path, csv_text(result));
  if (!config.svg_path.empty()) {
    const std::string path = (fs::path(dir) / config.svg_path).string();
    render_plots(result, path);
    written.push_back(path);
  }
  if (!config.metadata_path.empty()) write_text(config.metadata_path, metadata_json(result, config));
  return written;
}

}  // namespace covert
