// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails. `--criterion K` runs only K.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "covert_lab/config.hpp"
#include "covert_lab/covert_stats.hpp"
#include "covert_lab/detectors.hpp"
#include "covert_lab/harness.hpp"
#include "covert_lab/parallel.hpp"
#include "covert_lab/renewal.hpp"
#include "covert_lab/rng.hpp"
#include "covert_lab/strategies.hpp"

using namespace covert;

namespace {

constexpr std::uint64_t kMasterSeed = 0x5EED2024ULL;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) { return format_number(v); }

std::uint64_t seed_for(std::uint64_t criterion, std::uint64_t a = 0, std::uint64_t b = 0) {
  return derive_seed(kMasterSeed, {criterion, a, b});
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const IpdDistribution kExp = IpdDistribution::exponential(1.0);

// 1. Poisson count divergence: closed form and quadratic bound.
Outcome poisson_kl() {
  const double value = kl_poisson_counts(1.0, 0.01, 100.0).kl.value;
  const double expected = 1.0 - 100.0 * std::log(1.01);
  const double rel = std::abs(value - expected) / expected;

  Rng rng(seed_for(1));
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const double lambda = std::exp(-5.0 + 10.0 * rng.uniform_open());
    const double delta = lambda * std::exp(-9.0 + 11.0 * rng.uniform_open());
    const double horizon = std::exp(-2.0 + 14.0 * rng.uniform_open());
    const auto p = kl_poisson_counts(lambda, delta, horizon);
    if (!(p.kl.value <= delta * delta * horizon / (2.0 * lambda))) ++violations;
  }
  return {rel <= 1e-12 && violations == 0,
          "rel err " + num(rel) + " (<= 1e-12), bound violations " + std::to_string(violations) +
              "/1000"};
}

// 2. Insertion at rate eps sqrt(2 lambda / T) keeps the optimal count test blind.
Outcome poisson_achievability() {
  const double lambda = 5.0, horizon = 2000.0;
  const auto plan = PoissonInsertionPlan::make(lambda, horizon, 0.1);
  const auto law = IpdDistribution::exponential(lambda);
  const StreamGenerator h0 = [&](std::uint64_t s) { return sample_stream(law, Horizon{horizon}, s); };
  const StreamGenerator h1 = [&](std::uint64_t s) {
    return poisson_insertion(h0(derive_seed(s, {0})), plan, derive_seed(s, {1}));
  };
  const StreamDetector lrt = [&](const PacketStream& s) {
    return poisson_count_lrt(count_arrivals(s, horizon), lambda, plan.delta(), horizon).decision;
  };
  const auto e = estimate_error_sum(h0, h1, lrt, 5000, seed_for(2));
  const double floor = 0.9 - e.error_sum_half_width();
  return {e.error_sum() >= floor, "P_FA + P_MD = " + num(e.error_sum()) + " (need >= " + num(floor) +
                                      "), P_FA " + num(e.p_fa) + ", P_MD " + num(e.p_md)};
}

// 3. Square-root phase transition for the count detector.
Outcome poisson_converse() {
  const double lambda = 1.0, alpha = 0.05;
  const std::vector<double> horizons = {1e3, 1e4, 1e5};
  const auto law = IpdDistribution::exponential(lambda);
  std::ostringstream detail;
  bool ok = true;
  for (double gamma : {0.25, 0.75}) {
    detail << "gamma " << gamma << ":";
    for (std::size_t g = 0; g < horizons.size(); ++g) {
      const double horizon = horizons[g];
      const auto inserted = static_cast<std::size_t>(std::llround(std::pow(lambda * horizon, gamma)));
      const StreamGenerator h0 = [&](std::uint64_t s) {
        return sample_stream(law, Horizon{horizon}, s);
      };
      const StreamGenerator h1 = [&](std::uint64_t s) {
        return fixed_count_insertion(h0(derive_seed(s, {0})), horizon, inserted, derive_seed(s, {1}));
      };
      const StreamDetector det = [&](const PacketStream& s) {
        return count_threshold_detect(s, lambda, horizon, alpha).decision;
      };
      const auto e = estimate_error_sum(h0, h1, det, 1000,
                                        seed_for(3, static_cast<std::uint64_t>(gamma * 100), g));
      detail << ' ' << num(e.error_sum());
      if (gamma < 0.5) ok = ok && e.error_sum() > 0.8;
      if (gamma > 0.5 && g + 1 == horizons.size()) ok = ok && e.error_sum() < 0.1;
    }
    detail << (gamma < 0.5 ? " (need > 0.8 throughout); " : " (need < 0.1 at T=1e5)");
  }
  return {ok, detail.str()};
}

// 4. Fisher constant against literal oracle values.
Outcome fisher() {
  struct Case {
    IpdDistribution dist;
    double oracle;
  };
  const std::vector<Case> cases = {{kExp, 1.0},
                                   {IpdDistribution::gamma(1.0, 1.0), 1.0},
                                   {IpdDistribution::gamma(2.0, 1.0), 2.0},
                                   {IpdDistribution::gamma(3.0, 1.0), 3.0},
                                   {IpdDistribution::gamma(5.0, 1.0), 5.0}};
  double worst = 0.0;
  for (const auto& c : cases) {
    worst = std::max({worst, std::abs(fisher_constant_c_quadrature(c.dist) - c.oracle),
                      std::abs(fisher_constant_c_analytic(c.dist) - c.oracle),
                      std::abs(fisher_constant_c(c.dist) - c.oracle)});
  }
  return {worst < 1e-6, "max |c - oracle| = " + num(worst) + " (< 1e-6)"};
}

// 5. Second-order expansion of the scaled-renewal divergence.
Outcome kl_expansion() {
  const std::vector<IpdDistribution> laws = {kExp, IpdDistribution::gamma(2.0, 1.0),
                                             IpdDistribution::weibull(2.0, 1.0)};
  bool ok = true;
  std::ostringstream detail;
  for (const auto& d : laws) {
    const double c = fisher_constant_c(d);
    std::vector<double> ratios;
    for (double rho : {0.01, 0.005, 0.0025, 0.00125}) {
      ratios.push_back(kl_scaled_renewal(d, rho).value / (c * rho * rho / 2.0));
    }
    ok = ok && ratios.front() >= 0.9 && ratios.front() <= 1.1;
    for (std::size_t i = 1; i < ratios.size(); ++i) {
      ok = ok && std::abs(ratios[i] - 1.0) < std::abs(ratios[i - 1] - 1.0);
    }
    detail << d.describe() << ':';
    for (double r : ratios) detail << ' ' << num(r);
    detail << "; ";
  }
  return {ok, detail.str()};
}

struct BufferingStats {
  double coverage;
  double mean_delay;
};

BufferingStats buffering_stats(std::size_t n, std::size_t seeds, std::uint64_t criterion) {
  const double eps = 0.5, c = fisher_constant_c(kExp);
  const double rho = eps / std::sqrt(c * static_cast<double>(n));
  const double lo = eps * std::sqrt(static_cast<double>(n) / (4.0 * c));
  const double hi = eps * std::sqrt(4.0 * static_cast<double>(n) / c);
  const auto runs = parallel_map(seeds, [&](std::size_t i) {
    return with_stream_retry(kExp, suggested_stream_length(n, rho), seed_for(criterion, n, i),
                             [&](const PacketStream& jack) { return buffering_run(jack, n, rho); });
  });
  std::size_t covered = 0;
  double delay = 0.0;
  for (const auto& r : runs) {
    const double m = static_cast<double>(r.m);
    covered += (m >= lo && m <= hi) ? 1 : 0;
    delay += r.mean_delay;
  }
  return {static_cast<double>(covered) / static_cast<double>(seeds),
          delay / static_cast<double>(seeds)};
}

// 6. Backlog concentration under slowdown.
Outcome buffer_concentration() {
  std::vector<double> cov;
  for (std::size_t n : {1000u, 10000u, 100000u}) cov.push_back(buffering_stats(n, 500, 6).coverage);
  const bool monotone = cov[0] <= cov[1] && cov[1] <= cov[2];
  return {cov[2] >= 0.95 && monotone, "coverage " + num(cov[0]) + ", " + num(cov[1]) + ", " +
                                          num(cov[2]) + " (need >= 0.95 at N=1e5, non-decreasing)"};
}

// 7. Median buffered count grows as sqrt(N).
Outcome sqrt_scaling() {
  std::vector<double> sizes, medians;
  for (std::size_t n : {1000u, 10000u, 100000u, 1000000u}) {
    const auto plan = TwoPhasePlan::make(n, 0.5, 0.5, kExp);
    const auto nb = parallel_map(200, [&](std::size_t i) {
      const std::size_t initial = std::max(n, suggested_stream_length(plan.phase1_count(), plan.rho2));
      const std::uint64_t s = seed_for(7, n, i);
      return with_stream_retry(kExp, initial, derive_seed(s, {0}), [&](const PacketStream& jack) {
        return static_cast<double>(two_phase_run(jack, plan, derive_seed(s, {1})).n_b);
      });
    });
    sizes.push_back(static_cast<double>(n));
    medians.push_back(median(nb));
  }
  const double slope = fit_loglog_slope(sizes, medians);
  std::ostringstream detail;
  detail << "slope " << num(slope) << " (need [0.45, 0.55]); medians";
  for (double m : medians) detail << ' ' << num(m);
  return {slope >= 0.45 && slope <= 0.55, detail.str()};
}

// 8. Phase-2 departures reproduce Jack's IPDs. A deviation is tolerated when
// it is within 1e-9 relative or within one ulp of the departure timestamp,
// the resolution at which the stream stores times.
Outcome ipd_reconstruction() {
  const std::size_t n = 10000;
  const auto plan = TwoPhasePlan::make(n, 0.5, 0.5, kExp);
  struct Tally {
    std::size_t checked = 0, within_rel = 0, ulp_only = 0, mismatches = 0, first_mismatch = 0;
  };
  const auto tallies = parallel_map(200, [&](std::size_t i) {
    const std::size_t initial = std::max(n, suggested_stream_length(plan.phase1_count(), plan.rho2));
    return with_stream_retry(kExp, initial, seed_for(8, i), [&](const PacketStream& jack) {
      const auto o = two_phase_run(jack, plan, seed_for(8, i, 1));
      Tally t;
      const auto& bob = o.bob_output;
      for (std::size_t k = o.bob_phase2_start; k < bob.size(); ++k) {
        const std::size_t j = o.jack_phase2_start + (k - o.bob_phase2_start);
        const double original = jack[j - 1].time - jack[j - 2].time;
        const double observed = bob[k].time - bob[k - 1].time;
        const double dev = std::abs(observed - original);
        const double ulp = std::nextafter(bob[k].time, INFINITY) - bob[k].time;
        ++t.checked;
        if (dev <= 1e-9 * original) {
          ++t.within_rel;
        } else if (dev <= ulp) {
          ++t.ulp_only;
        } else {
          ++t.mismatches;
          if (k == o.bob_phase2_start) ++t.first_mismatch;
        }
      }
      return t;
    });
  });
  Tally sum;
  for (const auto& t : tallies) {
    sum.checked += t.checked;
    sum.within_rel += t.within_rel;
    sum.ulp_only += t.ulp_only;
    sum.mismatches += t.mismatches;
    sum.first_mismatch += t.first_mismatch;
  }
  return {sum.mismatches == 0,
          std::to_string(sum.checked) + " IPDs over 200 runs: " + std::to_string(sum.within_rel) +
              " within 1e-9 rel, " + std::to_string(sum.ulp_only) +
              " within 1 timestamp ulp only, " + std::to_string(sum.mismatches) + " mismatches (" +
              std::to_string(sum.first_mismatch) + " at the first phase-2 IPD)"};
}

// 9. Mean-IPD detector against a backlog of N^0.75.
Outcome buffering_converse() {
  const std::size_t n = 10000;
  const auto backlog = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n), 0.75)));
  const StreamGenerator h0 = [&](std::uint64_t s) { return sample_stream(kExp, Count{n}, s); };
  const StreamGenerator h1 = [&](std::uint64_t s) {
    const PacketStream jack = sample_stream(kExp, Count{n + backlog}, s);
    return buffering_run(jack, n, rho_for_backlog(jack, n, backlog)).bob_output;
  };
  const StreamDetector det = [&](const PacketStream& s) {
    return mean_ipd_detect(extract_ipds(s), kExp.rate(), kExp.variance(), 0.05, MeanIpdMode::kSlowdown)
        .decision;
  };
  const auto e = estimate_error_sum(h0, h1, det, 2000, seed_for(9));
  return {e.p_md <= 0.05 && e.p_fa <= 0.05, "m = " + std::to_string(backlog) + ", P_FA " +
                                                num(e.p_fa) + ", P_MD " + num(e.p_md) +
                                                " (both need <= 0.05)"};
}

// 10. One-phase scheme: own-packet count versus ln N.
Outcome one_phase_control() {
  std::vector<double> probs;
  bool buffer_ok = true;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    const double threshold = std::log(static_cast<double>(n));
    const auto runs = parallel_map(500, [&](std::size_t i) {
      const std::uint64_t s = seed_for(10, n, i);
      const auto o = with_stream_retry(kExp, n, derive_seed(s, {0}), [&](const PacketStream& jack) {
        return one_phase_run(jack, n, 0.5, kExp, derive_seed(s, {1}));
      });
      // Steps are +-1 or 0; an underflow would wrap and show up as a jump.
      bool ok = true;
      long prev = 0;
      for (std::uint32_t b : o.buffer_trajectory) {
        const long cur = static_cast<long>(b);
        if (std::abs(cur - prev) > 1) ok = false;
        prev = cur;
      }
      return std::pair<bool, bool>{static_cast<double>(o.n_a) >= threshold, ok};
    });
    std::size_t hits = 0;
    for (const auto& [hit, ok] : runs) {
      hits += hit ? 1 : 0;
      buffer_ok = buffer_ok && ok;
    }
    probs.push_back(static_cast<double>(hits) / 500.0);
  }
  const bool increasing = probs[0] < probs[1] && probs[1] < probs[2];
  const double max_p = *std::max_element(probs.begin(), probs.end());
  return {max_p <= 0.95 && !increasing && buffer_ok,
          "P(N_a >= ln N) = " + num(probs[0]) + ", " + num(probs[1]) + ", " + num(probs[2]) +
              " (need max <= 0.95 and no monotone increase); buffer nonnegative: " +
              (buffer_ok ? "yes" : "no")};
}

// 11. Mean slowdown delay law at N = 1e4.
Outcome delay_law() {
  const std::size_t n = 10000;
  const double rho = 0.5 / std::sqrt(fisher_constant_c(kExp) * static_cast<double>(n));
  const double predicted = rho / (1.0 - rho) * (static_cast<double>(n) + 1.0) / 2.0 * kExp.mean();
  const double observed = buffering_stats(n, 500, 11).mean_delay;
  const double rel = std::abs(observed / predicted - 1.0);
  return {rel <= 0.05, "mean delay " + num(observed) + " vs " + num(predicted) + ", rel err " +
                           num(rel) + " (<= 0.05)"};
}

// 12. Result CSVs are byte-identical across reruns.
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path configs = fs::path(COVERT_LAB_SOURCE_DIR) / "configs";
  const fs::path scratch = fs::temp_directory_path() / "covert_lab_acceptance";
  fs::remove_all(scratch);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  std::size_t identical = 0;
  std::string differing;
  for (const auto& file : files) {
    const ExperimentConfig config = load_config(file.string());
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = scratch / ("run" + std::to_string(run));
      write_outputs(run_experiment(config), config, dir.string());
      bytes[run] = slurp(dir / config.csv_path);
    }
    if (!bytes[0].empty() && bytes[0] == bytes[1]) {
      ++identical;
    } else {
      differing += " " + file.filename().string();
    }
  }
  fs::remove_all(scratch);
  return {identical == files.size() && !files.empty(),
          std::to_string(identical) + "/" + std::to_string(files.size()) +
              " experiment CSVs byte-identical" + (differing.empty() ? "" : "; differ:" + differing)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "Poisson count divergence closed form and bound", poisson_kl},
      {2, "Poisson insertion stays covert against the count LRT", poisson_achievability},
      {3, "count detector square-root phase transition", poisson_converse},
      {4, "Fisher constant for Exponential and Gamma", fisher},
      {5, "scaled-renewal divergence second-order expansion", kl_expansion},
      {6, "slowdown backlog concentration", buffer_concentration},
      {7, "median buffered count scales as sqrt(N)", sqrt_scaling},
      {8, "two-phase IPD reconstruction", ipd_reconstruction},
      {9, "mean-IPD detector catches an N^0.75 backlog", buffering_converse},
      {10, "one-phase own-packet count stays below ln N", one_phase_control},
      {11, "slowdown mean delay law", delay_law},
      {12, "byte-identical reruns", determinism},
  };

  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion K]\n", argv[0]);
      return 2;
    }
  }
  if (only != 0 && (only < 1 || only > static_cast<int>(criteria.size()))) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %2d: %s | %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
