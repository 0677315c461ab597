// covert_lab: simulate covert packet-insertion schemes, run wardens, sweep
// experiments.
//
// Exit status: 0 ok, 1 runtime failure, 2 configuration or usage error,
// 3 a --assert check failed.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "covert_lab/config.hpp"
#include "covert_lab/covert_stats.hpp"
#include "covert_lab/detectors.hpp"
#include "covert_lab/harness.hpp"
#include "covert_lab/renewal.hpp"
#include "covert_lab/rng.hpp"
#include "covert_lab/strategies.hpp"
#include "covert_lab/trace_io.hpp"
#include "json.hpp"

namespace {

using namespace covert;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAssert = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  bool assert_checks = false;
  std::optional<std::size_t> trials;
  bool quiet = false;
};

struct SimulateArgs {
  std::string dist;
  std::optional<std::size_t> count;
  std::optional<double> horizon;
  std::string strategy = "none";
  std::optional<double> epsilon;
  std::optional<double> psi;
  std::optional<std::size_t> n;
  std::string trace;
  std::string alice_trace;
};

struct DetectArgs {
  std::string trace;
  std::string detector = "count-threshold";
  double lambda = 1.0;
  std::optional<double> horizon;
  double alpha = 0.05;
  double delta = 0.0;
  std::string mode = "slowdown";
  std::string dist;
};

struct KlArgs {
  std::string dist = "exponential";
  std::vector<double> rhos;
  bool poisson = false;
  double lambda = 1.0;
  double delta = 0.0;
  double horizon = 1.0;
};

struct FisherArgs {
  std::vector<std::string> dists;
};

struct TraceArgs {
  std::string path;
};

std::optional<ExperimentConfig> maybe_config(const Globals& g) {
  if (g.config_path.empty()) return std::nullopt;
  return load_config(g.config_path);
}

void emit(const Globals& g, const json& j) {
  if (!g.quiet) std::cout << j.dump(2) << "\n";
}

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const auto cfg = maybe_config(g);
  IpdDistribution dist = !a.dist.empty()                  ? parse_distribution_spec(a.dist)
                         : cfg && !cfg->channels.empty() ? cfg->channel()
                                                          : IpdDistribution::exponential(1.0);
  const std::uint64_t seed = g.seed ? *g.seed : cfg ? cfg->seed : 1;
  const double eps = a.epsilon ? *a.epsilon : cfg && !cfg->epsilons.empty() ? cfg->epsilon() : 0.5;
  const double psi = a.psi ? *a.psi : cfg ? cfg->psi : 0.5;
  if (a.count && a.horizon) throw ConfigError("simulate: give --count or --horizon, not both");
  const std::string trace =
      a.trace.empty() ? (std::filesystem::path(g.out_dir) / "stream.csv").string() : a.trace;
  if (auto parent = std::filesystem::path(trace).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }

  const std::uint64_t jack_seed = derive_seed(seed, {0});
  const std::uint64_t strategy_seed = derive_seed(seed, {1});
  json summary = {{"dist", dist.describe()}, {"seed", seed}, {"strategy", a.strategy}};
  PacketStream observed;

  if (a.strategy == "none" || a.strategy == "poisson") {
    if (a.strategy == "poisson" && !a.horizon) throw ConfigError("simulate: poisson needs --horizon");
    const PacketStream jack =
        a.horizon ? sample_stream(dist, Horizon{*a.horizon}, jack_seed)
                  : sample_stream(dist, Count{a.count.value_or(1000)}, jack_seed);
    observed = jack;
    if (a.strategy == "poisson") {
      if (dist.family() != Family::kExponential) {
        throw ConfigError("simulate: poisson insertion needs an exponential channel");
      }
      const auto plan = PoissonInsertionPlan::make(dist.rate(), *a.horizon, eps);
      observed = poisson_insertion(jack, plan, strategy_seed);
      summary["delta"] = plan.delta();
    }
  } else if (a.strategy == "buffering") {
    const std::size_t n = a.n.value_or(a.count.value_or(10000));
    const double rho = eps / std::sqrt(fisher_constant_c_analytic(dist) * static_cast<double>(n));
    const auto out = with_stream_retry(dist, suggested_stream_length(n, rho), jack_seed,
                                       [&](const PacketStream& j) { return buffering_run(j, n, rho); });
    observed = out.bob_output;
    summary["rho1"] = rho;
    summary["m"] = out.m;
    summary["mean_delay"] = out.mean_delay;
  } else if (a.strategy == "two-phase") {
    const std::size_t n = a.n.value_or(a.count.value_or(10000));
    const auto plan = TwoPhasePlan::make(n, psi, eps, dist);
    const std::size_t initial = std::max(n, suggested_stream_length(plan.phase1_count(), plan.rho2));
    const auto out = with_stream_retry(dist, initial, jack_seed, [&](const PacketStream& j) {
      return two_phase_run(j, plan, strategy_seed);
    });
    observed = out.bob_output;
    if (!a.alice_trace.empty()) write_trace(out.alice_output, a.alice_trace);
    summary["rho2"] = plan.rho2;
    summary["rho3"] = out.rho3;
    summary["n_b"] = out.n_b;
    summary["replaced"] = out.achieved;
    summary["completed"] = out.completed;
    summary["phi"] = out.phi;
    summary["theta"] = out.theta;
  } else if (a.strategy == "one-phase") {
    const std::size_t n = a.n.value_or(a.count.value_or(10000));
    const auto out = with_stream_retry(dist, n, jack_seed, [&](const PacketStream& j) {
      return one_phase_run(j, n, eps, dist, strategy_seed);
    });
    observed = sample_stream(dist, Count{n}, jack_seed);
    summary["rho4"] = out.rho4;
    summary["n_a"] = out.n_a;
    summary["alice_events"] = out.alice_events;
    summary["final_buffer"] = out.final_buffer;
  } else {
    throw ConfigError("simulate: unknown strategy '" + a.strategy + "'");
  }

  write_trace(observed, trace);
  summary["trace"] = trace;
  summary["packets"] = observed.size();
  summary["alice_packets"] = observed.count(Source::kAlice);
  emit(g, summary);
  return kExitOk;
}

int run_detect(const Globals& g, const DetectArgs& a) {
  const PacketStream stream = read_trace(a.trace);
  DetectionReport report;
  json extra;
  if (a.detector == "count-threshold" || a.detector == "lrt") {
    const double horizon = a.horizon ? *a.horizon : stream.empty() ? 0.0 : stream.back().time;
    if (!(horizon > 0.0)) throw ConfigError("detect: --horizon must be positive");
    if (a.detector == "count-threshold") {
      report = count_threshold_detect(stream, a.lambda, horizon, a.alpha);
    } else {
      const auto n = count_arrivals(stream, horizon);
      const auto lrt = poisson_count_lrt(n, a.lambda, a.delta, horizon);
      report = {static_cast<double>(n), 0.0, lrt.decision, 0.0, "lrt"};
      extra["log_ratio"] = lrt.log_ratio;
    }
  } else if (a.detector == "mean-ipd") {
    const IpdDistribution dist =
        a.dist.empty() ? IpdDistribution::exponential(a.lambda) : parse_distribution_spec(a.dist);
    MeanIpdMode mode;
    try {
      mode = parse_mean_ipd_mode(a.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto ipds = extract_ipds(stream);
    report = mean_ipd_detect(ipds, dist.rate(), dist.variance(), a.alpha, mode);
  } else {
    throw ConfigError("detect: unknown detector '" + a.detector + "'");
  }
  json j = {{"detector", report.detector},
            {"statistic", report.statistic},
            {"threshold", report.threshold},
            {"alpha", report.alpha},
            {"decision", std::string(hypothesis_name(report.decision))}};
  j.update(extra);
  emit(g, j);
  return kExitOk;
}

int run_sweep(const Globals& g) {
  if (g.config_path.empty()) throw ConfigError("sweep: --config is required");
  ExperimentConfig cfg = load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.trials) cfg.trials = *g.trials;
  validate_config(cfg);
  const SweepResult result = run_experiment(cfg);
  const auto written = write_outputs(result, cfg, g.out_dir);
  if (!g.quiet) {
    std::cout << "experiment " << cfg.name << " (" << experiment_kind_name(cfg.kind) << "), "
              << result.rows.size() << " rows, " << result.metadata.wall_seconds << " s\n";
    for (const auto& [key, value] : result.summary) std::cout << "  " << key << " = " << value << "\n";
    for (const auto& c : result.checks) {
      std::cout << (c.passed ? "  ok    " : "  FAIL  ") << c.name
                << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    }
    for (const auto& path : written) std::cout << "  wrote " << path << "\n";
  }
  if (g.assert_checks && !result.all_passed()) return kExitAssert;
  return kExitOk;
}

int run_kl(const Globals& g, const KlArgs& a) {
  json out = json::array();
  if (a.poisson) {
    const auto r = kl_poisson_counts(a.lambda, a.delta, a.horizon);
    out.push_back({{"lambda", a.lambda},
                   {"delta", a.delta},
                   {"T", a.horizon},
                   {"kl", r.kl.value},
                   {"upper_bound", r.upper_bound},
                   {"covertness_floor", covertness_lower_bound(r.kl.value)}});
  } else {
    const IpdDistribution dist = parse_distribution_spec(a.dist);
    const double c = fisher_constant_c(dist);
    const std::vector<double> rhos = a.rhos.empty() ? std::vector<double>{0.01} : a.rhos;
    for (double rho : rhos) {
      const auto q = kl_scaled_renewal(dist, rho);
      const auto cf = kl_scaled_renewal_closed_form(dist, rho);
      out.push_back({{"dist", dist.describe()},
                     {"rho", rho},
                     {"kl_quadrature", q.value},
                     {"quadrature_error", q.error},
                     {"kl_closed_form", cf.value},
                     {"c", c},
                     {"ratio", q.value / (c * rho * rho / 2.0)}});
    }
  }
  emit(g, out);
  return kExitOk;
}

int run_fisher(const Globals& g, const FisherArgs& a) {
  std::vector<std::string> specs = a.dists;
  if (specs.empty()) {
    specs = {"exponential:rate=1", "gamma:shape=2", "gamma:shape=3", "gamma:shape=5",
             "weibull:shape=2",    "rayleigh:sigma=1", "erlang:shape=3,rate=1",
             "chi_squared:dof=4"};
  }
  json out = json::array();
  for (const auto& spec : specs) {
    const IpdDistribution dist = parse_distribution_spec(spec);
    const double analytic = fisher_constant_c_analytic(dist);
    const double numeric = fisher_constant_c_quadrature(dist);
    const auto reg = check_regularity(dist);
    out.push_back({{"dist", dist.describe()},
                   {"analytic", analytic},
                   {"quadrature", numeric},
                   {"abs_diff", std::abs(analytic - numeric)},
                   {"c1", std::string(verdict_name(reg.c1))},
                   {"c2", std::string(verdict_name(reg.c2))},
                   {"c3", std::string(verdict_name(reg.c3))},
                   {"c3_residual", reg.residual}});
  }
  emit(g, out);
  return kExitOk;
}

int run_trace(const Globals& g, const TraceArgs& a) {
  const PacketStream stream = read_trace(a.path);
  json j = {{"path", a.path},
            {"packets", stream.size()},
            {"jack", stream.count(Source::kJack)},
            {"alice", stream.count(Source::kAlice)}};
  if (!stream.empty()) {
    j["first_s"] = stream.front().time;
    j["last_s"] = stream.back().time;
    j["mean_ipd_s"] = stream.back().time / static_cast<double>(stream.size());
  }
  emit(g, j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covert packet-insertion simulator and warden test bench"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--assert", g.assert_checks, "Exit with status 3 if any experiment check fails");
  app.add_option("--trials", g.trials, "Trials per hypothesis or grid point (overrides the config)")
      ->check(CLI::Range(std::size_t{100}, std::size_t{100000000}));
  app.add_flag("--quiet", g.quiet, "Suppress standard output");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a channel stream, optionally with a covert scheme");
  simulate->add_option("--dist", sim.dist, "IPD law, e.g. gamma:shape=2,scale=0.5");
  simulate->add_option("--count", sim.count, "Number of Jack packets");
  simulate->add_option("--horizon", sim.horizon, "Observation window in seconds");
  simulate->add_option("--strategy", sim.strategy, "none | poisson | buffering | two-phase | one-phase")
      ->capture_default_str();
  simulate->add_option("--epsilon", sim.epsilon, "Covertness budget");
  simulate->add_option("--psi", sim.psi, "Two-phase: phase-1 fraction");
  simulate->add_option("-n,--packets", sim.n, "Packets N for slowdown and two-phase schemes");
  simulate->add_option("--trace", sim.trace, "Output trace path (default OUT/stream.csv)");
  simulate->add_option("--alice-trace", sim.alice_trace, "Two-phase: also write Alice's output");

  DetectArgs det;
  auto* detect = app.add_subcommand("detect", "Run a warden detector on a trace file");
  detect->add_option("--trace", det.trace, "Trace CSV")->required();
  detect->add_option("--detector", det.detector, "count-threshold | mean-ipd | lrt")
      ->capture_default_str();
  detect->add_option("--lambda", det.lambda, "Channel rate")->capture_default_str();
  detect->add_option("--horizon", det.horizon, "Window T (default: last timestamp)");
  detect->add_option("--alpha", det.alpha, "False-alarm target")->capture_default_str();
  detect->add_option("--delta", det.delta, "LRT: alternative extra rate");
  detect->add_option("--mode", det.mode, "mean-ipd: slowdown | insertion | insertion-as-quoted")
      ->capture_default_str();
  detect->add_option("--dist", det.dist, "mean-ipd: IPD law supplying mean and variance");

  auto* sweep = app.add_subcommand("sweep", "Run the experiment named by --config");

  KlArgs kl;
  auto* klcmd = app.add_subcommand("kl", "Relative entropy of scaled renewal or Poisson counts");
  klcmd->add_option("--dist", kl.dist, "IPD law")->capture_default_str();
  klcmd->add_option("--rho", kl.rhos, "Scaling rate(s)");
  klcmd->add_flag("--poisson", kl.poisson, "Poisson count divergence instead");
  klcmd->add_option("--lambda", kl.lambda, "Poisson: base rate");
  klcmd->add_option("--delta", kl.delta, "Poisson: inserted rate");
  klcmd->add_option("--horizon", kl.horizon, "Poisson: window T");

  FisherArgs fa;
  auto* fishercmd = app.add_subcommand("fisher", "Fisher constant and regularity report per family");
  fishercmd->add_option("--dist", fa.dists, "IPD law(s); default: a standard family list");

  TraceArgs ta;
  auto* tracecmd = app.add_subcommand("trace", "Validate and summarize a trace file");
  tracecmd->add_option("path", ta.path, "Trace CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(g, sim);
    if (*detect) return run_detect(g, det);
    if (*sweep) return run_sweep(g);
    if (*klcmd) return run_kl(g, kl);
    if (*fishercmd) return run_fisher(g, fa);
    if (*tracecmd) return run_trace(g, ta);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TraceError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
