#include "covert_lab/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>

#include "covert_lab/covert_stats.hpp"
#include "covert_lab/rng.hpp"

namespace covert {

namespace {

void require_jack_only(const PacketStream& jack, const char* where) {
  if (jack.count(Source::kAlice) != 0) {
    throw std::invalid_argument(std::string(where) + ": input must contain Jack packets only");
  }
}

void require_rho(double rho, const char* where) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument(std::string(where) + ": rate must lie in [0, 1)");
  }
}

}  // namespace

PoissonInsertionPlan PoissonInsertionPlan::make(double lambda, double horizon, double epsilon) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("PoissonInsertionPlan: lambda must be positive");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("PoissonInsertionPlan: horizon must be positive");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("PoissonInsertionPlan: epsilon must lie in [0, 1)");
  }
  return {lambda, horizon, epsilon};
}

double PoissonInsertionPlan::delta() const noexcept {
  return epsilon * std::sqrt(2.0 * lambda / horizon);
}

PacketStream poisson_insertion(const PacketStream& jack, const PoissonInsertionPlan& plan,
                               std::uint64_t seed) {
  require_jack_only(jack, "poisson_insertion");
  const auto h = jack.horizon();
  if (!h || std::abs(*h - plan.horizon) > 1e-12 * plan.horizon) {
    throw std::invalid_argument("poisson_insertion: stream horizon does not match the plan");
  }
  const double delta = plan.delta();
  if (delta == 0.0) return jack;
  const PacketStream alice =
      sample_stream(IpdDistribution::exponential(delta), Horizon{plan.horizon}, seed,
                    Source::kAlice);
  return merge_streams(jack, alice);
}

PacketStream fixed_count_insertion(const PacketStream& jack, double horizon, std::size_t count,
                                   std::uint64_t seed) {
  require_jack_only(jack, "fixed_count_insertion");
  if (!(horizon > 0.0)) throw std::invalid_argument("fixed_count_insertion: bad horizon");
  Rng rng(seed);
  std::vector<double> times(count);
  for (auto& t : times) t = horizon * rng.uniform_open();
  std::sort(times.begin(), times.end());
  // Uniform draws can repeat at double resolution; keep them strictly
  // increasing.
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) times[i] = std::nextafter(times[i - 1], horizon + 1.0);
  }
  return merge_streams(jack, PacketStream::from_times(times, Source::kAlice, horizon));
}

std::size_t buffer_count(const PacketStream& jack, std::size_t n, double rho) {
  require_rho(rho, "buffer_count");
  if (n == 0 || n > jack.size()) {
    throw StreamShortage("buffer_count: stream holds fewer than N packets",
                         suggested_stream_length(n, rho));
  }
  const double target = jack[n - 1].time / (1.0 - rho);
  const bool covered = jack.back().time >= target || (jack.horizon() && *jack.horizon() >= target);
  if (!covered) {
    std::ostringstream os;
    os << "buffer_count: stream ends at " << jack.back().time << " before " << target;
    throw StreamShortage(os.str(), suggested_stream_length(n, rho) + jack.size() / 2);
  }
  return count_arrivals(jack, target) - n;
}

BufferingOutcome buffering_run(const PacketStream& jack, std::size_t n, double rho) {
  require_jack_only(jack, "buffering_run");
  BufferingOutcome out;
  out.m = buffer_count(jack, n, rho);
  out.rho = rho;
  const double stretch = 1.0 / (1.0 - rho);
  std::vector<Packet> departures;
  departures.reserve(n);
  double delay_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sent = jack[i].time * stretch;
    const double delay = sent - jack[i].time;
    delay_sum += delay;
    out.max_delay = std::max(out.max_delay, delay);
    departures.push_back({sent, Source::kJack, jack[i].seq});
  }
  out.mean_delay = delay_sum / static_cast<double>(n);
  out.bob_output = PacketStream(std::move(departures));
  return out;
}

double rho_for_backlog(const PacketStream& jack, std::size_t n, std::size_t backlog) {
  if (n == 0 || n + backlog > jack.size()) {
    throw StreamShortage("rho_for_backlog: stream holds fewer than N + m packets",
                         n + backlog + 16);
  }
  return 1.0 - jack[n - 1].time / jack[n + backlog - 1].time;
}

std::size_t suggested_stream_length(std::size_t n, double rho) {
  const double nn = static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil((1.0 + 2.0 * rho) * nn + 4.0 * std::sqrt(nn))) + 16;
}

TwoPhasePlan TwoPhasePlan::make(std::size_t n_total, double psi, double epsilon,
                                const IpdDistribution& dist) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("TwoPhasePlan: epsilon must lie in (0, 1)");
  }
  if (!(psi > 0.0 && psi < 1.0)) throw std::invalid_argument("TwoPhasePlan: psi must lie in (0, 1)");
  if (n_total == 0) throw std::invalid_argument("TwoPhasePlan: N must be positive");
  const double c = fisher_constant_c_analytic(dist);
  const double rho2 = epsilon / std::sqrt(c * static_cast<double>(n_total) * psi);
  if (!(rho2 < 1.0)) throw std::invalid_argument("TwoPhasePlan: N too small, rho2 >= 1");
  TwoPhasePlan plan{n_total, psi, epsilon, dist, c, rho2};
  if (plan.phase1_count() == 0) throw std::invalid_argument("TwoPhasePlan: floor(psi N) is 0");
  return plan;
}

TwoPhasePlan TwoPhasePlan::with_rho2(std::size_t n_total, double psi, const IpdDistribution& dist,
                                     double rho2) {
  if (!(psi > 0.0 && psi < 1.0)) throw std::invalid_argument("TwoPhasePlan: psi must lie in (0, 1)");
  require_rho(rho2, "TwoPhasePlan");
  TwoPhasePlan plan{n_total, psi, 0.0, dist, fisher_constant_c_analytic(dist), rho2};
  if (plan.phase1_count() == 0) throw std::invalid_argument("TwoPhasePlan: floor(psi N) is 0");
  return plan;
}

std::size_t TwoPhasePlan::phase1_count() const noexcept {
  return static_cast<std::size_t>(std::floor(psi * static_cast<double>(n_total)));
}

double TwoPhasePlan::rho3(std::size_t n_b) const noexcept {
  const double raw = 2.0 * static_cast<double>(n_b) / (static_cast<double>(n_total) * (1.0 - psi));
  return std::min(1.0, raw);
}

TwoPhaseOutcome two_phase_run(const PacketStream& jack, const TwoPhasePlan& plan,
                              std::uint64_t seed) {
  require_jack_only(jack, "two_phase_run");
  const std::size_t big_n = plan.n_total;
  const std::size_t n = plan.phase1_count();
  if (jack.size() < big_n) {
    throw StreamShortage("two_phase_run: stream holds fewer than N packets",
                         std::max(big_n, suggested_stream_length(n, plan.rho2)));
  }

  TwoPhaseOutcome out;
  out.m = buffer_count(jack, n, plan.rho2);
  out.n_b = out.m;
  const std::size_t m = out.m;
  if (n + m >= big_n) {
    throw std::domain_error("two_phase_run: phase-1 backlog leaves no phase-2 packets");
  }
  const double stretch = 1.0 / (1.0 - plan.rho2);
  out.phase_boundary = jack[n - 1].time * stretch;
  // Jack index j is 1-based; jack[j - 1] is its packet.
  out.phi = out.phase_boundary - jack[n + m - 1].time;
  out.theta = jack[n + m].time - out.phase_boundary;
  out.rho3 = plan.rho3(out.n_b);

  // Alice: relays Jack packets 1..N in place, replacing phase-2 packets by
  // Bernoulli(rho3) draws until N_b replacements.
  Rng rng(seed);
  std::vector<Packet> alice;
  alice.reserve(big_n);
  for (std::size_t j = 1; j <= n + m; ++j) alice.push_back(jack[j - 1]);
  std::vector<bool> replaced(big_n + 1, false);
  std::uint32_t alice_seq = 0;
  for (std::size_t j = n + m + 1; j <= big_n; ++j) {
    const Packet& p = jack[j - 1];
    if (out.achieved < out.n_b && rng.uniform_open() < out.rho3) {
      replaced[j] = true;
      ++out.achieved;
      out.replaced_indices.push_back(j);
      alice.push_back({p.time, Source::kAlice, ++alice_seq});
    } else {
      alice.push_back(p);
    }
  }
  out.completed = out.achieved == out.n_b;
  out.alice_stored = out.achieved;

  // Bob: phase 1 stretches packets 1..n; phase 2 emits the FIFO head at each
  // Alice arrival shifted by phi, discarding Alice packets and queueing
  // relayed Jack packets.
  std::vector<Packet> bob;
  bob.reserve(big_n - m);
  for (std::size_t j = 1; j <= n; ++j) {
    bob.push_back({jack[j - 1].time * stretch, Source::kJack, jack[j - 1].seq});
  }
  std::deque<std::uint32_t> fifo;
  for (std::size_t j = n + 1; j <= n + m; ++j) fifo.push_back(jack[j - 1].seq);
  out.bob_phase2_start = bob.size();
  out.jack_phase2_start = n + m + 1;
  for (std::size_t j = n + m + 1; j <= big_n; ++j) {
    if (!replaced[j]) fifo.push_back(jack[j - 1].seq);
    if (fifo.empty()) {
      // Replacements never exceed N_b = m, so Bob always holds a packet.
      throw std::logic_error("two_phase_run: Bob's buffer underflow");
    }
    double t = jack[j - 1].time + out.phi;
    if (t <= bob.back().time) t = std::nextafter(bob.back().time, INFINITY);
    bob.push_back({t, Source::kJack, fifo.front()});
    fifo.pop_front();
  }
  out.bob_buffer_remaining = fifo.size();

  out.alice_output = PacketStream(std::move(alice));
  out.bob_output = PacketStream(std::move(bob));
  return out;
}

double one_phase_rho(std::size_t n, double epsilon, const IpdDistribution& dist) {
  if (n == 0) throw std::invalid_argument("one_phase_rho: N must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("one_phase_rho: epsilon must be >= 0");
  const double c = fisher_constant_c_analytic(dist);
  return epsilon / (std::sqrt(2.0 * c) * std::sqrt(static_cast<double>(n)));
}

OnePhaseOutcome one_phase_run(const PacketStream& jack, std::size_t n, double epsilon,
                              const IpdDistribution& dist, std::uint64_t seed) {
  require_jack_only(jack, "one_phase_run");
  if (n == 0 || jack.size() < n) {
    throw StreamShortage("one_phase_run: stream holds fewer than N packets", n);
  }
  OnePhaseOutcome out;
  out.rho4 = one_phase_rho(n, epsilon, dist);
  if (!(out.rho4 < 1.0)) throw std::invalid_argument("one_phase_run: rho4 must be < 1");

  const double end = jack[n - 1].time;
  const double shrink = 1.0 - out.rho4;
  Rng rng(seed);
  IpdSampler draw(dist);
  out.buffer_trajectory.reserve(2 * n + 16);

  std::size_t buffer = 0;
  std::size_t next_jack = 0;
  double event = shrink * draw(rng);
  while (true) {
    const bool jack_next = next_jack < n && jack[next_jack].time <= event;
    if (jack_next) {
      ++buffer;
      ++next_jack;
    } else {
      if (event > end) break;
      ++out.alice_events;
      if (buffer > 0) {
        --buffer;
      } else {
        ++out.n_a;
      }
      event += shrink * draw(rng);
    }
    out.buffer_trajectory.push_back(static_cast<std::uint32_t>(buffer));
  }
  out.final_buffer = buffer;
  return out;
}

}  // namespace covert
