#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covert_lab/ipd_distribution.hpp"
#include "covert_lab/packet_stream.hpp"
#include "covert_lab/renewal.hpp"

namespace covert {

/// Raised when a Jack stream ends before the time a construction needs to
/// observe. Callers regenerate with a larger count; see with_stream_retry.
class StreamShortage : public std::runtime_error {
 public:
  StreamShortage(const std::string& what, std::size_t suggested_count)
      : std::runtime_error(what), suggested_count_(suggested_count) {}
  std::size_t suggested_count() const noexcept { return suggested_count_; }

 private:
  std::size_t suggested_count_;
};

// ---------------------------------------------------------------------------
// Poisson superposition

struct PoissonInsertionPlan {
  double lambda;
  double horizon;
  double epsilon;

  /// Validates lambda > 0, horizon > 0, 0 <= epsilon < 1.
  static PoissonInsertionPlan make(double lambda, double horizon, double epsilon);
  /// Alice's insertion rate, eps * sqrt(2 lambda / T).
  double delta() const noexcept;
};

/// Superimposes an independent Poisson(delta) stream tagged Alice on `jack`.
/// `jack` must be a single-source Jack stream sampled over exactly
/// plan.horizon seconds.
PacketStream poisson_insertion(const PacketStream& jack, const PoissonInsertionPlan& plan,
                               std::uint64_t seed);

/// Superimposes exactly `count` Alice packets at i.i.d. uniform times in
/// (0, horizon]. Used for insertion-size sweeps against the count detector.
PacketStream fixed_count_insertion(const PacketStream& jack, double horizon, std::size_t count,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Slowdown buffering

/// m = X(tau(N) / (1 - rho)) - N. Requires 1 <= N <= jack.size() and
/// 0 <= rho < 1; throws StreamShortage when the stream neither reaches nor
/// declares a horizon covering tau(N) / (1 - rho).
std::size_t buffer_count(const PacketStream& jack, std::size_t n, double rho);

struct BufferingOutcome {
  std::size_t m = 0;
  double rho = 0.0;
  /// Bob's departures: Jack packet i at tau(i) / (1 - rho), i = 1..N.
  PacketStream bob_output;
  double mean_delay = 0.0;
  double max_delay = 0.0;
};

BufferingOutcome buffering_run(const PacketStream& jack, std::size_t n, double rho);

/// The slowdown rate that leaves exactly `backlog` packets buffered when Bob
/// sends his N-th packet: Bob's N-th departure coincides with tau(N + backlog).
double rho_for_backlog(const PacketStream& jack, std::size_t n, std::size_t backlog);

/// Minimum Jack packet count for which a slowdown run at rate `rho` over
/// `n` packets is unlikely to run short.
std::size_t suggested_stream_length(std::size_t n, double rho);

// ---------------------------------------------------------------------------
// Two-phase buffer-and-replace

struct TwoPhasePlan {
  std::size_t n_total;  // N, packets Alice transmits
  double psi;
  double epsilon;
  IpdDistribution dist;
  double c;
  double rho2;

  /// rho2 = eps / sqrt(c N psi) with c the Fisher constant of `dist`.
  static TwoPhasePlan make(std::size_t n_total, double psi, double epsilon,
                           const IpdDistribution& dist);
  /// Explicit phase-1 slowdown, 0 <= rho2 < 1.
  static TwoPhasePlan with_rho2(std::size_t n_total, double psi, const IpdDistribution& dist,
                                double rho2);

  std::size_t phase1_count() const noexcept;
  /// Replacement probability 2 N_b / (N (1 - psi)), capped at 1.
  double rho3(std::size_t n_b) const noexcept;
};

struct TwoPhaseOutcome {
  PacketStream alice_output;
  PacketStream bob_output;
  std::size_t n_b = 0;
  std::size_t m = 0;
  /// Bob's last phase-1 departure, tau(n) / (1 - rho2).
  double phase_boundary = 0.0;
  /// Jack indices (1-based) that Alice replaced, ascending.
  std::vector<std::size_t> replaced_indices;
  double phi = 0.0;
  double theta = 0.0;
  double rho3 = 0.0;
  bool completed = true;
  std::size_t achieved = 0;
  /// Index into bob_output of the first phase-2 departure.
  std::size_t bob_phase2_start = 0;
  /// Jack index matching the first phase-2 Bob departure's IPD.
  std::size_t jack_phase2_start = 0;
  /// Conservation counts at the end of phase 2.
  std::size_t bob_buffer_remaining = 0;
  std::size_t alice_stored = 0;
};

/// Requires jack.size() >= N; throws StreamShortage otherwise or when
/// phase 1 cannot be resolved, and std::domain_error if the phase-1 backlog
/// leaves no phase-2 packets.
TwoPhaseOutcome two_phase_run(const PacketStream& jack, const TwoPhasePlan& plan,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// One-phase insertion

struct OnePhaseOutcome {
  std::size_t n_a = 0;
  double rho4 = 0.0;
  /// Alice events within [0, tau(N)].
  std::size_t alice_events = 0;
  /// Buffer occupancy after every Jack arrival and Alice event.
  std::vector<std::uint32_t> buffer_trajectory;
  std::size_t final_buffer = 0;
};

/// rho4 = eps / (sqrt(2 c) sqrt(N)).
double one_phase_rho(std::size_t n, double epsilon, const IpdDistribution& dist);

/// Requires jack.size() >= N and 0 <= rho4 < 1. Jack arrivals are
/// processed before Alice events at equal timestamps.
OnePhaseOutcome one_phase_run(const PacketStream& jack, std::size_t n, double epsilon,
                              const IpdDistribution& dist, std::uint64_t seed);

// ---------------------------------------------------------------------------

/// Samples a count-mode Jack stream of `initial_count` packets and calls
/// `run`; on StreamShortage regenerates from the same seed with a larger
/// count. Count-mode streams are prefix-consistent, so a retry only extends
/// the stream already seen.
template <typename Fn>
auto with_stream_retry(const IpdDistribution& dist, std::size_t initial_count,
                       std::uint64_t seed, Fn&& run) {
  std::size_t count = initial_count;
  for (int attempt = 0;; ++attempt) {
    const PacketStream jack = sample_stream(dist, Count{count}, seed);
    try {
      return run(jack);
    } catch (const StreamShortage& e) {
      if (attempt >= 16) throw;
      count = std::max(e.suggested_count(), count + count / 2 + 16);
    }
  }
}

}  // namespace covert
