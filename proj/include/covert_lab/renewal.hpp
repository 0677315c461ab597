#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "covert_lab/ipd_distribution.hpp"
#include "covert_lab/packet_stream.hpp"

namespace covert {

/// Stop generating once the next arrival would fall beyond `seconds`.
struct Horizon {
  double seconds;
};
/// Stop after exactly `packets` arrivals.
struct Count {
  std::size_t packets;
};
using StopRule = std::variant<Horizon, Count>;

/// Ordinary (non-delayed) renewal stream: arrival i is the sum of the first
/// i i.i.d. draws from `dist`. For a fixed seed, count-mode and horizon-mode
/// streams are prefixes of each other.
PacketStream sample_stream(const IpdDistribution& dist, StopRule stop, std::uint64_t seed,
                           Source tag = Source::kJack);

/// Number of arrivals with timestamp <= t.
std::size_t count_arrivals(const PacketStream& stream, double t);

/// First element is measured from t = 0.
std::vector<double> extract_ipds(const PacketStream& stream);

/// Inverse of extract_ipds for a single-source stream.
PacketStream stream_from_ipds(std::span<const double> ipds, Source tag = Source::kJack);

PacketStream scale_stream(const PacketStream& stream, double factor);

/// Sorted union. An exact timestamp tie keeps the Jack packet first and
/// moves the other one to the next representable instant.
PacketStream merge_streams(const PacketStream& a, const PacketStream& b);

}  // namespace covert
