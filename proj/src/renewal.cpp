#include "covert_lab/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace covert {

PacketStream sample_stream(const IpdDistribution& dist, StopRule stop, std::uint64_t seed,
                           Source tag) {
  Rng rng(seed);
  IpdSampler draw(dist);
  std::vector<Packet> packets;

  if (const auto* count = std::get_if<Count>(&stop)) {
    packets.reserve(count->packets);
    double t = 0.0;
    for (std::size_t i = 0; i < count->packets; ++i) {
      t += draw(rng);
      packets.push_back({t, tag, static_cast<std::uint32_t>(i + 1)});
    }
    return PacketStream(std::move(packets));
  }

  const double horizon = std::get<Horizon>(stop).seconds;
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("sample_stream: horizon must be positive and finite");
  }
  packets.reserve(static_cast<std::size_t>(horizon / dist.mean() * 1.05) + 16);
  double t = 0.0;
  for (std::uint32_t seq = 1;; ++seq) {
    t += draw(rng);
    if (t > horizon) break;
    packets.push_back({t, tag, seq});
  }
  return PacketStream(std::move(packets), horizon);
}

std::size_t count_arrivals(const PacketStream& stream, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("count_arrivals: t must be non-negative");
  const auto packets = stream.packets();
  const auto it = std::upper_bound(packets.begin(), packets.end(), t,
                                   [](double value, const Packet& p) { return value < p.time; });
  return static_cast<std::size_t>(it - packets.begin());
}

std::vector<double> extract_ipds(const PacketStream& stream) {
  if (stream.empty()) throw std::invalid_argument("extract_ipds: stream is empty");
  std::vector<double> ipds;
  ipds.reserve(stream.size());
  double prev = 0.0;
  for (const auto& p : stream) {
    ipds.push_back(p.time - prev);
    prev = p.time;
  }
  return ipds;
}

PacketStream stream_from_ipds(std::span<const double> ipds, Source tag) {
  std::vector<Packet> packets;
  packets.reserve(ipds.size());
  double t = 0.0;
  std::uint32_t seq = 0;
  for (double a : ipds) {
    if (!(a > 0.0)) throw std::invalid_argument("stream_from_ipds: IPDs must be positive");
    t += a;
    packets.push_back({t, tag, ++seq});
  }
  return PacketStream(std::move(packets));
}

PacketStream scale_stream(const PacketStream& stream, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("scale_stream: factor must be positive and finite");
  }
  std::vector<Packet> packets(stream.begin(), stream.end());
  for (auto& p : packets) p.time *= factor;
  std::optional<double> horizon;
  if (stream.horizon()) horizon = *stream.horizon() * factor;
  return PacketStream(std::move(packets), horizon);
}

PacketStream merge_streams(const PacketStream& a, const PacketStream& b) {
  std::vector<Packet> out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin();
  auto ib = b.begin();
  auto first = [](const Packet& x, const Packet& y) {
    if (x.time != y.time) return x.time < y.time;
    return x.source == Source::kJack && y.source != Source::kJack;
  };
  while (ia != a.end() || ib != b.end()) {
    Packet next;
    if (ib == b.end() || (ia != a.end() && first(*ia, *ib))) {
      next = *ia++;
    } else {
      next = *ib++;
    }
    if (!out.empty() && !(next.time > out.back().time)) {
      next.time = std::nextafter(out.back().time, std::numeric_limits<double>::infinity());
    }
    out.push_back(next);
  }

  std::optional<double> horizon;
  if (a.horizon() && b.horizon()) {
    horizon = std::max(*a.horizon(), *b.horizon());
  } else if (b.empty()) {
    horizon = a.horizon();
  } else if (a.empty()) {
    horizon = b.horizon();
  }
  if (horizon && !out.empty() && out.back().time > *horizon) horizon.reset();
  return PacketStream(std::move(out), horizon);
}

}  // namespace covert
