#include "covert_lab/packet_stream.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace covert {

std::string_view source_name(Source s) noexcept {
  return s == Source::kJack ? "jack" : "alice";
}

Source parse_source(std::string_view name) {
  if (name == "jack") return Source::kJack;
  if (name == "alice") return Source::kAlice;
  throw std::invalid_argument("unknown packet source '" + std::string(name) + "'");
}

PacketStream::PacketStream(std::vector<Packet> packets, std::optional<double> horizon)
    : packets_(std::move(packets)), horizon_(horizon) {
  double prev = 0.0;
  for (std::size_t i = 0; i < packets_.size(); ++i) {
    const double t = packets_[i].time;
    if (!std::isfinite(t) || !(t > prev)) {
      throw std::invalid_argument("PacketStream: timestamp " + std::to_string(i + 1) +
                                  " is not strictly increasing and positive");
    }
    prev = t;
  }
  if (horizon_) {
    if (!(*horizon_ > 0.0)) throw std::invalid_argument("PacketStream: horizon must be positive");
    if (!packets_.empty() && packets_.back().time > *horizon_) {
      throw std::invalid_argument("PacketStream: arrival beyond horizon");
    }
  }
}

PacketStream PacketStream::from_times(std::span<const double> times, Source source,
                                      std::optional<double> horizon) {
  std::vector<Packet> packets;
  packets.reserve(times.size());
  std::uint32_t seq = 0;
  for (double t : times) packets.push_back({t, source, ++seq});
  return PacketStream(std::move(packets), horizon);
}

std::vector<double> PacketStream::times() const {
  std::vector<double> out;
  out.reserve(packets_.size());
  for (const auto& p : packets_) out.push_back(p.time);
  return out;
}

std::size_t PacketStream::count(Source s) const noexcept {
  std::size_t n = 0;
  for (const auto& p : packets_) n += (p.source == s);
  return n;
}

PacketStream PacketStream::only(Source s) const {
  std::vector<Packet> out;
  for (const auto& p : packets_) {
    if (p.source == s) out.push_back(p);
  }
  return PacketStream(std::move(out), horizon_);
}

}  // namespace covert
