#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace covert {

enum class Source : std::uint8_t { kJack, kAlice };

std::string_view source_name(Source s) noexcept;
Source parse_source(std::string_view name);

struct Packet {
  double time;       // seconds since observation start
  Source source;
  std::uint32_t seq;  // 1-based ordinal within the originating source
  friend bool operator==(const Packet&, const Packet&) = default;
};

/// Strictly increasing sequence of tagged arrival timestamps, all > 0.
/// Immutable once built; construction validates the ordering invariant and
/// throws std::invalid_argument on violation.
class PacketStream {
 public:
  PacketStream() = default;
  explicit PacketStream(std::vector<Packet> packets,
                        std::optional<double> horizon = std::nullopt);

  /// Builds a single-source stream, numbering packets 1..n.
  static PacketStream from_times(std::span<const double> times, Source source = Source::kJack,
                                 std::optional<double> horizon = std::nullopt);

  std::size_t size() const noexcept { return packets_.size(); }
  bool empty() const noexcept { return packets_.empty(); }
  const Packet& operator[](std::size_t i) const noexcept { return packets_[i]; }
  const Packet& front() const noexcept { return packets_.front(); }
  const Packet& back() const noexcept { return packets_.back(); }
  auto begin() const noexcept { return packets_.begin(); }
  auto end() const noexcept { return packets_.end(); }
  std::span<const Packet> packets() const noexcept { return packets_; }

  std::optional<double> horizon() const noexcept { return horizon_; }
  std::vector<double> times() const;
  std::size_t count(Source s) const noexcept;
  /// Sub-stream of one source, order preserved.
  PacketStream only(Source s) const;

  friend bool operator==(const PacketStream&, const PacketStream&) = default;

 private:
  std::vector<Packet> packets_;
  std::optional<double> horizon_;
};

}  // namespace covert
