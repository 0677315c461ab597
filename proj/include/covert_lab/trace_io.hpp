#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "covert_lab/packet_stream.hpp"

namespace covert {

/// Malformed trace content. `line()` is 1-based and counts the header.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// CSV with header `index,timestamp_s,source`. Timestamps carry 17
/// significant digits, so reading back reproduces every double exactly.
/// Only position, time and source are stored; per-source sequence numbers
/// are renumbered on read and the horizon is not recorded.
void write_trace(const PacketStream& stream, std::ostream& out);
void write_trace(const PacketStream& stream, const std::string& path);

PacketStream read_trace(std::istream& in);
PacketStream read_trace(const std::string& path);

}  // namespace covert
