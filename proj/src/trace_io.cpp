#include "covert_lab/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

namespace covert {

namespace {

constexpr std::string_view kHeader = "index,timestamp_s,source";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

void write_trace(const PacketStream& stream, std::ostream& out) {
  out << kHeader << '\n';
  char buf[64];
  std::size_t index = 0;
  for (const auto& p : stream) {
    const auto res =
        std::to_chars(buf, buf + sizeof buf, p.time, std::chars_format::scientific, 16);
    out << ++index << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << ','
        << source_name(p.source) << '\n';
  }
  if (!out) throw std::runtime_error("write_trace: stream write failed");
}

void write_trace(const PacketStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace: cannot open '" + path + "'");
  write_trace(stream, out);
}

PacketStream read_trace(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw TraceError("trace: missing header", 1);
  ++line_no;
  if (trim(line) != kHeader) {
    throw TraceError("trace line 1: expected header '" + std::string(kHeader) + "'", 1);
  }

  std::vector<Packet> packets;
  std::uint32_t jack = 0;
  std::uint32_t alice = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    auto fail = [&](const std::string& why) -> TraceError {
      return TraceError("trace line " + std::to_string(line_no) + ": " + why, line_no);
    };
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      throw fail("expected 3 fields");
    }
    const std::string_view f_index = trim(row.substr(0, c1));
    const std::string_view f_time = trim(row.substr(c1 + 1, c2 - c1 - 1));
    const std::string_view f_source = trim(row.substr(c2 + 1));

    std::size_t index = 0;
    auto r1 = std::from_chars(f_index.data(), f_index.data() + f_index.size(), index);
    if (r1.ec != std::errc() || r1.ptr != f_index.data() + f_index.size()) {
      throw fail("bad index '" + std::string(f_index) + "'");
    }
    if (index != packets.size() + 1) {
      throw fail("index " + std::to_string(index) + " out of sequence");
    }
    double t = 0.0;
    auto r2 = std::from_chars(f_time.data(), f_time.data() + f_time.size(), t);
    if (r2.ec != std::errc() || r2.ptr != f_time.data() + f_time.size() || !std::isfinite(t)) {
      throw fail("bad timestamp '" + std::string(f_time) + "'");
    }
    if (!(t > 0.0)) throw fail("timestamp must be positive");
    if (!packets.empty() && !(t > packets.back().time)) {
      throw fail("timestamps must be strictly increasing");
    }
    Source s;
    try {
      s = parse_source(f_source);
    } catch (const std::invalid_argument&) {
      throw fail("unknown source tag '" + std::string(f_source) + "'");
    }
    packets.push_back({t, s, s == Source::kJack ? ++jack : ++alice});
  }
  return PacketStream(std::move(packets));
}

PacketStream read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trace: cannot open '" + path + "'");
  return read_trace(in);
}

}  // namespace covert
