#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/backend/cost.hpp"
#include "mpcc/core/error.hpp"
#include "mpcc/core/ring.hpp"
#include "mpcc/core/tensor.hpp"

namespace mpcc {

using Bytes = std::vector<std::uint8_t>;

struct TranscriptEntry {
  int from = 0;
  int to = 1;
  std::size_t bytes = 0;
  std::uint64_t round = 0;  // receiver's clock after delivery
  std::int64_t instr = -1;  // party-0 instruction index of the comm point
  std::string category;
  std::uint64_t digest = 0;  // FNV-1a of the payload
  bool operator==(const TranscriptEntry&) const = default;
};

// In-process FIFO duplex channel with exact byte and round accounting.
class Channel {
 public:
  // Observer for every delivered payload (tests inspect what a party sees).
  std::function<void(int at, const Bytes&)> on_recv;

  void send(int from, int to, Bytes payload) {
    if (from == to || from < 0 || from > 1 || to < 0 || to > 1) throw ProtocolError("bad channel endpoints");
    bytes_[static_cast<std::size_t>(from)] += payload.size();
    cat_bytes_[category_][static_cast<std::size_t>(from)] += payload.size();
    queue_[static_cast<std::size_t>(to)].push_back({from, clock_.stamp(from), std::move(payload)});
  }

  Bytes recv(int at, int from) {
    auto& q = queue_[static_cast<std::size_t>(at)];
    if (q.empty()) {
      throw ProtocolError("party " + std::to_string(at) + " waits for a message from party " + std::to_string(from) +
                          " that was never sent (instruction " + std::to_string(instr_) + ")");
    }
    Pending m = std::move(q.front());
    q.pop_front();
    if (m.from != from) throw ProtocolError("message from unexpected party");
    clock_.deliver(at, m.stamp);
    log_.push_back({m.from, at, m.payload.size(), clock_.stamp(at), instr_, category_, fnv1a(m.payload)});
    if (on_recv) on_recv(at, m.payload);
    return std::move(m.payload);
  }

  // Tags subsequent traffic for the breakdown and the transcript.
  void begin(std::int64_t instr, const std::string& category) {
    instr_ = instr;
    category_ = category;
  }

  bool idle() const { return queue_[0].empty() && queue_[1].empty(); }
  std::array<std::uint64_t, 2> bytes() const { return bytes_; }
  std::uint64_t rounds() const { return clock_.rounds(); }
  const std::map<std::string, std::array<std::uint64_t, 2>>& category_bytes() const { return cat_bytes_; }
  const std::vector<TranscriptEntry>& transcript() const { return log_; }
  static std::uint64_t fnv1a(const Bytes& b) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto c : b) h = (h ^ c) * 1099511628211ull;
    return h;
  }

 private:
  struct Pending {
    int from;
    std::uint64_t stamp;
    Bytes payload;
  };
  std::array<std::deque<Pending>, 2> queue_;
  RoundClock clock_;
  std::array<std::uint64_t, 2> bytes_{0, 0};
  std::map<std::string, std::array<std::uint64_t, 2>> cat_bytes_;
  std::vector<TranscriptEntry> log_;
  std::int64_t instr_ = -1;
  std::string category_ = "other";
};

// ---------------------------------------------------------------------------
// Wire encodings.

inline Bytes pack_ring(const Ring& ring, const std::vector<u64>& v) {
  const auto wb = static_cast<std::size_t>(ring.wire_bytes());
  Bytes out(v.size() * wb);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t b = 0; b < wb; ++b) out[i * wb + b] = static_cast<std::uint8_t>(v[i] >> (8 * b));
  return out;
}

inline std::vector<u64> unpack_ring(const Ring& ring, const Bytes& in, std::size_t n) {
  const auto wb = static_cast<std::size_t>(ring.wire_bytes());
  if (in.size() != n * wb) throw ProtocolError("ring payload has " + std::to_string(in.size()) + " bytes, expected " +
                                               std::to_string(n * wb));
  std::vector<u64> v(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < wb; ++b) v[i] |= static_cast<u64>(in[i * wb + b]) << (8 * b);
  for (auto& x : v) x = ring.reduce(x);
  return v;
}

inline Bytes pack_bits(const std::vector<std::uint8_t>& bits) {
  Bytes out(bits_to_bytes(bits.size()), 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] & 1u) out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | (1u << (i % 8)));
  return out;
}

inline std::vector<std::uint8_t> unpack_bits(const Bytes& in, std::size_t n) {
  if (in.size() != bits_to_bytes(n)) throw ProtocolError("bit payload has wrong length");
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (in[i / 8] >> (i % 8)) & 1u;
  return bits;
}

inline nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& t) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : t) {
    out.push_back({{"from", e.from}, {"to", e.to}, {"bytes", e.bytes}, {"round", e.round}, {"instr", e.instr},
                   {"category", e.category}, {"digest", e.digest}});
  }
  return out;
}

}  // namespace mpcc
