#pragma once

#include <array>
#include <optional>
#include <set>
#include <vector>

#include "mpcc/backend/cost.hpp"
#include "mpcc/runtime/shares.hpp"

namespace mpcc {

struct ArithTriples {
  std::uint64_t id = 0;
  std::array<std::vector<u64>, 2> a, b, c;  // c = a*b mod 2^N after reconstruction
  std::size_t size() const { return a[0].size(); }
};

struct BoolTriples {
  std::uint64_t id = 0;
  std::array<std::vector<std::uint8_t>, 2> a, b, c;  // c = a&b after XOR reconstruction
  std::size_t size() const { return a[0].size(); }
};

// A random bit shared both ways: XOR shares and additive ring shares.
struct DaBits {
  std::uint64_t id = 0;
  std::array<std::vector<std::uint8_t>, 2> bit;
  std::array<std::vector<u64>, 2> arith;
  std::size_t size() const { return bit[0].size(); }
};

// Trusted dealer. Optionally provisioned with an exact budget; asking for
// more is a protocol error, and each batch may be consumed once.
class Dealer {
 public:
  Dealer(Ring ring, std::uint64_t seed, std::optional<TripleUsage> budget = std::nullopt)
      : ring_(ring), rng_(seed), budget_(budget) {}

  ArithTriples arith(std::size_t n) {
    charge(used_.arith, n, budget_ ? budget_->arith : 0, "arithmetic triples");
    ArithTriples t;
    t.id = next_id_++;
    for (int p = 0; p < 2; ++p) {
      t.a[p].resize(n);
      t.b[p].resize(n);
      t.c[p].resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const u64 a = ring_.reduce(rng_()), b = ring_.reduce(rng_()), c = ring_.mul(a, b);
      split(a, t.a, i);
      split(b, t.b, i);
      split(c, t.c, i);
    }
    return t;
  }

  BoolTriples boolean(std::size_t n) {
    charge(used_.boolean, n, budget_ ? budget_->boolean : 0, "boolean triples");
    BoolTriples t;
    t.id = next_id_++;
    for (int p = 0; p < 2; ++p) {
      t.a[p].resize(n);
      t.b[p].resize(n);
      t.c[p].resize(n);
    }
    // One 64-bit draw supplies bits for several gates.
    u64 pool = 0;
    int left = 0;
    auto bit = [&]() -> std::uint8_t {
      if (left == 0) {
        pool = rng_();
        left = 64;
      }
      --left;
      const auto b = static_cast<std::uint8_t>(pool & 1u);
      pool >>= 1;
      return b;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t a = bit(), b = bit(), c = a & b;
      const std::uint8_t ma = bit(), mb = bit(), mc = bit();
      t.a[0][i] = ma;
      t.a[1][i] = a ^ ma;
      t.b[0][i] = mb;
      t.b[1][i] = b ^ mb;
      t.c[0][i] = mc;
      t.c[1][i] = c ^ mc;
    }
    return t;
  }

  DaBits dabits(std::size_t n) {
    charge(used_.dabits, n, budget_ ? budget_->dabits : 0, "daBits");
    DaBits d;
    d.id = next_id_++;
    for (int p = 0; p < 2; ++p) {
      d.bit[p].resize(n);
      d.arith[p].resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const u64 draw = rng_();
      const auto r = static_cast<std::uint8_t>(draw & 1u);
      const auto m = static_cast<std::uint8_t>((draw >> 1) & 1u);
      d.bit[0][i] = m;
      d.bit[1][i] = r ^ m;
      split(r, d.arith, i);
    }
    return d;
  }

  // Marks a batch as used; a second use is refused.
  void consume(std::uint64_t id) {
    if (id == 0 || id >= next_id_) throw ProtocolError("unknown correlated-randomness batch " + std::to_string(id));
    if (!consumed_.insert(id).second) throw ProtocolError("triple reuse: batch " + std::to_string(id) + " already consumed");
  }

  const TripleUsage& used() const { return used_; }
  const std::optional<TripleUsage>& budget() const { return budget_; }
  const Ring& ring() const { return ring_; }

 private:
  void charge(std::uint64_t& used, std::size_t n, std::uint64_t limit, const char* what) {
    if (budget_ && used + n > limit) {
      throw ProtocolError(std::string("triple exhaustion: ") + what + " requested beyond the provisioned " +
                          std::to_string(limit));
    }
    used += n;
  }

  void split(u64 v, std::array<std::vector<u64>, 2>& out, std::size_t i) {
    const u64 r = ring_.reduce(rng_());
    out[0][i] = ring_.sub(v, r);
    out[1][i] = r;
  }

  Ring ring_;
  Rng rng_;
  std::optional<TripleUsage> budget_;
  TripleUsage used_;
  std::uint64_t next_id_ = 1;
  std::set<std::uint64_t> consumed_;
};

}  // namespace mpcc
