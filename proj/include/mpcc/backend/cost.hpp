#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/backend/program.hpp"
#include "mpcc/backend/typecheck.hpp"

namespace mpcc {

// ---------------------------------------------------------------------------
// Message patterns of the implemented protocols. The runtime sends exactly
// these; static_cost replays them through the same round clock.
//
//   share / reveal : one message of n ring elements
//   mul_mpc        : both parties send (x-a, y-b) for every expanded product
//   ltz_mpc(w)     : Kogge-Stone carry over m = w-1 bits. Round 1 computes
//                    g = a&b (m ANDs); each prefix level d = 1,2,4,..<m costs
//                    2(m-d) ANDs. Every AND opens 2 bits per party. A final
//                    round opens one bit per element for the daBit B2A.
//   max_kernel     : per tree level, ltz over the pairs then one mux product

struct Message {
  int from = 0;
  int to = 1;
  std::size_t bytes = 0;
};
using Phase = std::vector<Message>;

inline std::size_t bits_to_bytes(std::size_t bits) { return (bits + 7) / 8; }

// AND gates per element in each GMW round of ltz at window w.
inline std::vector<std::size_t> ltz_and_rounds(int w) {
  std::vector<std::size_t> rounds;
  const int m = w - 1;
  if (m < 1) return rounds;
  rounds.push_back(static_cast<std::size_t>(m));
  for (int d = 1; d < m; d *= 2) rounds.push_back(2 * static_cast<std::size_t>(m - d));
  return rounds;
}

inline std::size_t ltz_ands_per_element(int w) {
  std::size_t s = 0;
  for (auto a : ltz_and_rounds(w)) s += a;
  return s;
}

inline std::vector<Phase> ltz_phases(std::size_t n, int w) {
  std::vector<Phase> ph;
  for (auto ands : ltz_and_rounds(w)) {
    const auto b = bits_to_bytes(2 * ands * n);
    ph.push_back({{0, 1, b}, {1, 0, b}});
  }
  const auto b = bits_to_bytes(n);
  ph.push_back({{0, 1, b}, {1, 0, b}});
  return ph;
}

inline std::vector<Phase> beaver_phases(std::size_t products, int ring_width) {
  const auto b = 2 * products * static_cast<std::size_t>(Ring(ring_width).wire_bytes());
  return {{{0, 1, b}, {1, 0, b}}};
}

inline std::vector<std::vector<std::size_t>> max_groups(OpKind kind, const Attrs& a, const Shape& in) {
  return kind == OpKind::MaxPool ? pool_groups(in, a.window) : axis_groups(in, a.axis);
}

// Pairs compared at each level of the tree reduction over all groups.
inline std::vector<std::size_t> max_levels(const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  std::vector<std::size_t> levels;
  for (;;) {
    std::size_t pairs = 0;
    for (auto& s : sizes) {
      pairs += s / 2;
      s -= s / 2;
    }
    if (!pairs) break;
    levels.push_back(pairs);
  }
  return levels;
}

inline std::size_t mul_products(const Instr& i) {
  return product_plan(i.mul_kind, i.in_shapes.at(0), i.in_shapes.at(1)).products();
}

inline std::vector<Phase> comm_phases(const Instr& i, int ring_width) {
  const auto wb = static_cast<std::size_t>(Ring(ring_width).wire_bytes());
  switch (i.op) {
    case Opcode::ShareSend:
    case Opcode::ShareRecv: return {{{i.party, 1 - i.party, numel(i.shape) * wb}}};
    case Opcode::RevealSend:
    case Opcode::RevealRecv: return {{{1 - i.party, i.party, numel(i.shape) * wb}}};
    case Opcode::MulMPC: return beaver_phases(mul_products(i), ring_width);
    case Opcode::LtzMPC: return ltz_phases(numel(i.shape), i.window);
    case Opcode::MaxKernel: {
      std::vector<Phase> ph;
      for (auto pairs : max_levels(max_groups(i.kind, i.attrs, i.in_shapes.at(0)))) {
        for (auto& p : ltz_phases(pairs, i.window)) ph.push_back(std::move(p));
        for (auto& p : beaver_phases(pairs, ring_width)) ph.push_back(std::move(p));
      }
      return ph;
    }
    default: return {};
  }
}

// ---------------------------------------------------------------------------
// Round clock. Each party keeps a Lamport clock; a message is stamped with the
// sender's clock and lifts the receiver to stamp + 1. Consecutive messages in
// one direction share a round; the count grows when the direction flips.

struct RoundClock {
  std::array<std::uint64_t, 2> clock{0, 0};
  std::uint64_t stamp(int from) const { return clock[static_cast<std::size_t>(from)]; }
  void deliver(int to, std::uint64_t stamp) {
    auto& c = clock[static_cast<std::size_t>(to)];
    c = std::max(c, stamp + 1);
  }
  std::uint64_t rounds() const { return std::max(clock[0], clock[1]); }
};

// Cost categories of the overhead breakdown. Input sharing and output
// reveals are "io", kept out of the operator percentages.
inline std::string cost_category(const Instr& i) {
  switch (i.op) {
    case Opcode::MulMPC: return i.mul_kind == MulKind::Elementwise ? "mul" : "linear";
    case Opcode::LtzMPC: return "comparison";
    case Opcode::MaxKernel: return "max";
    case Opcode::ShareSend:
    case Opcode::ShareRecv:
    case Opcode::RevealSend:
    case Opcode::RevealRecv: return "io";
    default: return "other";
  }
}

inline const std::vector<std::string>& cost_categories() {
  static const std::vector<std::string> c = {"linear", "mul", "comparison", "max", "other", "io"};
  return c;
}

inline bool is_operator_category(const std::string& c) { return c != "io"; }

struct CategoryCost {
  std::array<std::uint64_t, 2> bytes{0, 0};
  std::uint64_t rounds = 0;
  std::uint64_t ops = 0;
  bool operator==(const CategoryCost&) const = default;
};

// Correlated randomness consumed, in elements.
struct TripleUsage {
  std::uint64_t arith = 0;   // Beaver triples (one per product)
  std::uint64_t boolean = 0; // AND triples
  std::uint64_t dabits = 0;
  bool operator==(const TripleUsage&) const = default;
};

struct CostReport {
  std::array<std::uint64_t, 2> bytes{0, 0};
  std::uint64_t rounds = 0;
  std::map<std::string, CategoryCost> categories;
  TripleUsage triples;
  // Comparison rounds as implemented (log w per ltz) next to the N log N
  // reading of the GMW comparison cost.
  std::uint64_t ltz_rounds_log = 0;
  std::uint64_t ltz_rounds_nlogn = 0;
  std::uint64_t ltz_calls = 0;  // element comparisons, max-kernel pairs included

  std::uint64_t total_bytes() const { return bytes[0] + bytes[1]; }
  bool operator==(const CostReport&) const = default;
};

inline TripleUsage triple_usage(const Instr& i) {
  TripleUsage u;
  auto ltz = [&](std::size_t n) {
    u.boolean += ltz_ands_per_element(i.window) * n;
    u.dabits += n;
  };
  switch (i.op) {
    case Opcode::MulMPC: u.arith = mul_products(i); break;
    case Opcode::LtzMPC: ltz(numel(i.shape)); break;
    case Opcode::MaxKernel:
      for (auto pairs : max_levels(max_groups(i.kind, i.attrs, i.in_shapes.at(0)))) {
        ltz(pairs);
        u.arith += pairs;
      }
      break;
    default: break;
  }
  return u;
}

inline std::uint64_t nlogn_rounds(int w) {
  return static_cast<std::uint64_t>(std::ceil(w * std::log2(std::max(2, w))));
}

inline CostReport static_cost(const ProgramPair& progs) {
  if (progs[0].ring_width != progs[1].ring_width) throw Error(Stage::Backend, "party programs disagree on ring width");
  const int N = progs[0].ring_width;
  const auto c0 = detail::comm_points(progs[0]);
  const auto c1 = detail::comm_points(progs[1]);
  if (c0.size() != c1.size()) throw Error(Stage::Backend, "party programs have different communication points");
  CostReport r;
  for (const auto& c : cost_categories()) r.categories[c];
  RoundClock clk;
  for (std::size_t k = 0; k < c0.size(); ++k) {
    const Instr& i = progs[0].instrs[c0[k]];
    if (!detail::comm_match(i, progs[1].instrs[c1[k]])) {
      throw Error(Stage::Backend, "communication points misaligned at party-0 instruction " + std::to_string(c0[k]), i.site);
    }
    auto& cat = r.categories[cost_category(i)];
    const auto before = clk.rounds();
    for (const auto& phase : comm_phases(i, N)) {
      std::array<std::uint64_t, 2> stamps{clk.stamp(0), clk.stamp(1)};
      for (const auto& m : phase) {
        r.bytes[static_cast<std::size_t>(m.from)] += m.bytes;
        cat.bytes[static_cast<std::size_t>(m.from)] += m.bytes;
      }
      for (const auto& m : phase) clk.deliver(m.to, stamps[static_cast<std::size_t>(m.from)]);
    }
    cat.rounds += clk.rounds() - before;
    ++cat.ops;
    const auto u = triple_usage(i);
    r.triples.arith += u.arith;
    r.triples.boolean += u.boolean;
    r.triples.dabits += u.dabits;
    if (i.op == Opcode::LtzMPC) {
      r.ltz_calls += numel(i.shape);
      r.ltz_rounds_log += ltz_phases(1, i.window).size();
      r.ltz_rounds_nlogn += nlogn_rounds(i.window);
    } else if (i.op == Opcode::MaxKernel) {
      for (auto pairs : max_levels(max_groups(i.kind, i.attrs, i.in_shapes.at(0)))) {
        r.ltz_calls += pairs;
        r.ltz_rounds_log += ltz_phases(1, i.window).size();
        r.ltz_rounds_nlogn += nlogn_rounds(i.window);
      }
    }
  }
  r.rounds = clk.rounds();
  return r;
}

inline nlohmann::json cost_to_json(const CostReport& r) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, c] : r.categories) {
    cats[name] = {{"bytes0", c.bytes[0]}, {"bytes1", c.bytes[1]}, {"rounds", c.rounds}, {"ops", c.ops}};
  }
  return {{"bytes0", r.bytes[0]},
          {"bytes1", r.bytes[1]},
          {"rounds", r.rounds},
          {"per_op", cats},
          {"triples", {{"arith", r.triples.arith}, {"boolean", r.triples.boolean}, {"dabits", r.triples.dabits}}},
          {"comparison_rounds", {{"implemented_log_w", r.ltz_rounds_log}, {"n_log_n_estimate", r.ltz_rounds_nlogn}}},
          {"ltz_calls", r.ltz_calls}};
}

inline CostReport cost_from_json(const nlohmann::json& j) {
  CostReport r;
  r.bytes = {j.at("bytes0").get<std::uint64_t>(), j.at("bytes1").get<std::uint64_t>()};
  r.rounds = j.at("rounds").get<std::uint64_t>();
  for (const auto& [name, c] : j.at("per_op").items()) {
    r.categories[name] = {{c.at("bytes0").get<std::uint64_t>(), c.at("bytes1").get<std::uint64_t>()},
                          c.at("rounds").get<std::uint64_t>(),
                          c.at("ops").get<std::uint64_t>()};
  }
  const auto& t = j.at("triples");
  r.triples = {t.at("arith").get<std::uint64_t>(), t.at("boolean").get<std::uint64_t>(), t.at("dabits").get<std::uint64_t>()};
  r.ltz_rounds_log = j.at("comparison_rounds").at("implemented_log_w").get<std::uint64_t>();
  r.ltz_rounds_nlogn = j.at("comparison_rounds").at("n_log_n_estimate").get<std::uint64_t>();
  r.ltz_calls = j.at("ltz_calls").get<std::uint64_t>();
  return r;
}

}  // namespace mpcc
