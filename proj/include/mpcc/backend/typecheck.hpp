#pragma once

#include <map>
#include <string>
#include <vector>

#include "mpcc/backend/program.hpp"

namespace mpcc {

struct TypeViolation {
  int party = 0;
  std::size_t index = 0;
  std::string message;
};

inline std::string to_string(const TypeViolation& v) {
  return "party " + std::to_string(v.party) + " instruction " + std::to_string(v.index) + ": " + v.message;
}

namespace detail {

inline std::vector<std::size_t> comm_points(const PartyProgram& p) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.instrs.size(); ++i)
    if (is_comm(p.instrs[i].op)) out.push_back(i);
  return out;
}

inline bool comm_match(const Instr& a, const Instr& b) {
  return comm_class(a.op) == comm_class(b.op) && a.node == b.node && a.shape == b.shape &&
         a.in_shapes == b.in_shapes && a.mul_kind == b.mul_kind && a.window == b.window && a.party == b.party &&
         a.kind == b.kind;
}

inline void check_party(const PartyProgram& prog, std::vector<TypeViolation>& out) {
  struct RegInfo {
    BackType type;
    std::size_t def;
  };
  std::map<int, RegInfo> regs;
  std::map<int, std::vector<std::size_t>> users;
  auto bad = [&](std::size_t i, std::string m) { out.push_back({prog.party, i, std::move(m)}); };

  for (std::size_t k = 0; k < prog.instrs.size(); ++k) {
    const Instr& i = prog.instrs[k];
    std::vector<const BackType*> in;
    bool ok = true;
    for (int r : i.in) {
      auto it = regs.find(r);
      if (it == regs.end()) {
        bad(k, "reads undefined register " + std::to_string(r));
        ok = false;
        continue;
      }
      in.push_back(&it->second.type);
      users[r].push_back(k);
    }
    if (i.out >= 0) {
      if (regs.count(i.out)) bad(k, "register " + std::to_string(i.out) + " written twice");
      regs[i.out] = {i.type, k};
    }
    if (!ok) continue;

    switch (i.op) {
      case Opcode::Add:
      case Opcode::Sub:
        if (in.size() != 2 || !in[0]->is_secret() || !in[1]->is_secret()) {
          bad(k, "share add expects two secret operands");
        } else if (in[0]->scale != in[1]->scale || i.type.scale != in[0]->scale) {
          bad(k, "scale mismatch: " + std::to_string(in[0]->scale) + " vs " + std::to_string(in[1]->scale));
        }
        break;
      case Opcode::AddPublic:
      case Opcode::SubPublic:
      case Opcode::RSubPublic:
        if (prog.party != 0) bad(k, "public addend outside party 0");
        if (in.size() == 2 && in[0]->scale != in[1]->scale) {
          bad(k, "scale mismatch: " + std::to_string(in[0]->scale) + " vs " + std::to_string(in[1]->scale));
        }
        break;
      case Opcode::MulPublic:
        if (in.size() == 2 && in[0]->is_secret() && in[1]->is_secret()) bad(k, "plain mul on two secrets");
        break;
      case Opcode::MulMPC:
        if (in.size() != 2 || !in[0]->is_secret() || !in[1]->is_secret()) bad(k, "mul_mpc expects two secret operands");
        break;
      case Opcode::LtzMPC:
        if (i.type.scale != 1) bad(k, "ltz output scale " + std::to_string(i.type.scale) + " is not 1");
        if (i.window < 1 || i.window > prog.ring_width) bad(k, "ltz window " + std::to_string(i.window) + " out of range");
        break;
      case Opcode::Trunc:
        if (!in.empty() && (i.scale_from < 1 || in[0]->scale % i.scale_from || i.type.scale != in[0]->scale / i.scale_from)) {
          bad(k, "trunc result scale inconsistent");
        }
        break;
      default: break;
    }
  }

  // Every Beaver product must be consumed by trunc(s_min) and nothing else.
  for (std::size_t k = 0; k < prog.instrs.size(); ++k) {
    const Instr& i = prog.instrs[k];
    if (i.op != Opcode::MulMPC || i.in.size() != 2) continue;
    if (!regs.count(i.in[0]) || !regs.count(i.in[1])) continue;
    const auto smin = std::min(regs[i.in[0]].type.scale, regs[i.in[1]].type.scale);
    const auto& u = users[i.out];
    if (u.size() != 1 || prog.instrs[u[0]].op != Opcode::Trunc || prog.instrs[u[0]].scale_from != smin) {
      bad(k, "mul_mpc not followed by trunc(" + std::to_string(smin) + ")");
    }
  }
}

}  // namespace detail

inline std::vector<TypeViolation> typecheck_lowered(const ProgramPair& progs) {
  std::vector<TypeViolation> out;
  for (const auto& p : progs) detail::check_party(p, out);
  const auto c0 = detail::comm_points(progs[0]);
  const auto c1 = detail::comm_points(progs[1]);
  const std::size_t n = std::min(c0.size(), c1.size());
  for (std::size_t k = 0; k < n; ++k) {
    const Instr& a = progs[0].instrs[c0[k]];
    const Instr& b = progs[1].instrs[c1[k]];
    if (!detail::comm_match(a, b)) {
      out.push_back({0, c0[k],
                     std::string("communication points misaligned: ") + opcode_name(a.op) + " vs party 1 instruction " +
                         std::to_string(c1[k]) + " " + opcode_name(b.op)});
      break;
    }
  }
  if (c0.size() != c1.size()) {
    out.push_back({0, n < c0.size() ? c0[n] : progs[0].instrs.size(),
                   "communication point count differs: " + std::to_string(c0.size()) + " vs " + std::to_string(c1.size())});
  }
  return out;
}

}  // namespace mpcc
