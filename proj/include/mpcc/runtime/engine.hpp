#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpcc/backend/cost.hpp"
#include "mpcc/backend/program.hpp"
#include "mpcc/ir/interpret.hpp"
#include "mpcc/runtime/protocols.hpp"

namespace mpcc {

struct RegValue {
  enum class Kind : std::uint8_t { Empty, Float, Ring, Share };
  Kind kind = Kind::Empty;
  DTensor f;         // Float: public plaintext
  RingTensor r;      // Ring: public encoded integers; Share: this party's share
  std::int64_t scale = 1;
};

struct ExecOptions {
  std::uint64_t seed = 1;
  bool check_ltz = false;       // reconstruct every comparison and count sign errors (debug only)
  bool keep_registers = false;  // return both parties' final registers
};

struct ExecResult {
  std::vector<DTensor> outputs;  // as revealed to the output party
  CostReport measured;
  std::vector<TranscriptEntry> transcript;
  std::size_t ltz_checked = 0;
  std::size_t ltz_errors = 0;
  std::array<std::vector<RegValue>, 2> registers;
};

namespace detail {

inline std::vector<std::size_t> shape_op_plan(const Instr& i) {
  const Shape& in = i.in_shapes.at(0);
  switch (i.kind) {
    case OpKind::Expand:
      if (numel(in) == 1) return std::vector<std::size_t>(numel(i.shape), 0);
      return expand_plan(in, i.attrs.dims);
    case OpKind::Transpose: return permute_plan(in, transpose_order(in.size()));
    case OpKind::Permute: return permute_plan(in, i.attrs.dims);
    case OpKind::Reshape:
    case OpKind::Flatten: {
      std::vector<std::size_t> p(numel(in));
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = k;
      return p;
    }
    default: throw ProtocolError(std::string("no index plan for ") + op_name(i.kind));
  }
}

class PartyEngine {
 public:
  PartyEngine(const PartyProgram& prog, TensorMap inputs, std::uint64_t seed)
      : prog_(prog), ring_(prog.ring_width), inputs_(std::move(inputs)), regs_(static_cast<std::size_t>(prog.registers)) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(prog.party), std::uint64_t{0x5eed}};
    rng_.seed(seq);
  }

  // Runs local instructions up to the next communication point.
  void run_local() {
    while (pc_ < prog_.instrs.size() && !is_comm(prog_.instrs[pc_].op)) {
      try {
        exec(prog_.instrs[pc_]);
      } catch (const ShapeError& e) {
        throw ProtocolError("party " + std::to_string(prog_.party) + " instruction " + std::to_string(pc_) + ": " + e.what());
      }
      ++pc_;
    }
  }

  bool done() const { return pc_ >= prog_.instrs.size(); }
  std::size_t pc() const { return pc_; }
  const Instr& current() const { return prog_.instrs.at(pc_); }
  void advance() { ++pc_; }
  int party() const { return prog_.party; }

  RegValue& reg(int r) { return regs_.at(static_cast<std::size_t>(r)); }
  ShareTensor share(int r) {
    const RegValue& v = reg(r);
    if (v.kind != RegValue::Kind::Share) throw ProtocolError("register " + std::to_string(r) + " does not hold a share");
    return {v.r, v.scale, prog_.party};
  }
  void set_share(int r, ShareTensor s) { reg(r) = {RegValue::Kind::Share, {}, std::move(s.values), s.scale}; }
  const DTensor& input(const std::string& name) const {
    auto it = inputs_.find(name);
    if (it == inputs_.end()) {
      throw ProtocolError("party " + std::to_string(prog_.party) + " has no value for input '" + name + "'");
    }
    return it->second;
  }
  Rng& rng() { return rng_; }
  std::map<int, DTensor>& outputs() { return outputs_; }
  std::vector<RegValue>& registers() { return regs_; }

 private:
  const RegValue& in(const Instr& i, std::size_t k) { return reg(i.in.at(k)); }

  void put_share(const Instr& i, RingTensor v, std::int64_t scale) {
    reg(i.out) = {RegValue::Kind::Share, {}, std::move(v), scale};
  }

  void exec(const Instr& i) {
    const Ring& R = ring_;
    const int p = prog_.party;
    switch (i.op) {
      case Opcode::LoadPublic: {
        const DTensor& x = input(i.name);
        if (x.shape != i.shape) {
          throw ProtocolError("input '" + i.name + "' has shape " + shape_str(x.shape) + ", expected " + shape_str(i.shape));
        }
        reg(i.out) = {RegValue::Kind::Float, x, {}, 1};
        break;
      }
      case Opcode::ConstPublic:
        reg(i.out) = {RegValue::Kind::Float, DTensor(i.shape, i.attrs.value), {}, 1};
        break;
      case Opcode::PublicEval: {
        Node n;
        n.op = i.kind;
        n.attrs = i.attrs;
        n.meta.shape = i.shape;
        n.site = i.site;
        std::vector<const DTensor*> args;
        for (std::size_t k = 0; k < i.in.size(); ++k) args.push_back(&in(i, k).f);
        reg(i.out) = {RegValue::Kind::Float, eval_node(n, args), {}, 1};
        break;
      }
      case Opcode::EncodePublic:
        reg(i.out) = {RegValue::Kind::Ring, {}, encode_tensor(R, in(i, 0).f, i.scale_to), i.scale_to};
        break;
      case Opcode::PublicToShare: {
        RingTensor v = in(i, 0).r;
        if (p != 0) std::fill(v.data.begin(), v.data.end(), u64{0});
        put_share(i, std::move(v), i.scale_to);
        break;
      }
      case Opcode::Add:
      case Opcode::Sub: {
        const auto a = share(i.in[0]), b = share(i.in[1]);
        set_share(i.out, i.op == Opcode::Add ? add_shares(R, a, b) : sub_shares(R, a, b));
        break;
      }
      case Opcode::AddPublic:
      case Opcode::SubPublic:
      case Opcode::RSubPublic: {
        const bool sec_first = i.op != Opcode::RSubPublic;
        const auto s = share(i.in[sec_first ? 0 : 1]);
        const RingTensor& c = in(i, sec_first ? 1 : 0).r;
        RingTensor v = detail::ring_binary(s.values, c, [&](u64 x, u64 k) {
          if (i.op == Opcode::AddPublic) return R.add(x, k);
          if (i.op == Opcode::SubPublic) return R.sub(x, k);
          return R.sub(k, x);
        });
        put_share(i, std::move(v), s.scale);
        break;
      }
      case Opcode::Neg: {
        auto s = share(i.in[0]);
        for (auto& v : s.values.data) v = R.neg(v);
        set_share(i.out, std::move(s));
        break;
      }
      case Opcode::Copy: set_share(i.out, share(i.in[0])); break;
      case Opcode::Rescale: {
        const auto s = share(i.in[0]);
        if (i.scale_to >= i.scale_from) {
          const u64 f = static_cast<u64>(i.scale_to / i.scale_from);
          RingTensor v(s.values.shape);
          for (std::size_t k = 0; k < v.size(); ++k) v[k] = R.mul(s.values[k], f);
          put_share(i, std::move(v), i.scale_to);
        } else {
          set_share(i.out, trunc_local(R, s, i.scale_from / i.scale_to));
        }
        break;
      }
      case Opcode::Trunc: set_share(i.out, trunc_local(R, share(i.in[0]), i.scale_from)); break;
      case Opcode::MulPublic: {
        const auto s = share(i.in[0]);
        const RingTensor& c = in(i, 1).r;
        const RingTensor& lhs = i.pub_lhs ? c : s.values;
        const RingTensor& rhs = i.pub_lhs ? s.values : c;
        const ProductPlan plan = product_plan(i.mul_kind, lhs.shape, rhs.shape);
        RingTensor v(plan.out_shape);
        for (std::size_t k = 0; k < plan.products(); ++k) {
          v[plan.out_idx[k]] = R.add(v[plan.out_idx[k]], R.mul(lhs[plan.lhs_idx[k]], rhs[plan.rhs_idx[k]]));
        }
        put_share(i, std::move(v), s.scale * in(i, 1).scale);
        break;
      }
      case Opcode::ShapeOp: {
        if (i.kind == OpKind::Stack) {
          std::vector<ShareTensor> parts;
          std::vector<const RingTensor*> ptrs;
          for (int r : i.in) parts.push_back(share(r));
          for (const auto& s : parts) ptrs.push_back(&s.values);
          put_share(i, stack_tensors<u64>(ptrs, i.attrs.axis), parts.front().scale);
          break;
        }
        const auto s = share(i.in[0]);
        put_share(i, gather(s.values, i.shape, shape_op_plan(i)), s.scale);
        break;
      }
      case Opcode::ReduceSum: {
        const auto s = share(i.in[0]);
        const auto groups = i.kind == OpKind::AvgPool ? pool_groups(s.values.shape, i.attrs.window)
                                                      : axis_groups(s.values.shape, i.attrs.axis);
        RingTensor v(i.shape);
        for (std::size_t g = 0; g < groups.size(); ++g)
          for (auto idx : groups[g]) v[g] = R.add(v[g], s.values[idx]);
        put_share(i, std::move(v), s.scale);
        break;
      }
      case Opcode::Output: {
        const RegValue& v = in(i, 0);
        if (v.kind != RegValue::Kind::Float) throw ProtocolError("output register does not hold a public value");
        outputs_[i.output_index] = v.f;
        break;
      }
      default: throw ProtocolError(std::string("instruction ") + opcode_name(i.op) + " is not local");
    }
  }

  const PartyProgram& prog_;
  Ring ring_;
  TensorMap inputs_;
  std::vector<RegValue> regs_;
  std::size_t pc_ = 0;
  Rng rng_;
  std::map<int, DTensor> outputs_;
};

}  // namespace detail

// Inputs each party may see: its own secret inputs and every public input.
inline std::array<TensorMap, 2> split_inputs(const ProgramPair& progs, const TensorMap& all) {
  std::array<TensorMap, 2> out;
  for (int p = 0; p < 2; ++p)
    for (const auto& i : progs[static_cast<std::size_t>(p)].instrs) {
      if (i.op != Opcode::ShareSend && i.op != Opcode::LoadPublic) continue;
      auto it = all.find(i.name);
      if (it == all.end()) throw Error(Stage::Runtime, "missing value for input '" + i.name + "'", i.site);
      out[static_cast<std::size_t>(p)][i.name] = it->second;
    }
  return out;
}

inline ExecResult execute(const ProgramPair& progs, const std::array<TensorMap, 2>& inputs, const ExecOptions& opt = {}) {
  if (progs[0].party != 0 || progs[1].party != 1) throw ProtocolError("programs must be ordered by party");
  if (progs[0].ring_width != progs[1].ring_width) throw ProtocolError("programs disagree on ring width");
  const Ring ring(progs[0].ring_width);
  // Misaligned programs have no static prediction; the scheduler below then
  // reports the first diverging instruction pair.
  std::optional<TripleUsage> budget;
  try {
    budget = static_cost(progs).triples;
  } catch (const Error&) {
  }

  Channel ch;
  Dealer dealer(ring, opt.seed * 0x9e3779b97f4a7c15ull + 17, budget);
  ExecResult res;
  MpcContext ctx{ring, ch, dealer, {}};
  ctx.on_ltz = [&](const SharePair& x, const SharePair& out, int) {
    res.measured.ltz_calls += x[0].values.size();
    if (!opt.check_ltz) return;
    const RingTensor xv = reconstruct(ring, x), ov = reconstruct(ring, out);
    for (std::size_t k = 0; k < xv.size(); ++k) {
      ++res.ltz_checked;
      if (ov[k] != (ring.to_signed(xv[k]) < 0 ? 1u : 0u)) ++res.ltz_errors;
    }
  };
  for (const auto& c : cost_categories()) res.measured.categories[c];

  std::array<detail::PartyEngine, 2> eng{detail::PartyEngine(progs[0], inputs[0], opt.seed),
                                         detail::PartyEngine(progs[1], inputs[1], opt.seed)};
  for (;;) {
    eng[0].run_local();
    eng[1].run_local();
    if (eng[0].done() && eng[1].done()) break;
    if (eng[0].done() || eng[1].done()) {
      const int waiting = eng[0].done() ? 1 : 0;
      const auto& w = eng[static_cast<std::size_t>(waiting)];
      throw ProtocolError("desynchronized programs: party " + std::to_string(waiting) + " instruction " +
                          std::to_string(w.pc()) + " (" + opcode_name(w.current().op) + ") has no partner; party " +
                          std::to_string(1 - waiting) + " program ended");
    }
    const Instr& a = eng[0].current();
    const Instr& b = eng[1].current();
    if (!detail::comm_match(a, b)) {
      throw ProtocolError("desynchronized programs: party 0 instruction " + std::to_string(eng[0].pc()) + " (" +
                          opcode_name(a.op) + ") vs party 1 instruction " + std::to_string(eng[1].pc()) + " (" +
                          opcode_name(b.op) + ")");
    }
    const std::string cat = cost_category(a);
    ch.begin(static_cast<std::int64_t>(eng[0].pc()), cat);
    const auto rounds_before = ch.rounds();
    auto pair_of = [&](int r0, int r1) { return SharePair{eng[0].share(r0), eng[1].share(r1)}; };

    switch (comm_class(a.op)) {
      case Opcode::ShareSend: {
        const int o = a.party;
        auto& owner = eng[static_cast<std::size_t>(o)];
        auto& other = eng[static_cast<std::size_t>(1 - o)];
        const DTensor& x = owner.input(owner.current().name);
        if (x.shape != a.shape) {
          throw ProtocolError("input '" + owner.current().name + "' has shape " + shape_str(x.shape) + ", expected " +
                              shape_str(a.shape));
        }
        const RingTensor enc = encode_tensor(ring, x, a.scale_to);
        const RingTensor r = random_ring(ring, enc.shape, owner.rng());
        RingTensor keep(enc.shape);
        for (std::size_t k = 0; k < enc.size(); ++k) keep[k] = ring.sub(enc[k], r[k]);
        ch.send(o, 1 - o, pack_ring(ring, r.data));
        owner.set_share(owner.current().out, {std::move(keep), a.scale_to, o});
        RingTensor got(a.shape, unpack_ring(ring, ch.recv(1 - o, o), enc.size()));
        other.set_share(other.current().out, {std::move(got), a.scale_to, 1 - o});
        break;
      }
      case Opcode::RevealSend: {
        const int t = a.party;
        auto& target = eng[static_cast<std::size_t>(t)];
        auto& sender = eng[static_cast<std::size_t>(1 - t)];
        const ShareTensor mine = sender.share(sender.current().in.at(0));
        ch.send(1 - t, t, pack_ring(ring, mine.values.data));
        const Instr& ri = target.current();
        const ShareTensor own = target.share(ri.in.at(0));
        const ShareTensor theirs{RingTensor(ri.shape, unpack_ring(ring, ch.recv(t, 1 - t), own.values.size())),
                                 own.scale, 1 - t};
        target.reg(ri.out) = {RegValue::Kind::Float, decode_tensor(ring, reconstruct(ring, own, theirs), ri.scale_from), {}, 1};
        break;
      }
      case Opcode::MulMPC: {
        const SharePair x = pair_of(a.in[0], b.in[0]);
        const SharePair y = pair_of(a.in[1], b.in[1]);
        ArithTriples t = dealer.arith(product_plan(a.mul_kind, x[0].values.shape, y[0].values.shape).products());
        SharePair z = beaver_mul(ctx, x, y, a.mul_kind, t);
        eng[0].set_share(a.out, std::move(z[0]));
        eng[1].set_share(b.out, std::move(z[1]));
        break;
      }
      case Opcode::LtzMPC: {
        SharePair z = ltz_protocol(ctx, pair_of(a.in[0], b.in[0]), a.window);
        eng[0].set_share(a.out, std::move(z[0]));
        eng[1].set_share(b.out, std::move(z[1]));
        break;
      }
      case Opcode::MaxKernel: {
        const SharePair x = pair_of(a.in[0], b.in[0]);
        SharePair z = max_kernel(ctx, x, max_groups(a.kind, a.attrs, x[0].values.shape), a.shape, a.window);
        eng[0].set_share(a.out, std::move(z[0]));
        eng[1].set_share(b.out, std::move(z[1]));
        break;
      }
      default: throw ProtocolError(std::string("unexpected communication instruction ") + opcode_name(a.op));
    }
    auto& cc = res.measured.categories[cat];
    cc.rounds += ch.rounds() - rounds_before;
    ++cc.ops;
    eng[0].advance();
    eng[1].advance();
  }
  if (!ch.idle()) throw ProtocolError("messages left undelivered at program end");

  res.measured.bytes = ch.bytes();
  res.measured.rounds = ch.rounds();
  for (const auto& [cat, b] : ch.category_bytes()) res.measured.categories[cat].bytes = b;
  res.measured.triples = dealer.used();
  if (!budget || !(dealer.used() == *budget)) {
    throw ProtocolError("correlated randomness consumed differs from the static prediction");
  }
  res.transcript = ch.transcript();

  const auto has_output = [](const PartyProgram& pr) {
    return std::any_of(pr.instrs.begin(), pr.instrs.end(), [](const Instr& i) { return i.op == Opcode::Output; });
  };
  const int t = has_output(progs[0]) ? 0 : 1;
  auto& outs = eng[static_cast<std::size_t>(t)].outputs();
  for (std::size_t k = 0; k < progs[0].outputs; ++k) {
    auto it = outs.find(static_cast<int>(k));
    if (it == outs.end()) throw ProtocolError("output " + std::to_string(k) + " was never produced");
    res.outputs.push_back(it->second);
  }
  if (opt.keep_registers) {
    res.registers[0] = std::move(eng[0].registers());
    res.registers[1] = std::move(eng[1].registers());
  }
  return res;
}

inline ExecResult execute(const ProgramPair& progs, const TensorMap& inputs, const ExecOptions& opt = {}) {
  return execute(progs, split_inputs(progs, inputs), opt);
}

// Byte, round, category and randomness counters agree exactly.
inline bool counters_match(const CostReport& predicted, const CostReport& measured) {
  if (predicted.bytes != measured.bytes || predicted.rounds != measured.rounds) return false;
  if (!(predicted.triples == measured.triples) || predicted.ltz_calls != measured.ltz_calls) return false;
  for (const auto& c : cost_categories()) {
    const auto p = predicted.categories.count(c) ? predicted.categories.at(c) : CategoryCost{};
    const auto m = measured.categories.count(c) ? measured.categories.at(c) : CategoryCost{};
    if (!(p == m)) return false;
  }
  return true;
}

}  // namespace mpcc
