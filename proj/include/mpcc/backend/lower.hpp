#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mpcc/backend/program.hpp"
#include "mpcc/core/error.hpp"
#include "mpcc/frontend/ownership.hpp"
#include "mpcc/ir/interpret.hpp"
#include "mpcc/ir/validate.hpp"

namespace mpcc {

struct LowerConfig {
  int ring_width = 64;
  std::int64_t scale = std::int64_t{1} << 16;  // s_d
  int reveal_to = 0;
  int default_window = 0;  // 0: ring width (no window)
  std::map<std::string, int> windows;  // per comparison site

  int window_for(const std::string& site) const {
    if (auto it = windows.find(site); it != windows.end()) return it->second;
    return default_window > 0 ? default_window : ring_width;
  }
};

struct Lowered {
  ProgramPair programs;
  // Register holding each node's value at each party; -1 where absent.
  std::map<int, std::array<int, 2>> node_regs;
  std::map<int, BackType> node_types;
  // Instructions emitted on behalf of each node, summed over both parties.
  std::map<int, std::size_t> node_instrs;
};

namespace detail {

class Lowerer {
 public:
  Lowerer(const Graph& g, const LowerConfig& cfg) : g_(g), cfg_(cfg), ring_(cfg.ring_width) {
    if (cfg.reveal_to != 0 && cfg.reveal_to != 1) throw Error(Stage::Backend, "reveal_to must be 0 or 1");
    if (!is_power_of_two(cfg.scale)) throw Error(Stage::Backend, "default scale must be a power of two");
    if (log2_exact(cfg.scale) > cfg.ring_width - 8) {
      throw Error(Stage::Backend, "default scale 2^" + std::to_string(log2_exact(cfg.scale)) +
                                      " leaves no headroom in a " + std::to_string(cfg.ring_width) + "-bit ring");
    }
    for (int p = 0; p < 2; ++p) {
      out_.programs[p].party = p;
      out_.programs[p].ring_width = cfg.ring_width;
      out_.programs[p].scale = cfg.scale;
    }
  }

  Lowered run() {
    const auto live = live_nodes(g_);
    for (int id : topo_order(g_)) {
      if (!live.count(id)) continue;
      cur_ = &g_.node(id);
      lower_node(*cur_);
    }
    std::size_t idx = 0;
    for (int o : g_.outputs) {
      cur_ = &g_.node(o);
      Val v = vals_.at(o);
      if (v.type.is_secret() && !v.revealed) v = reveal(v);
      const int t = cfg_.reveal_to;
      Instr i = base(Opcode::Output, v);
      i.in = {v.reg[t]};
      i.output_index = static_cast<int>(idx++);
      emit(t, std::move(i));
    }
    for (int p = 0; p < 2; ++p) out_.programs[p].outputs = g_.outputs.size();
    return std::move(out_);
  }

 private:
  struct Val {
    BackType type;
    std::array<int, 2> reg{-1, -1};
    Shape shape;
    bool revealed = false;
  };

  std::int64_t sd() const { return cfg_.scale; }
  BackType secret(std::int64_t s) const { return {Label::Secret, DType{DType::Kind::Int, cfg_.ring_width}, s}; }

  Instr base(Opcode op, const Val& like) const {
    Instr i;
    i.op = op;
    i.node = cur_->id;
    i.site = cur_->site;
    i.type = like.type;
    i.shape = like.shape;
    return i;
  }

  int emit(int p, Instr i) {
    auto& prog = out_.programs[static_cast<std::size_t>(p)];
    if (i.out < 0 && i.op != Opcode::Output && i.op != Opcode::RevealSend) i.out = prog.registers++;
    const int r = i.out;
    ++out_.node_instrs[cur_->id];
    prog.instrs.push_back(std::move(i));
    return r;
  }

  // Same local instruction at both parties, with per-party operands.
  Val emit_both(Instr i, const std::vector<std::array<int, 2>>& ins) {
    Val v{i.type, {-1, -1}, i.shape, false};
    for (int p = 0; p < 2; ++p) {
      Instr c = i;
      for (const auto& r : ins) c.in.push_back(r[static_cast<std::size_t>(p)]);
      v.reg[static_cast<std::size_t>(p)] = emit(p, std::move(c));
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(Stage::Backend, msg + " at node " + std::to_string(cur_->id), cur_->site);
  }

  const Val& arg(std::size_t k) const {
    const Val& v = vals_.at(cur_->inputs.at(k));
    if (v.revealed) fail("revealed value used as an operand");
    return v;
  }

  static bool is_int(const Val& v) { return v.type.dtype.kind != DType::Kind::Float; }

  void guard_scale(std::int64_t s1, std::int64_t s2) const {
    const int e = log2_exact(s1) + log2_exact(s2);
    if (e > cfg_.ring_width - 8) {
      fail("scale overflow: product scale 2^" + std::to_string(e) + " exceeds 2^" + std::to_string(cfg_.ring_width - 8) +
           " in a " + std::to_string(cfg_.ring_width) + "-bit ring");
    }
  }

  Val rescale(const Val& v, std::int64_t to) {
    if (v.type.scale == to) return v;
    if (to > v.type.scale) guard_scale(v.type.scale, to / v.type.scale);
    Instr i = base(Opcode::Rescale, v);
    i.scale_from = v.type.scale;
    i.scale_to = to;
    i.type = secret(to);
    return emit_both(std::move(i), {v.reg});
  }

  Val trunc(const Val& v, std::int64_t by) {
    Instr i = base(Opcode::Trunc, v);
    i.scale_from = by;
    i.type = secret(v.type.scale / by);
    return emit_both(std::move(i), {v.reg});
  }

  // Broadcast a size-1 share to the node's output shape.
  Val broadcast(const Val& v, const Shape& to) {
    if (v.shape == to) return v;
    Instr i = base(Opcode::ShapeOp, v);
    i.kind = OpKind::Expand;
    i.attrs.dims = to;
    i.in_shapes = {v.shape};
    i.shape = to;
    return emit_both(std::move(i), {v.reg});
  }

  // Public operand as a ring integer at `scale`, at the listed parties only.
  std::array<int, 2> encode_public(const Val& pub, std::int64_t scale, std::initializer_list<int> parties) {
    std::array<int, 2> r{-1, -1};
    for (int p : parties) {
      Instr i = base(Opcode::EncodePublic, pub);
      i.in = {pub.reg[static_cast<std::size_t>(p)]};
      i.scale_from = 1;
      i.scale_to = scale;
      i.type = {Label::Pub, DType::i64(), scale};
      r[static_cast<std::size_t>(p)] = emit(p, std::move(i));
    }
    return r;
  }

  Val public_value(const Node& n, Opcode op) {
    Val v{{Label::Pub, n.meta.dtype, 1}, {-1, -1}, n.meta.shape, false};
    Instr i = base(op, v);
    i.kind = n.op;
    i.attrs = n.attrs;
    if (op == Opcode::ConstPublic && n.op != OpKind::Const) {
      // Value-free ops depend only on shape: fold to a literal.
      i.kind = OpKind::Const;
      i.attrs = {};
      i.attrs.value.assign(numel(n.meta.shape), n.op == OpKind::FullLike ? n.attrs.fill : 0.0);
    }
    std::vector<std::array<int, 2>> ins;
    if (op == Opcode::PublicEval) {
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        ins.push_back(arg(k).reg);
        i.in_shapes.push_back(arg(k).shape);
      }
    }
    if (op == Opcode::LoadPublic) i.name = n.attrs.name;
    return emit_both(std::move(i), ins);
  }

  Val reveal(const Val& v) {
    const int t = cfg_.reveal_to;
    Instr send = base(Opcode::RevealSend, v);
    send.in = {v.reg[static_cast<std::size_t>(1 - t)]};
    send.party = t;
    emit(1 - t, std::move(send));
    Instr recv = base(Opcode::RevealRecv, v);
    recv.in = {v.reg[static_cast<std::size_t>(t)]};
    recv.party = t;
    recv.scale_from = v.type.scale;
    recv.type = {Label::Pub, DType::f64(), 1};
    Val r{recv.type, {-1, -1}, v.shape, true};
    r.reg[static_cast<std::size_t>(t)] = emit(t, std::move(recv));
    return r;
  }

  Val add_like(const Node& n, bool subtract) {
    const Val& a = arg(0);
    const Val& b = arg(1);
    const Opcode op = subtract ? Opcode::Sub : Opcode::Add;
    if (a.type.is_secret() && b.type.is_secret()) {
      const std::int64_t s = std::max(a.type.scale, b.type.scale);
      const Val x = rescale(a, s), y = rescale(b, s);
      Instr i = base(op, x);
      i.type = secret(s);
      i.shape = n.meta.shape;
      i.in_shapes = {x.shape, y.shape};
      return emit_both(std::move(i), {x.reg, y.reg});
    }
    const bool sec_left = a.type.is_secret();
    const Val& sec = sec_left ? a : b;
    const Val& pub = sec_left ? b : a;
    // Integers are exact at any scale; floats never go below s_d.
    const std::int64_t s = is_int(pub) ? sec.type.scale : std::max(sec.type.scale, sd());
    const Val x = broadcast(rescale(sec, s), n.meta.shape);
    const auto enc = encode_public(pub, s, {0});
    Opcode op0 = Opcode::AddPublic, op1 = Opcode::Copy;
    if (subtract) {
      op0 = sec_left ? Opcode::SubPublic : Opcode::RSubPublic;
      op1 = sec_left ? Opcode::Copy : Opcode::Neg;
    }
    Val v{secret(s), {-1, -1}, n.meta.shape, false};
    Instr i0 = base(op0, v);
    i0.in = sec_left ? std::vector<int>{x.reg[0], enc[0]} : std::vector<int>{enc[0], x.reg[0]};
    i0.in_shapes = sec_left ? std::vector<Shape>{x.shape, pub.shape} : std::vector<Shape>{pub.shape, x.shape};
    v.reg[0] = emit(0, std::move(i0));
    Instr i1 = base(op1, v);
    i1.in = {x.reg[1]};
    i1.in_shapes = {x.shape};
    v.reg[1] = emit(1, std::move(i1));
    return v;
  }

  Val mul_like(const Node& n) {
    const Val& a = arg(0);
    const Val& b = arg(1);
    const MulKind kind = mul_kind_of(n.op);
    if (a.type.is_secret() && b.type.is_secret()) {
      guard_scale(a.type.scale, b.type.scale);
      Instr i = base(Opcode::MulMPC, a);
      i.mul_kind = kind;
      i.type = secret(a.type.scale * b.type.scale);
      i.shape = n.meta.shape;
      i.in_shapes = {a.shape, b.shape};
      const Val prod = emit_both(std::move(i), {a.reg, b.reg});
      return trunc(prod, std::min(a.type.scale, b.type.scale));
    }
    const bool sec_left = a.type.is_secret();
    const Val& sec = sec_left ? a : b;
    const Val& pub = sec_left ? b : a;
    const std::int64_t ps = is_int(pub) ? 1 : sd();
    guard_scale(sec.type.scale, ps);
    const auto enc = encode_public(pub, ps, {0, 1});
    Instr i = base(Opcode::MulPublic, sec);
    i.mul_kind = kind;
    i.pub_lhs = !sec_left;
    i.type = secret(sec.type.scale * ps);
    i.shape = n.meta.shape;
    i.in_shapes = sec_left ? std::vector<Shape>{sec.shape, pub.shape} : std::vector<Shape>{pub.shape, sec.shape};
    const Val prod = emit_both(std::move(i), {sec.reg, enc});
    return trunc(prod, std::min(sec.type.scale, ps));
  }

  Val reduce(const Node& n) {
    const Val& x = arg(0);
    Instr i = base(Opcode::ReduceSum, x);
    i.kind = n.op;
    i.attrs = n.attrs;
    i.shape = n.meta.shape;
    i.in_shapes = {x.shape};
    const Val sum = emit_both(std::move(i), {x.reg});
    if (n.op == OpKind::Sum) return sum;
    // mean = sum * (1/count) as a secret x public-float product
    const std::size_t count = numel(x.shape) / numel(n.meta.shape);
    Val c{{Label::Pub, DType::f64(), 1}, {-1, -1}, {1}, false};
    Instr ci = base(Opcode::ConstPublic, c);
    ci.kind = OpKind::Const;
    ci.attrs.value = {1.0 / static_cast<double>(count)};
    c = emit_both(std::move(ci), {});
    guard_scale(sum.type.scale, sd());
    const auto enc = encode_public(c, sd(), {0, 1});
    Instr m = base(Opcode::MulPublic, sum);
    m.mul_kind = MulKind::Elementwise;
    m.type = secret(sum.type.scale * sd());
    m.in_shapes = {sum.shape, c.shape};
    const Val prod = emit_both(std::move(m), {sum.reg, enc});
    return trunc(prod, std::min(sum.type.scale, sd()));
  }

  Val shape_op(const Node& n) {
    std::vector<Val> xs;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) xs.push_back(arg(k));
    std::int64_t s = 1;
    for (const auto& v : xs)
      if (v.type.is_secret()) s = std::max(s, v.type.scale);
    if (n.op == OpKind::Stack) {
      for (auto& v : xs) {
        if (v.type.is_secret()) {
          v = rescale(v, s);
          continue;
        }
        // Stacking mixes in a public operand: party 0 takes its encoding, party 1 zeros.
        const auto enc = encode_public(v, s, {0, 1});
        Instr i = base(Opcode::PublicToShare, v);
        i.type = secret(s);
        i.scale_to = s;
        v = emit_both(std::move(i), {enc});
      }
    }
    Instr i = base(Opcode::ShapeOp, xs.front());
    i.kind = n.op;
    i.attrs = n.attrs;
    i.shape = n.meta.shape;
    i.type = secret(s);
    std::vector<std::array<int, 2>> ins;
    for (const auto& v : xs) {
      ins.push_back(v.reg);
      i.in_shapes.push_back(v.shape);
    }
    return emit_both(std::move(i), ins);
  }

  void lower_node(const Node& n) {
    if (!n.owner) fail("node has no owner annotation");
    Val v;
    if (n.op == OpKind::Input) {
      if (n.owner->is_public()) {
        v = public_value(n, Opcode::LoadPublic);
      } else if (auto o = n.owner->sole_owner()) {
        v = {secret(sd()), {-1, -1}, n.meta.shape, false};
        Instr send = base(Opcode::ShareSend, v);
        send.name = n.attrs.name;
        send.party = *o;
        send.scale_to = sd();
        v.reg[static_cast<std::size_t>(*o)] = emit(*o, send);
        Instr recv = base(Opcode::ShareRecv, v);
        recv.party = *o;
        recv.scale_to = sd();
        v.reg[static_cast<std::size_t>(1 - *o)] = emit(1 - *o, recv);
      } else {
        fail("input '" + n.attrs.name + "' must be owned by exactly one party or be public");
      }
    } else if (n.op == OpKind::Const) {
      v = public_value(n, Opcode::ConstPublic);
    } else if (is_value_free(n.op)) {
      v = public_value(n, Opcode::ConstPublic);
    } else if (n.op == OpKind::Reveal) {
      const Val& x = arg(0);
      if (!x.type.is_secret()) {
        v = public_value(n, Opcode::PublicEval);
      } else {
        v = reveal(x);
      }
    } else if (is_mpc_specific(n.op)) {
      fail(std::string("operator ") + op_name(n.op) + " is produced by lowering, not accepted by it");
    } else {
      bool any_secret = false;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) any_secret = any_secret || arg(k).type.is_secret();
      if (!any_secret) {
        v = public_value(n, Opcode::PublicEval);
      } else {
        switch (n.op) {
          case OpKind::Add: v = add_like(n, false); break;
          case OpKind::Sub: v = add_like(n, true); break;
          case OpKind::Mul:
          case OpKind::MatMul:
          case OpKind::Conv2d: v = mul_like(n); break;
          case OpKind::Sum:
          case OpKind::Mean:
          case OpKind::AvgPool: v = reduce(n); break;
          case OpKind::Ltz: {
            const Val& x = arg(0);
            Instr i = base(Opcode::LtzMPC, x);
            i.type = secret(1);
            i.window = cfg_.window_for(n.site);
            i.in_shapes = {x.shape};
            v = emit_both(std::move(i), {x.reg});
            break;
          }
          case OpKind::Max:
          case OpKind::MaxPool: {
            const Val& x = arg(0);
            Instr i = base(Opcode::MaxKernel, x);
            i.kind = n.op;
            i.attrs = n.attrs;
            i.shape = n.meta.shape;
            i.window = cfg_.window_for(n.site);
            i.in_shapes = {x.shape};
            v = emit_both(std::move(i), {x.reg});
            break;
          }
          default:
            if (is_shape_only(n.op)) {
              v = shape_op(n);
              break;
            }
            fail(std::string("unsupported operator ") + op_name(n.op) + " on secret data reached lowering");
        }
      }
    }
    vals_[n.id] = v;
    out_.node_regs[n.id] = v.reg;
    out_.node_types[n.id] = v.type;
  }

  const Graph& g_;
  const LowerConfig& cfg_;
  Ring ring_;
  const Node* cur_ = nullptr;
  std::map<int, Val> vals_;
  Lowered out_;
};

}  // namespace detail

inline Lowered lower_both(const Graph& g, const LowerConfig& cfg = {}) {
  require_valid(g, GraphStage::PostApprox, Stage::Backend);
  if (!fully_owned(g)) throw Error(Stage::Backend, "graph must be owner-annotated before lowering");
  return detail::Lowerer(g, cfg).run();
}

inline PartyProgram lower(const Graph& g, int party, const LowerConfig& cfg = {}) {
  if (party != 0 && party != 1) throw Error(Stage::Backend, "party must be 0 or 1");
  return lower_both(g, cfg).programs[static_cast<std::size_t>(party)];
}

}  // namespace mpcc
