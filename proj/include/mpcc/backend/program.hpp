#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/core/ring.hpp"
#include "mpcc/ir/graph.hpp"
#include "mpcc/ir/serialize.hpp"

namespace mpcc {

// Per-party instruction set. Comm instructions move data between parties;
// everything else is local.
enum class Opcode : std::uint8_t {
  LoadPublic,     // public graph input, supplied to both parties
  ConstPublic,    // literal (also value-free ops, folded at lowering)
  PublicEval,     // plaintext op over public operands
  EncodePublic,   // public value -> ring integer at scale_to
  PublicToShare,  // party 0 holds the encoded value, party 1 holds zeros
  ShareSend,      // owner: encode, keep x - r, send r
  ShareRecv,      // non-owner: receive r
  Add,
  Sub,
  AddPublic,   // party 0 only
  SubPublic,   // party 0 only: share - public
  RSubPublic,  // party 0 only: public - share
  Neg,
  Copy,
  Rescale,     // scale_from -> scale_to; exact multiply when growing, trunc when shrinking
  Trunc,       // local arithmetic shift by log2(scale_from)
  MulPublic,   // share x public ring integer, mul-like kind
  MulMPC,      // Beaver product, mul-like kind
  LtzMPC,      // GMW sign bit, window bits
  MaxKernel,   // tree reduction of ltz + mux
  ShapeOp,     // reshape/transpose/flatten/permute/expand/stack on shares
  ReduceSum,   // local sum over axis or pool groups
  RevealSend,  // non-target: send own share
  RevealRecv,  // target: receive, reconstruct, decode
  Output,
};

inline constexpr std::pair<Opcode, const char*> kOpcodeNames[] = {
    {Opcode::LoadPublic, "load_public"},   {Opcode::ConstPublic, "const_public"},
    {Opcode::PublicEval, "public_eval"},   {Opcode::EncodePublic, "encode_public"},
    {Opcode::PublicToShare, "public_to_share"}, {Opcode::ShareSend, "share_send"},
    {Opcode::ShareRecv, "share_recv"},     {Opcode::Add, "add"},
    {Opcode::Sub, "sub"},                  {Opcode::AddPublic, "add_public"},
    {Opcode::SubPublic, "sub_public"},     {Opcode::RSubPublic, "rsub_public"},
    {Opcode::Neg, "neg"},                  {Opcode::Copy, "copy"},
    {Opcode::Rescale, "rescale"},          {Opcode::Trunc, "trunc"},
    {Opcode::MulPublic, "mul_public"},     {Opcode::MulMPC, "mul_mpc"},
    {Opcode::LtzMPC, "ltz_mpc"},           {Opcode::MaxKernel, "max_kernel"},
    {Opcode::ShapeOp, "shape_op"},         {Opcode::ReduceSum, "reduce_sum"},
    {Opcode::RevealSend, "reveal_send"},   {Opcode::RevealRecv, "reveal_recv"},
    {Opcode::Output, "output"},
};

inline const char* opcode_name(Opcode op) {
  for (const auto& [o, n] : kOpcodeNames)
    if (o == op) return n;
  return "?";
}

inline std::optional<Opcode> parse_opcode(std::string_view s) {
  for (const auto& [o, n] : kOpcodeNames)
    if (s == n) return o;
  return std::nullopt;
}

inline bool is_comm(Opcode op) {
  switch (op) {
    case Opcode::ShareSend:
    case Opcode::ShareRecv:
    case Opcode::MulMPC:
    case Opcode::LtzMPC:
    case Opcode::MaxKernel:
    case Opcode::RevealSend:
    case Opcode::RevealRecv: return true;
    default: return false;
  }
}

// Opcode pairs that meet at one communication point.
inline Opcode comm_class(Opcode op) {
  if (op == Opcode::ShareRecv) return Opcode::ShareSend;
  if (op == Opcode::RevealRecv) return Opcode::RevealSend;
  return op;
}

struct Instr {
  Opcode op = Opcode::Copy;
  int node = -1;  // graph node this instruction helps realize
  std::string site;
  std::vector<int> in;  // registers
  int out = -1;
  BackType type;  // of `out`
  Shape shape;    // of `out`
  std::vector<Shape> in_shapes;

  OpKind kind = OpKind::Add;  // ShapeOp / ReduceSum / PublicEval / MaxKernel source op
  Attrs attrs;                // attrs of the source node (PublicEval, ShapeOp, ReduceSum, MaxKernel, ConstPublic)
  MulKind mul_kind = MulKind::Elementwise;
  bool pub_lhs = false;  // MulPublic: the public operand is the left factor
  std::int64_t scale_from = 1;
  std::int64_t scale_to = 1;
  int window = 64;      // LtzMPC / MaxKernel comparison width
  int party = -1;       // ShareSend/Recv owner, RevealSend/Recv target
  std::string name;     // LoadPublic / ShareSend input name
  int output_index = -1;

  bool operator==(const Instr&) const = default;
};

struct PartyProgram {
  int party = 0;
  int ring_width = 64;
  std::int64_t scale = 65536;
  std::vector<Instr> instrs;
  int registers = 0;
  std::size_t outputs = 0;
  bool operator==(const PartyProgram&) const = default;
};

using ProgramPair = std::array<PartyProgram, 2>;

inline nlohmann::json instr_to_json(const Instr& i) {
  nlohmann::json j = {{"op", opcode_name(i.op)}, {"node", i.node},      {"site", i.site},
                      {"in", i.in},               {"out", i.out},       {"type", back_type_to_json(i.type)},
                      {"shape", i.shape},         {"in_shapes", i.in_shapes}};
  switch (i.op) {
    case Opcode::ShapeOp:
    case Opcode::ReduceSum:
    case Opcode::PublicEval:
    case Opcode::MaxKernel:
    case Opcode::ConstPublic:
      j["kind"] = op_name(i.kind);
      j["attrs"] = detail::attrs_to_json(i.kind, i.attrs);
      break;
    default: break;
  }
  if (i.op == Opcode::MulPublic || i.op == Opcode::MulMPC) j["mul_kind"] = mul_kind_name(i.mul_kind);
  if (i.op == Opcode::MulPublic) j["pub_lhs"] = i.pub_lhs;
  if (i.op == Opcode::Rescale || i.op == Opcode::Trunc || i.op == Opcode::EncodePublic || i.op == Opcode::PublicToShare ||
      i.op == Opcode::ShareSend || i.op == Opcode::ShareRecv) {
    j["scale_from"] = i.scale_from;
    j["scale_to"] = i.scale_to;
  }
  if (i.op == Opcode::LtzMPC || i.op == Opcode::MaxKernel) j["window"] = i.window;
  if (i.party >= 0) j["party"] = i.party;
  if (!i.name.empty()) j["name"] = i.name;
  if (i.output_index >= 0) j["output_index"] = i.output_index;
  return j;
}

inline nlohmann::json program_to_json(const PartyProgram& p) {
  nlohmann::json instrs = nlohmann::json::array();
  for (const auto& i : p.instrs) instrs.push_back(instr_to_json(i));
  return {{"party", p.party},         {"ring_width", p.ring_width}, {"scale", p.scale},
          {"registers", p.registers}, {"outputs", p.outputs},       {"instrs", instrs}};
}

}  // namespace mpcc
