#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mpcc/core/tensor.hpp"

namespace mpcc {

// ---------------------------------------------------------------------------
// Base types

struct DType {
  enum class Kind : std::uint8_t { Int, Float, Bool };
  Kind kind = Kind::Float;
  int width = 64;

  static DType f64() { return {Kind::Float, 64}; }
  static DType f32() { return {Kind::Float, 32}; }
  static DType i64() { return {Kind::Int, 64}; }
  static DType boolean() { return {Kind::Bool, 1}; }

  bool is_float() const { return kind == Kind::Float; }
  bool valid() const {
    switch (kind) {
      case Kind::Int: return width == 8 || width == 16 || width == 32 || width == 64;
      case Kind::Float: return width == 32 || width == 64;
      case Kind::Bool: return width == 1;
    }
    return false;
  }
  bool operator==(const DType&) const = default;
};

inline std::string dtype_name(DType d) {
  switch (d.kind) {
    case DType::Kind::Int: return "i" + std::to_string(d.width);
    case DType::Kind::Float: return "f" + std::to_string(d.width);
    case DType::Kind::Bool: return "bool";
  }
  return "?";
}

inline std::optional<DType> parse_dtype(std::string_view s) {
  if (s == "bool") return DType::boolean();
  if (s.size() < 2 || (s[0] != 'i' && s[0] != 'f')) return std::nullopt;
  int w = 0;
  for (char c : s.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    w = w * 10 + (c - '0');
  }
  DType d{s[0] == 'i' ? DType::Kind::Int : DType::Kind::Float, w};
  if (!d.valid()) return std::nullopt;
  return d;
}

struct TensorMeta {
  Shape shape;
  DType dtype = DType::f64();
  bool operator==(const TensorMeta&) const = default;
};

// ---------------------------------------------------------------------------
// Ownership: which of the two parties may recover a tensor. Both parties
// means public; the empty set is a joint secret owned by neither.

class OwnerSet {
 public:
  static constexpr int kParties = 2;

  constexpr OwnerSet() = default;
  static constexpr OwnerSet none() { return OwnerSet(0); }
  static constexpr OwnerSet all() { return OwnerSet((1u << kParties) - 1); }
  static OwnerSet single(int party) {
    if (party < 0 || party >= kParties) throw std::invalid_argument("party id out of range");
    return OwnerSet(1u << party);
  }
  static OwnerSet from_list(const std::vector<int>& parties) {
    OwnerSet o;
    for (int p : parties) o = o | single(p);
    return o;
  }

  bool contains(int party) const { return (bits_ >> party) & 1u; }
  bool is_public() const { return bits_ == all().bits_; }
  bool empty() const { return bits_ == 0; }
  // The single owner, when exactly one party owns the tensor.
  std::optional<int> sole_owner() const {
    if (bits_ == 1u) return 0;
    if (bits_ == 2u) return 1;
    return std::nullopt;
  }
  std::vector<int> parties() const {
    std::vector<int> out;
    for (int p = 0; p < kParties; ++p)
      if (contains(p)) out.push_back(p);
    return out;
  }
  unsigned bits() const { return bits_; }

  OwnerSet operator&(OwnerSet o) const { return OwnerSet(bits_ & o.bits_); }
  OwnerSet operator|(OwnerSet o) const { return OwnerSet(bits_ | o.bits_); }
  bool operator==(const OwnerSet&) const = default;

 private:
  constexpr explicit OwnerSet(unsigned bits) : bits_(bits) {}
  unsigned bits_ = 0;
};

// ---------------------------------------------------------------------------
// Backend type <label, base type, scale>.

enum class Label : std::uint8_t { Pub, Secret };

struct BackType {
  Label label = Label::Pub;
  DType dtype = DType::f64();
  std::int64_t scale = 1;
  bool is_secret() const { return label == Label::Secret; }
  bool operator==(const BackType&) const = default;
};

// ---------------------------------------------------------------------------
// Operators

enum class OpKind : std::uint8_t {
  Input, Const,
  Add, Sub, Sum, Mean, AvgPool,
  Mul, MatMul, Conv2d, Linear,
  Ltz, Cmp,
  Exp, Gelu, Silu, Sigmoid, Softmax, LayerNorm, Relu, Reciprocal, Rsqrt,
  Max, MaxPool,
  Reshape, Transpose, Flatten, Permute, Stack, Expand,
  ZerosLike, FullLike,
  Trunc, Encode, MulMPC, LtzMPC,
  Reveal,
};

enum class CmpKind : std::uint8_t { Ge, Gt, Le, Lt };

struct OpInfo {
  OpKind kind;
  const char* name;
};

inline constexpr OpInfo kOpTable[] = {
    {OpKind::Input, "input"},         {OpKind::Const, "const"},       {OpKind::Add, "add"},
    {OpKind::Sub, "sub"},             {OpKind::Sum, "sum"},           {OpKind::Mean, "mean"},
    {OpKind::AvgPool, "avgpool"},     {OpKind::Mul, "mul"},           {OpKind::MatMul, "matmul"},
    {OpKind::Conv2d, "conv2d"},       {OpKind::Linear, "linear"},     {OpKind::Ltz, "ltz"},
    {OpKind::Cmp, "cmp"},             {OpKind::Exp, "exp"},           {OpKind::Gelu, "gelu"},
    {OpKind::Silu, "silu"},           {OpKind::Sigmoid, "sigmoid"},   {OpKind::Softmax, "softmax"},
    {OpKind::LayerNorm, "layernorm"}, {OpKind::Relu, "relu"},         {OpKind::Reciprocal, "reciprocal"},
    {OpKind::Rsqrt, "rsqrt"},         {OpKind::Max, "max"},           {OpKind::MaxPool, "maxpool"},
    {OpKind::Reshape, "reshape"},     {OpKind::Transpose, "transpose"}, {OpKind::Flatten, "flatten"},
    {OpKind::Permute, "permute"},     {OpKind::Stack, "stack"},       {OpKind::Expand, "expand"},
    {OpKind::ZerosLike, "zeros_like"}, {OpKind::FullLike, "full_like"}, {OpKind::Trunc, "trunc"},
    {OpKind::Encode, "encode"},       {OpKind::MulMPC, "mul_mpc"},    {OpKind::LtzMPC, "ltz_mpc"},
    {OpKind::Reveal, "reveal"},
};

inline const char* op_name(OpKind k) {
  for (const auto& e : kOpTable)
    if (e.kind == k) return e.name;
  return "?";
}

inline std::optional<OpKind> parse_op(std::string_view s) {
  for (const auto& e : kOpTable)
    if (s == e.name) return e.kind;
  return std::nullopt;
}

inline bool is_add_like(OpKind k) {
  return k == OpKind::Add || k == OpKind::Sub || k == OpKind::Sum || k == OpKind::Mean || k == OpKind::AvgPool;
}
inline bool is_mul_like(OpKind k) { return k == OpKind::Mul || k == OpKind::MatMul || k == OpKind::Conv2d; }
inline bool is_shape_only(OpKind k) {
  return k == OpKind::Reshape || k == OpKind::Transpose || k == OpKind::Flatten || k == OpKind::Permute ||
         k == OpKind::Stack || k == OpKind::Expand;
}
inline bool is_value_free(OpKind k) { return k == OpKind::ZerosLike || k == OpKind::FullLike; }
inline bool is_max_like(OpKind k) { return k == OpKind::Max || k == OpKind::MaxPool; }
inline bool is_mpc_specific(OpKind k) {
  return k == OpKind::Trunc || k == OpKind::Encode || k == OpKind::MulMPC || k == OpKind::LtzMPC;
}

// Operators MPC runs natively (plus the structural ones that need no protocol).
inline bool is_supported(OpKind k) {
  return k == OpKind::Input || k == OpKind::Const || is_add_like(k) || is_mul_like(k) || k == OpKind::Ltz ||
         is_max_like(k) || is_shape_only(k) || is_value_free(k) || k == OpKind::Reveal;
}

inline const char* cmp_name(CmpKind c) {
  switch (c) {
    case CmpKind::Ge: return "ge";
    case CmpKind::Gt: return "gt";
    case CmpKind::Le: return "le";
    case CmpKind::Lt: return "lt";
  }
  return "?";
}

inline std::optional<CmpKind> parse_cmp(std::string_view s) {
  if (s == "ge") return CmpKind::Ge;
  if (s == "gt") return CmpKind::Gt;
  if (s == "le") return CmpKind::Le;
  if (s == "lt") return CmpKind::Lt;
  return std::nullopt;
}

inline const char* mul_kind_name(MulKind k) {
  switch (k) {
    case MulKind::Elementwise: return "mul";
    case MulKind::MatMul: return "matmul";
    case MulKind::Conv2d: return "conv2d";
  }
  return "?";
}

inline MulKind mul_kind_of(OpKind k) {
  if (k == OpKind::MatMul) return MulKind::MatMul;
  if (k == OpKind::Conv2d) return MulKind::Conv2d;
  return MulKind::Elementwise;
}

// Op-specific constants. Always public: the threat model protects values, not shapes.
struct Attrs {
  std::string name;                  // input name
  std::vector<double> value;         // const literal, row-major
  int axis = -1;                     // reductions, softmax, layernorm, max, stack
  std::vector<std::int64_t> dims;    // reshape target, permute order, expand target
  std::int64_t window = 0;           // avgpool / maxpool
  double eps = 1e-5;                 // layernorm
  double fill = 0.0;                 // full_like
  CmpKind cmp = CmpKind::Ge;         // cmp
  std::int64_t scale_from = 1;       // encode: old scale; trunc: divisor
  std::int64_t scale_to = 1;         // encode: new scale
  MulKind mul_kind = MulKind::Elementwise;  // mul_mpc
  bool operator==(const Attrs&) const = default;
};

struct Node {
  int id = 0;
  OpKind op = OpKind::Input;
  std::vector<int> inputs;
  Attrs attrs;
  TensorMeta meta;
  std::optional<OwnerSet> owner;
  std::optional<BackType> back_type;
  std::string site;
  bool operator==(const Node&) const = default;
};

struct GraphInput {
  std::string name;
  int id = 0;
  bool operator==(const GraphInput&) const = default;
};

struct Graph {
  std::map<int, Node> nodes;
  std::vector<int> outputs;
  std::vector<GraphInput> inputs;

  const Node& node(int id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw std::out_of_range("no node with id " + std::to_string(id));
    return it->second;
  }
  Node& node(int id) {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw std::out_of_range("no node with id " + std::to_string(id));
    return it->second;
  }
  int next_id() const { return nodes.empty() ? 0 : nodes.rbegin()->first + 1; }
  std::optional<int> input_id(std::string_view name) const {
    for (const auto& in : inputs)
      if (in.name == name) return in.id;
    return std::nullopt;
  }
  bool operator==(const Graph&) const = default;
};

}  // namespace mpcc
