#pragma once

#include <functional>
#include <queue>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpcc/core/error.hpp"
#include "mpcc/ir/graph.hpp"

namespace mpcc {

// Output metadata implied by an operator and its operand metadata. Input and
// Const carry declared metadata, which is returned unchanged after checks.
inline TensorMeta infer_meta(OpKind op, const Attrs& attrs, const std::vector<TensorMeta>& ins,
                             const TensorMeta& declared = {}) {
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (ins.size() < lo || ins.size() > hi) {
      throw ShapeError(std::string(op_name(op)) + " expects " + std::to_string(lo) +
                       (hi != lo ? "-" + std::to_string(hi) : "") + " inputs, got " + std::to_string(ins.size()));
    }
  };
  auto any_float = [&] {
    for (const auto& m : ins)
      if (m.dtype.is_float()) return true;
    return false;
  };
  auto arith_dtype = [&] { return any_float() ? DType::f64() : DType::i64(); };

  switch (op) {
    case OpKind::Input:
      arity(0, 0);
      return declared;
    case OpKind::Const:
      arity(0, 0);
      if (attrs.value.size() != numel(declared.shape)) {
        throw ShapeError("const literal has " + std::to_string(attrs.value.size()) + " values for shape " +
                         shape_str(declared.shape));
      }
      return declared;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
      arity(2, 2);
      return {elementwise_shape(ins[0].shape, ins[1].shape), arith_dtype()};
    case OpKind::Sum:
      arity(1, 1);
      return {reduce_shape(ins[0].shape, attrs.axis), ins[0].dtype};
    case OpKind::Mean:
      arity(1, 1);
      return {reduce_shape(ins[0].shape, attrs.axis), DType::f64()};
    case OpKind::AvgPool:
      arity(1, 1);
      return {pool_shape(ins[0].shape, attrs.window), DType::f64()};
    case OpKind::MaxPool:
      arity(1, 1);
      return {pool_shape(ins[0].shape, attrs.window), ins[0].dtype};
    case OpKind::Max:
      arity(1, 1);
      return {reduce_shape(ins[0].shape, attrs.axis), ins[0].dtype};
    case OpKind::MatMul:
      arity(2, 2);
      return {matmul_shape(ins[0].shape, ins[1].shape), arith_dtype()};
    case OpKind::Conv2d:
      arity(2, 2);
      return {conv2d_shape(ins[0].shape, ins[1].shape), arith_dtype()};
    case OpKind::MulMPC:
      arity(2, 2);
      if (attrs.mul_kind == MulKind::MatMul) return {matmul_shape(ins[0].shape, ins[1].shape), DType::i64()};
      if (attrs.mul_kind == MulKind::Conv2d) return {conv2d_shape(ins[0].shape, ins[1].shape), DType::i64()};
      return {elementwise_shape(ins[0].shape, ins[1].shape), DType::i64()};
    case OpKind::Linear: {
      arity(2, 3);
      Shape out = matmul_shape(ins[0].shape, ins[1].shape);
      if (ins.size() == 3) check_expand(ins[2].shape, out);
      return {out, arith_dtype()};
    }
    case OpKind::Ltz:
    case OpKind::LtzMPC:
      arity(1, 1);
      return {ins[0].shape, DType::i64()};
    case OpKind::Cmp:
      arity(2, 2);
      return {elementwise_shape(ins[0].shape, ins[1].shape), DType::i64()};
    case OpKind::Exp:
    case OpKind::Gelu:
    case OpKind::Silu:
    case OpKind::Sigmoid:
    case OpKind::Reciprocal:
    case OpKind::Rsqrt:
      arity(1, 1);
      return {ins[0].shape, DType::f64()};
    case OpKind::Relu:
      arity(1, 1);
      return ins[0];
    case OpKind::Softmax:
      arity(1, 1);
      normalize_axis(attrs.axis, ins[0].shape.size());
      return {ins[0].shape, DType::f64()};
    case OpKind::LayerNorm:
      arity(1, 3);
      normalize_axis(attrs.axis, ins[0].shape.size());
      for (std::size_t i = 1; i < ins.size(); ++i) check_expand(ins[i].shape, ins[0].shape);
      return {ins[0].shape, DType::f64()};
    case OpKind::Reshape:
      arity(1, 1);
      return {resolve_reshape(ins[0].shape, attrs.dims), ins[0].dtype};
    case OpKind::Transpose:
      arity(1, 1);
      return {permute_shape(ins[0].shape, transpose_order(ins[0].shape.size())), ins[0].dtype};
    case OpKind::Flatten:
      arity(1, 1);
      return {flatten_shape(ins[0].shape), ins[0].dtype};
    case OpKind::Permute:
      arity(1, 1);
      return {permute_shape(ins[0].shape, attrs.dims), ins[0].dtype};
    case OpKind::Stack: {
      if (ins.empty()) throw ShapeError("stack expects at least one input");
      std::vector<Shape> shapes;
      for (const auto& m : ins) shapes.push_back(m.shape);
      return {stack_shape(shapes, attrs.axis), arith_dtype()};
    }
    case OpKind::Expand:
      arity(1, 1);
      check_expand(ins[0].shape, attrs.dims);
      return {attrs.dims, ins[0].dtype};
    case OpKind::ZerosLike:
    case OpKind::FullLike:
      arity(1, 1);
      return ins[0];
    case OpKind::Trunc:
    case OpKind::Encode:
      arity(1, 1);
      return {ins[0].shape, DType::i64()};
    case OpKind::Reveal:
      arity(1, 1);
      return ins[0];
  }
  throw ShapeError("unknown operator");
}

enum class GraphStage { Any, PreApprox, PostApprox, PostLowering };

struct ValidationIssue {
  int node = -1;  // -1 for graph-level issues
  std::string message;
};

inline std::string to_string(const ValidationIssue& v) {
  return v.node >= 0 && v.message.find("node " + std::to_string(v.node)) == std::string::npos
             ? "node " + std::to_string(v.node) + ": " + v.message
             : v.message;
}

// Stage predicates are machine-checkable: a node is allowed at a stage iff this returns true.
inline bool allowed_at_stage(const Node& n, GraphStage stage) {
  switch (stage) {
    case GraphStage::Any: return true;
    case GraphStage::PreApprox: return !is_mpc_specific(n.op);
    case GraphStage::PostApprox:
      if (is_mpc_specific(n.op)) return false;
      return is_supported(n.op) || (n.owner && n.owner->is_public());
    case GraphStage::PostLowering:
      return is_mpc_specific(n.op) || is_supported(n.op) || (n.owner && n.owner->is_public());
  }
  return false;
}

// Deterministic Kahn ordering; ties broken by ascending id.
inline std::vector<int> topo_order(const Graph& g) {
  std::map<int, int> indegree;
  std::map<int, std::vector<int>> users;
  for (const auto& [id, n] : g.nodes) {
    indegree.try_emplace(id, 0);
    for (int in : n.inputs) {
      if (!g.nodes.count(in)) {
        throw Error(Stage::GraphIR, "dangling reference at node " + std::to_string(id), n.site);
      }
      ++indegree[id];
      users[in].push_back(id);
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);
  std::vector<int> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    const int id = ready.top();
    ready.pop();
    order.push_back(id);
    for (int u : users[id])
      if (--indegree[u] == 0) ready.push(u);
  }
  if (order.size() != g.nodes.size()) {
    for (const auto& [id, d] : indegree) {
      if (d > 0) throw Error(Stage::GraphIR, "cycle detected through node " + std::to_string(id));
    }
  }
  return order;
}

// Nodes reachable backwards from the graph outputs.
inline std::set<int> live_nodes(const Graph& g) {
  std::set<int> live;
  std::vector<int> stack(g.outputs.begin(), g.outputs.end());
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (!live.insert(id).second) continue;
    auto it = g.nodes.find(id);
    if (it == g.nodes.end()) continue;
    for (int in : it->second.inputs) stack.push_back(in);
  }
  return live;
}

inline std::vector<ValidationIssue> validate(const Graph& g, GraphStage stage = GraphStage::Any) {
  std::vector<ValidationIssue> issues;
  std::set<std::string> sites;
  bool structural_ok = true;
  for (const auto& [id, n] : g.nodes) {
    if (n.id != id) issues.push_back({id, "node id field " + std::to_string(n.id) + " disagrees with key"});
    if (!n.meta.dtype.valid()) issues.push_back({id, "invalid dtype " + dtype_name(n.meta.dtype)});
    for (auto d : n.meta.shape) {
      if (d < 1) {
        issues.push_back({id, "non-positive dimension in shape " + shape_str(n.meta.shape)});
        break;
      }
    }
    for (int in : n.inputs) {
      if (!g.nodes.count(in)) {
        issues.push_back({id, "dangling reference at node " + std::to_string(id) + " (input " + std::to_string(in) + ")"});
        structural_ok = false;
      } else if (in >= id) {
        issues.push_back({id, "input " + std::to_string(in) + " does not precede node " + std::to_string(id)});
        structural_ok = false;
      }
    }
    if (!n.site.empty() && !sites.insert(n.site).second) issues.push_back({id, "duplicate site_id " + n.site});
    if (!allowed_at_stage(n, stage)) {
      issues.push_back({id, std::string("operator ") + op_name(n.op) + " not allowed at this stage"});
    }
  }
  if (structural_ok) {
    for (const auto& [id, n] : g.nodes) {
      std::vector<TensorMeta> ins;
      for (int in : n.inputs) ins.push_back(g.node(in).meta);
      try {
        const TensorMeta m = infer_meta(n.op, n.attrs, ins, n.meta);
        if (m.shape != n.meta.shape) {
          issues.push_back({id, "shape mismatch: declared " + shape_str(n.meta.shape) + " but operator yields " +
                                    shape_str(m.shape)});
        }
      } catch (const ShapeError& e) {
        issues.push_back({id, e.what()});
      }
    }
    try {
      topo_order(g);
    } catch (const Error& e) {
      issues.push_back({-1, e.detail()});
    }
  }
  for (int out : g.outputs)
    if (!g.nodes.count(out)) issues.push_back({-1, "output " + std::to_string(out) + " does not exist"});
  for (const auto& in : g.inputs) {
    auto it = g.nodes.find(in.id);
    if (it == g.nodes.end() || it->second.op != OpKind::Input || it->second.attrs.name != in.name) {
      issues.push_back({-1, "graph input '" + in.name + "' does not name an input node"});
    }
  }
  for (const auto& [id, n] : g.nodes) {
    if (n.op == OpKind::Input && !g.input_id(n.attrs.name)) {
      issues.push_back({id, "input node '" + n.attrs.name + "' is not listed in graph inputs"});
    }
  }
  return issues;
}

inline void require_valid(const Graph& g, GraphStage stage, Stage who) {
  const auto issues = validate(g, stage);
  if (issues.empty()) return;
  std::string msg = "graph failed validation:";
  for (const auto& i : issues) msg += "\n  " + to_string(i);
  const std::string site = issues.front().node >= 0 && g.nodes.count(issues.front().node)
                               ? g.node(issues.front().node).site
                               : std::string{};
  throw Error(who, msg, site);
}

}  // namespace mpcc
