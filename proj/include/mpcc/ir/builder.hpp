#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpcc/ir/graph.hpp"
#include "mpcc/ir/validate.hpp"

namespace mpcc {

// Appends nodes to a graph with inferred metadata. When a site prefix is
// given (rewrites), every emitted node is named "<prefix>.<k>" in emission order.
class GraphBuilder {
 public:
  explicit GraphBuilder(Graph& g, std::string site_prefix = {}) : g_(g), prefix_(std::move(site_prefix)) {}

  int input(const std::string& name, Shape shape, DType dtype = DType::f64()) {
    Attrs a;
    a.name = name;
    const int id = emit(OpKind::Input, {}, std::move(a), TensorMeta{std::move(shape), dtype});
    g_.inputs.push_back({name, id});
    return id;
  }

  int constant(const DTensor& t, DType dtype = DType::f64()) {
    Attrs a;
    a.value = t.data;
    return emit(OpKind::Const, {}, std::move(a), TensorMeta{t.shape, dtype});
  }
  int scalar(double v) { return constant(DTensor({1}, std::vector<double>{v})); }
  int int_scalar(std::int64_t v) { return constant(DTensor({1}, std::vector<double>{static_cast<double>(v)}), DType::i64()); }

  int op(OpKind kind, std::vector<int> inputs, Attrs attrs = {}) {
    return emit(kind, std::move(inputs), std::move(attrs), {});
  }

  int add(int a, int b) { return op(OpKind::Add, {a, b}); }
  int sub(int a, int b) { return op(OpKind::Sub, {a, b}); }
  int mul(int a, int b) { return op(OpKind::Mul, {a, b}); }
  int matmul(int a, int b) { return op(OpKind::MatMul, {a, b}); }
  int ltz(int a) { return op(OpKind::Ltz, {a}); }
  int relu(int a) { return op(OpKind::Relu, {a}); }
  int exp(int a) { return op(OpKind::Exp, {a}); }
  int reveal(int a) { return op(OpKind::Reveal, {a}); }
  int with_axis(OpKind kind, int a, int axis) {
    Attrs at;
    at.axis = axis;
    return op(kind, {a}, std::move(at));
  }
  int expand(int a, Shape to) {
    if (meta(a).shape == to) return a;
    Attrs at;
    at.dims = std::move(to);
    return op(OpKind::Expand, {a}, std::move(at));
  }
  int mul_scalar(int a, double c) { return mul(a, scalar(c)); }
  int add_scalar(int a, double c) { return add(a, scalar(c)); }
  // 1 - b for a 0/1 tensor b, with an integer constant.
  int one_minus(int b) { return sub(int_scalar(1), b); }

  void output(int id) { g_.outputs.push_back(id); }

  const TensorMeta& meta(int id) const { return g_.node(id).meta; }
  Graph& graph() { return g_; }

 private:
  int emit(OpKind kind, std::vector<int> inputs, Attrs attrs, TensorMeta declared) {
    std::vector<TensorMeta> ins;
    ins.reserve(inputs.size());
    for (int in : inputs) ins.push_back(g_.node(in).meta);
    Node n;
    n.id = g_.next_id();
    n.op = kind;
    n.meta = infer_meta(kind, attrs, ins, declared);
    n.inputs = std::move(inputs);
    n.attrs = std::move(attrs);
    if (!prefix_.empty()) n.site = prefix_ + "." + std::to_string(counter_++);
    const int id = n.id;
    g_.nodes.emplace(id, std::move(n));
    return id;
  }

  Graph& g_;
  std::string prefix_;
  int counter_ = 0;
};

}  // namespace mpcc
