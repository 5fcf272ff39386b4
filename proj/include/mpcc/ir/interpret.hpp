#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mpcc/core/error.hpp"
#include "mpcc/ir/graph.hpp"
#include "mpcc/ir/validate.hpp"

namespace mpcc {

using TensorMap = std::map<std::string, DTensor>;

// Called after every evaluated node with its operands and result.
using NodeHook = std::function<void(const Node&, const std::vector<const DTensor*>&, const DTensor&)>;

namespace detail {

template <class F>
DTensor binary(const DTensor& a, const DTensor& b, F f) {
  const Shape out = elementwise_shape(a.shape, b.shape);
  DTensor r(out);
  const bool a1 = a.size() == 1, b1 = b.size() == 1;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(a[a1 ? 0 : i], b[b1 ? 0 : i]);
  return r;
}

template <class F>
DTensor unary(const DTensor& a, F f) {
  DTensor r(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = f(a[i]);
  return r;
}

inline DTensor matmul(const DTensor& a, const DTensor& b) {
  const Shape out = matmul_shape(a.shape, b.shape);
  const auto m = static_cast<std::size_t>(a.shape[0]), k = static_cast<std::size_t>(a.shape[1]),
             n = static_cast<std::size_t>(b.shape[1]);
  DTensor r(out);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      r[i * n + j] = acc;
    }
  return r;
}

inline DTensor conv2d(const DTensor& in, const DTensor& w) {
  const Shape out = conv2d_shape(in.shape, w.shape);
  const std::size_t off = in.shape.size() - 3;
  const std::size_t batch = off ? static_cast<std::size_t>(in.shape[0]) : 1;
  const auto C = static_cast<std::size_t>(in.shape[off]), H = static_cast<std::size_t>(in.shape[off + 1]),
             W = static_cast<std::size_t>(in.shape[off + 2]);
  const auto O = static_cast<std::size_t>(w.shape[0]), KH = static_cast<std::size_t>(w.shape[2]),
             KW = static_cast<std::size_t>(w.shape[3]);
  const auto OH = H - KH + 1, OW = W - KW + 1;
  DTensor r(out);
  for (std::size_t nb = 0; nb < batch; ++nb)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t y = 0; y < OH; ++y)
        for (std::size_t x = 0; x < OW; ++x) {
          double acc = 0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < KH; ++ky)
              for (std::size_t kx = 0; kx < KW; ++kx)
                acc += in[((nb * C + c) * H + y + ky) * W + x + kx] * w[((o * C + c) * KH + ky) * KW + kx];
          r[((nb * O + o) * OH + y) * OW + x] = acc;
        }
  return r;
}

template <class F>
DTensor reduce_groups(const Shape& out_shape, const DTensor& in, const std::vector<std::vector<std::size_t>>& groups,
                      F f) {
  DTensor r(out_shape);
  std::vector<double> vals;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    vals.clear();
    for (auto i : groups[g]) vals.push_back(in[i]);
    r[g] = f(vals);
  }
  return r;
}

inline double sum_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

inline double max_of(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  return m;
}

inline DTensor softmax(const DTensor& x, int axis) {
  DTensor r(x.shape);
  for (const auto& g : axis_groups(x.shape, axis)) {
    double m = -std::numeric_limits<double>::infinity();
    for (auto i : g) m = std::max(m, x[i]);
    double s = 0;
    for (auto i : g) s += std::exp(x[i] - m);
    for (auto i : g) r[i] = std::exp(x[i] - m) / s;
  }
  return r;
}

inline DTensor layernorm(const DTensor& x, int axis, double eps, const DTensor* gamma, const DTensor* beta) {
  DTensor r(x.shape);
  for (const auto& g : axis_groups(x.shape, axis)) {
    double mean = 0;
    for (auto i : g) mean += x[i];
    mean /= static_cast<double>(g.size());
    double var = 0;
    for (auto i : g) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(g.size());
    const double inv = 1.0 / std::sqrt(var + eps);
    for (auto i : g) r[i] = (x[i] - mean) * inv;
  }
  if (gamma) {
    const auto src = expand_plan(gamma->shape, x.shape);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= (*gamma)[src[i]];
  }
  if (beta) {
    const auto src = expand_plan(beta->shape, x.shape);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += (*beta)[src[i]];
  }
  return r;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }

}  // namespace detail

// Exact double-precision semantics of a single node. Shared with the MPC
// runtime, which evaluates public-only nodes in plaintext.
inline DTensor eval_node(const Node& n, const std::vector<const DTensor*>& in) {
  using namespace detail;
  auto arg = [&](std::size_t i) -> const DTensor& { return *in.at(i); };
  switch (n.op) {
    case OpKind::Input:
      throw Error(Stage::GraphIR, "input nodes are bound, not evaluated", n.site);
    case OpKind::Const:
      return DTensor(n.meta.shape, n.attrs.value);
    case OpKind::Add: return binary(arg(0), arg(1), [](double a, double b) { return a + b; });
    case OpKind::Sub: return binary(arg(0), arg(1), [](double a, double b) { return a - b; });
    case OpKind::Mul: return binary(arg(0), arg(1), [](double a, double b) { return a * b; });
    case OpKind::Sum:
      return reduce_groups(n.meta.shape, arg(0), axis_groups(arg(0).shape, n.attrs.axis), sum_of);
    case OpKind::Mean:
      return reduce_groups(n.meta.shape, arg(0), axis_groups(arg(0).shape, n.attrs.axis),
                           [](const std::vector<double>& v) { return sum_of(v) / static_cast<double>(v.size()); });
    case OpKind::AvgPool:
      return reduce_groups(n.meta.shape, arg(0), pool_groups(arg(0).shape, n.attrs.window),
                           [](const std::vector<double>& v) { return sum_of(v) / static_cast<double>(v.size()); });
    case OpKind::Max:
      return reduce_groups(n.meta.shape, arg(0), axis_groups(arg(0).shape, n.attrs.axis), max_of);
    case OpKind::MaxPool:
      return reduce_groups(n.meta.shape, arg(0), pool_groups(arg(0).shape, n.attrs.window), max_of);
    case OpKind::MatMul: return matmul(arg(0), arg(1));
    case OpKind::Conv2d: return conv2d(arg(0), arg(1));
    case OpKind::Linear: {
      DTensor r = matmul(arg(0), arg(1));
      if (in.size() == 3) {
        const auto src = expand_plan(arg(2).shape, r.shape);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += arg(2)[src[i]];
      }
      return r;
    }
    case OpKind::Ltz: return unary(arg(0), [](double x) { return x < 0 ? 1.0 : 0.0; });
    case OpKind::Cmp: {
      const CmpKind c = n.attrs.cmp;
      return binary(arg(0), arg(1), [c](double a, double b) {
        switch (c) {
          case CmpKind::Ge: return a >= b ? 1.0 : 0.0;
          case CmpKind::Gt: return a > b ? 1.0 : 0.0;
          case CmpKind::Le: return a <= b ? 1.0 : 0.0;
          case CmpKind::Lt: return a < b ? 1.0 : 0.0;
        }
        return 0.0;
      });
    }
    case OpKind::Exp: return unary(arg(0), [](double x) { return std::exp(x); });
    case OpKind::Gelu: return unary(arg(0), gelu);
    case OpKind::Silu: return unary(arg(0), silu);
    case OpKind::Sigmoid: return unary(arg(0), sigmoid);
    case OpKind::Relu: return unary(arg(0), [](double x) { return x > 0 ? x : 0.0; });
    case OpKind::Reciprocal: return unary(arg(0), [](double x) { return 1.0 / x; });
    case OpKind::Rsqrt: return unary(arg(0), [](double x) { return 1.0 / std::sqrt(x); });
    case OpKind::Softmax: return softmax(arg(0), n.attrs.axis);
    case OpKind::LayerNorm:
      return layernorm(arg(0), n.attrs.axis, n.attrs.eps, in.size() > 1 ? in[1] : nullptr,
                       in.size() > 2 ? in[2] : nullptr);
    case OpKind::Reshape:
    case OpKind::Flatten: return DTensor(n.meta.shape, arg(0).data);
    case OpKind::Transpose:
      return gather(arg(0), n.meta.shape, permute_plan(arg(0).shape, transpose_order(arg(0).shape.size())));
    case OpKind::Permute: return gather(arg(0), n.meta.shape, permute_plan(arg(0).shape, n.attrs.dims));
    case OpKind::Expand: return gather(arg(0), n.meta.shape, expand_plan(arg(0).shape, n.attrs.dims));
    case OpKind::Stack: return stack_tensors<double>(in, n.attrs.axis);
    case OpKind::ZerosLike: return DTensor(arg(0).shape, 0.0);
    case OpKind::FullLike: return DTensor(arg(0).shape, n.attrs.fill);
    case OpKind::Encode: {
      const double f = static_cast<double>(n.attrs.scale_to) / static_cast<double>(n.attrs.scale_from);
      return unary(arg(0), [f](double x) { return std::nearbyint(x * f); });
    }
    case OpKind::Trunc: {
      const auto s = static_cast<double>(n.attrs.scale_from);
      return unary(arg(0), [s](double x) { return std::floor(x / s); });
    }
    case OpKind::Reveal: return arg(0);
    case OpKind::MulMPC:
    case OpKind::LtzMPC:
      break;
  }
  throw Error(Stage::GraphIR,
              std::string("unsupported operator ") + op_name(n.op) + " for plaintext interpretation at node " +
                  std::to_string(n.id),
              n.site);
}

// Evaluates every live node; returns values keyed by node id.
inline std::map<int, DTensor> interpret_values(const Graph& g, const TensorMap& inputs, const NodeHook& hook = {}) {
  const auto live = live_nodes(g);
  std::map<int, DTensor> values;
  std::vector<const DTensor*> args;
  for (int id : topo_order(g)) {
    if (!live.count(id)) continue;
    const Node& n = g.node(id);
    if (n.op == OpKind::Input) {
      auto it = inputs.find(n.attrs.name);
      if (it == inputs.end()) throw Error(Stage::GraphIR, "missing value for input '" + n.attrs.name + "'", n.site);
      if (it->second.shape != n.meta.shape) {
        throw Error(Stage::GraphIR, "shape mismatch for input '" + n.attrs.name + "': expected " +
                                        shape_str(n.meta.shape) + ", got " + shape_str(it->second.shape),
                    n.site);
      }
      values.emplace(id, it->second);
      if (hook) hook(n, {}, it->second);
      continue;
    }
    args.clear();
    for (int in : n.inputs) args.push_back(&values.at(in));
    DTensor out;
    try {
      out = eval_node(n, args);
    } catch (const ShapeError& e) {
      throw Error(Stage::GraphIR, std::string("shape mismatch at node ") + std::to_string(id) + ": " + e.what(), n.site);
    }
    if (hook) hook(n, args, out);
    values.emplace(id, std::move(out));
  }
  return values;
}

inline std::vector<DTensor> interpret(const Graph& g, const TensorMap& inputs, const NodeHook& hook = {}) {
  auto values = interpret_values(g, inputs, hook);
  std::vector<DTensor> outs;
  outs.reserve(g.outputs.size());
  for (int o : g.outputs) outs.push_back(values.at(o));
  return outs;
}

}  // namespace mpcc
