#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mpcc/approx/pass.hpp"
#include "mpcc/approx/poly_table.hpp"

namespace mpcc {

inline constexpr int kExpMaxT = 8;
inline constexpr int kNewtonMaxIters = 12;

// y = 1 + x/2^t; optionally zeroed below x < -2^t; then t squarings.
inline int emit_exp(GraphBuilder& b, int x, int t, bool clamp) {
  int y = b.add_scalar(b.mul_scalar(x, std::ldexp(1.0, -t)), 1.0);
  if (clamp) {
    const int c = b.ltz(b.add_scalar(x, std::ldexp(1.0, t)));
    y = b.mul(y, b.one_minus(c));
  }
  for (int i = 0; i < t; ++i) y = b.mul(y, y);
  return y;
}

// Piecewise polynomial in |x| with ltz region masks; see polyfit.hpp for the split.
inline int emit_poly(GraphBuilder& b, int x, OpKind op, int degree) {
  if (degree == 0) return op == OpKind::Sigmoid ? b.one_minus(b.ltz(x)) : b.relu(x);
  const auto entry = find_poly(op, degree);
  if (!entry) throw Error(Stage::Approx, std::string("no fitted polynomial for ") + op_name(op) + " degree " + std::to_string(degree));
  const auto& a = entry->coefficients;
  const int c = b.ltz(x);
  const int sgn = b.sub(b.int_scalar(1), b.mul(c, b.int_scalar(2)));
  const int u = b.mul(x, sgn);
  const int inside = b.ltz(b.add_scalar(u, -entry->bound));
  int p = b.add_scalar(b.mul_scalar(u, a[static_cast<std::size_t>(degree)]), a[static_cast<std::size_t>(degree - 1)]);
  for (int k = degree - 2; k >= 0; --k) p = b.add_scalar(b.mul(p, u), a[static_cast<std::size_t>(k)]);
  if (op == OpKind::Sigmoid) {
    const int odd = b.add_scalar(b.mul(inside, b.add_scalar(p, -0.5)), 0.5);
    return b.add_scalar(b.mul(sgn, odd), 0.5);
  }
  const int half_u = b.mul_scalar(u, 0.5);
  return b.add(b.add(b.mul_scalar(x, 0.5), half_u), b.mul(inside, b.sub(p, half_u)));
}

inline int emit_reciprocal(GraphBuilder& b, int x, int iters) {
  const int e = b.exp(b.sub(b.scalar(0.5), x));
  int y = b.add_scalar(b.mul_scalar(e, 3.0), 0.003);
  for (int i = 0; i < iters; ++i) y = b.mul(y, b.sub(b.scalar(2.0), b.mul(x, y)));
  return y;
}

inline int emit_rsqrt(GraphBuilder& b, int x, int iters, int exp_t) {
  const int inner = b.add_scalar(b.mul_scalar(x, -0.5), -0.2);
  const int e = emit_exp(b, inner, exp_t, false);
  int y = b.sub(b.add_scalar(b.mul_scalar(e, 2.2), 0.2), b.mul_scalar(x, 1.0 / 1024));
  for (int i = 0; i < iters; ++i) {
    const int xy2 = b.mul(x, b.mul(y, y));
    y = b.mul_scalar(b.mul(y, b.sub(b.scalar(3.0), xy2)), 0.5);
  }
  return y;
}

inline std::vector<PassDescriptor> builtin_passes() {
  std::vector<PassDescriptor> ps;

  ps.push_back({"relu", OpKind::Relu, {}, {}, [](GraphBuilder& b, const Node&, const std::vector<int>& in, const KnobValues&) {
                  return b.mul(in[0], b.one_minus(b.ltz(in[0])));
                }, {}});

  ps.push_back({"cmp", OpKind::Cmp, {}, {}, [](GraphBuilder& b, const Node& n, const std::vector<int>& in, const KnobValues&) {
                  const int x = b.expand(in[0], n.meta.shape), y = b.expand(in[1], n.meta.shape);
                  switch (n.attrs.cmp) {
                    case CmpKind::Ge: return b.one_minus(b.ltz(b.sub(x, y)));
                    case CmpKind::Gt: return b.ltz(b.sub(y, x));
                    case CmpKind::Le: return b.one_minus(b.ltz(b.sub(y, x)));
                    case CmpKind::Lt: return b.ltz(b.sub(x, y));
                  }
                  return -1;
                }, {}});

  ps.push_back({"linear", OpKind::Linear, {}, {}, [](GraphBuilder& b, const Node& n, const std::vector<int>& in, const KnobValues&) {
                  const int mm = b.matmul(in[0], in[1]);
                  return in.size() == 3 ? b.add(mm, b.expand(in[2], n.meta.shape)) : mm;
                }, {}});

  ps.push_back({"exp", OpKind::Exp, {},
                {{"t", 0, kExpMaxT, {}, false}, {"clamp", 0, 1, {}, true}},
                [](GraphBuilder& b, const Node&, const std::vector<int>& in, const KnobValues& k) {
                  return emit_exp(b, in[0], k.at("t"), k.at("clamp") != 0);
                }, {}});

  for (OpKind op : {OpKind::Gelu, OpKind::Silu, OpKind::Sigmoid}) {
    ps.push_back({op_name(op), op, {}, {{"degree", 0, 4, {0, 2, 4}, false}},
                  [op](GraphBuilder& b, const Node&, const std::vector<int>& in, const KnobValues& k) {
                    return emit_poly(b, in[0], op, k.at("degree"));
                  }, {}});
  }

  ps.push_back({"softmax", OpKind::Softmax, {}, {}, [](GraphBuilder& b, const Node& n, const std::vector<int>& in, const KnobValues&) {
                  const int x = in[0];
                  const Shape& shape = n.meta.shape;
                  const int m = b.expand(b.with_axis(OpKind::Max, x, n.attrs.axis), shape);
                  const int e = b.exp(b.sub(x, m));
                  const int r = b.op(OpKind::Reciprocal, {b.with_axis(OpKind::Sum, e, n.attrs.axis)});
                  return b.mul(e, b.expand(r, shape));
                }, {}});

  ps.push_back({"reciprocal", OpKind::Reciprocal, {}, {{"iters", 1, kNewtonMaxIters, {}, false}},
                [](GraphBuilder& b, const Node&, const std::vector<int>& in, const KnobValues& k) {
                  return emit_reciprocal(b, in[0], k.at("iters"));
                }, {}});

  ps.push_back({"rsqrt", OpKind::Rsqrt, {}, {{"iters", 1, kNewtonMaxIters, {}, false}, {"exp_t", 0, kExpMaxT, {}, false}},
                [](GraphBuilder& b, const Node&, const std::vector<int>& in, const KnobValues& k) {
                  return emit_rsqrt(b, in[0], k.at("iters"), k.at("exp_t"));
                }, {}});

  ps.push_back({"layernorm", OpKind::LayerNorm, {}, {}, [](GraphBuilder& b, const Node& n, const std::vector<int>& in, const KnobValues&) {
                  const Shape& shape = n.meta.shape;
                  const int axis = n.attrs.axis;
                  const int xc = b.sub(in[0], b.expand(b.with_axis(OpKind::Mean, in[0], axis), shape));
                  const int var = b.with_axis(OpKind::Mean, b.mul(xc, xc), axis);
                  const int inv = b.op(OpKind::Rsqrt, {b.add_scalar(var, n.attrs.eps)});
                  int y = b.mul(xc, b.expand(inv, shape));
                  if (in.size() > 1) y = b.mul(y, b.expand(in[1], shape));
                  if (in.size() > 2) y = b.add(y, b.expand(in[2], shape));
                  return y;
                }, {}});
  return ps;
}

inline std::vector<std::string> builtin_pass_names() {
  std::vector<std::string> names;
  for (const auto& p : builtin_passes()) names.push_back(p.name);
  return names;
}

}  // namespace mpcc
