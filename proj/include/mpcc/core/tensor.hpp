#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpcc {

using Shape = std::vector<std::int64_t>;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * static_cast<std::size_t>(shape[i]);
  return st;
}

inline int normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  if (axis < -r || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(r));
  }
  return axis < 0 ? axis + r : axis;
}

// Dense row-major tensor. Used with double (plaintext) and u64 (ring) elements.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{}) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape)) {
      throw ShapeError("tensor data size " + std::to_string(data.size()) + " does not match shape " +
                       shape_str(shape));
    }
  }

  std::size_t size() const { return data.size(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Tensor&) const = default;
};

using DTensor = Tensor<double>;

// ---------------------------------------------------------------------------
// Shape rules shared by the interpreter, the lowering, and the runtime.

// Elementwise binary ops accept equal shapes or a single-element operand.
inline Shape elementwise_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (numel(a) == 1 && numel(b) == 1) return a.size() >= b.size() ? a : b;
  if (numel(b) == 1) return a;
  if (numel(a) == 1) return b;
  throw ShapeError("shape mismatch: elementwise " + shape_str(a) + " vs " + shape_str(b));
}

inline Shape matmul_shape(const Shape& a, const Shape& b) {
  if (a.size() != 2 || b.size() != 2) {
    throw ShapeError("matmul expects rank-2 operands, got " + shape_str(a) + " x " + shape_str(b));
  }
  if (a[1] != b[0]) {
    throw ShapeError("shape mismatch: inner dims " + std::to_string(a[1]) + "≠" + std::to_string(b[0]));
  }
  return {a[0], b[1]};
}

// Stride-1, unpadded, single-group convolution. Input [C,H,W] or [N,C,H,W],
// weight [O,C,KH,KW].
inline Shape conv2d_shape(const Shape& in, const Shape& w) {
  if ((in.size() != 3 && in.size() != 4) || w.size() != 4) {
    throw ShapeError("conv2d expects input [C,H,W] or [N,C,H,W] and weight [O,C,KH,KW], got " +
                     shape_str(in) + " and " + shape_str(w));
  }
  const std::size_t off = in.size() - 3;
  if (in[off] != w[1]) {
    throw ShapeError("shape mismatch: conv2d channels " + std::to_string(in[off]) + "≠" +
                     std::to_string(w[1]));
  }
  const auto oh = in[off + 1] - w[2] + 1;
  const auto ow = in[off + 2] - w[3] + 1;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d kernel larger than input");
  Shape out;
  if (off) out.push_back(in[0]);
  out.insert(out.end(), {w[0], oh, ow});
  return out;
}

inline Shape reduce_shape(const Shape& in, int axis) {
  Shape out = in;
  out[static_cast<std::size_t>(normalize_axis(axis, in.size()))] = 1;
  return out;
}

inline Shape pool_shape(const Shape& in, std::int64_t window) {
  if (in.size() < 2) throw ShapeError("pooling expects rank >= 2, got " + shape_str(in));
  if (window < 1) throw ShapeError("pooling window must be positive");
  Shape out = in;
  out[in.size() - 2] = in[in.size() - 2] / window;
  out[in.size() - 1] = in[in.size() - 1] / window;
  if (out[in.size() - 2] < 1 || out[in.size() - 1] < 1) throw ShapeError("pooling window larger than input");
  return out;
}

// Right-aligned broadcast of `from` to `to` (dims must match or be 1).
inline void check_expand(const Shape& from, const Shape& to) {
  if (from.size() > to.size()) throw ShapeError("cannot expand " + shape_str(from) + " to " + shape_str(to));
  const std::size_t off = to.size() - from.size();
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i] != to[off + i] && from[i] != 1) {
      throw ShapeError("cannot expand " + shape_str(from) + " to " + shape_str(to));
    }
  }
}

inline Shape permute_shape(const Shape& in, const std::vector<std::int64_t>& dims) {
  if (dims.size() != in.size()) throw ShapeError("permute order rank mismatch");
  std::vector<bool> seen(in.size(), false);
  Shape out(in.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto d = static_cast<std::size_t>(normalize_axis(static_cast<int>(dims[i]), in.size()));
    if (seen[d]) throw ShapeError("permute order repeats an axis");
    seen[d] = true;
    out[i] = in[d];
  }
  return out;
}

inline std::vector<std::int64_t> transpose_order(std::size_t rank) {
  if (rank < 2) throw ShapeError("transpose expects rank >= 2");
  std::vector<std::int64_t> order(rank);
  std::iota(order.begin(), order.end(), 0);
  std::swap(order[rank - 1], order[rank - 2]);
  return order;
}

inline Shape flatten_shape(const Shape& in) {
  if (in.size() <= 1) return in;
  Shape out{in[0], 1};
  for (std::size_t i = 1; i < in.size(); ++i) out[1] *= in[i];
  return out;
}

inline Shape resolve_reshape(const Shape& in, const Shape& target) {
  Shape out = target;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape allows a single -1");
      infer = static_cast<int>(i);
    } else {
      known *= out[i];
    }
  }
  const auto total = static_cast<std::int64_t>(numel(in));
  if (infer >= 0) {
    if (known == 0 || total % known) throw ShapeError("reshape " + shape_str(in) + " to " + shape_str(target));
    out[static_cast<std::size_t>(infer)] = total / known;
  }
  if (static_cast<std::int64_t>(numel(out)) != total) {
    throw ShapeError("reshape " + shape_str(in) + " to " + shape_str(target) + " changes element count");
  }
  return out;
}

inline Shape stack_shape(const std::vector<Shape>& ins, int axis) {
  if (ins.empty()) throw ShapeError("stack of zero tensors");
  for (const auto& s : ins) {
    if (s != ins.front()) throw ShapeError("shape mismatch: stack operands differ");
  }
  Shape out = ins.front();
  const auto a = static_cast<std::size_t>(normalize_axis(axis, out.size() + 1));
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(a), static_cast<std::int64_t>(ins.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Index plans. A plan lists flat source indices so the same code moves
// doubles in the interpreter and ring elements in the runtime.

inline std::vector<std::size_t> permute_plan(const Shape& in, const std::vector<std::int64_t>& dims) {
  const Shape out = permute_shape(in, dims);
  const auto in_st = strides_of(in);
  std::vector<std::size_t> src(numel(out));
  std::vector<std::int64_t> idx(out.size(), 0);
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      s += static_cast<std::size_t>(idx[i]) * in_st[static_cast<std::size_t>(normalize_axis(static_cast<int>(dims[i]), in.size()))];
    }
    src[flat] = s;
    for (std::size_t i = out.size(); i-- > 0;) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
  return src;
}

inline std::vector<std::size_t> expand_plan(const Shape& from, const Shape& to) {
  check_expand(from, to);
  const std::size_t off = to.size() - from.size();
  const auto from_st = strides_of(from);
  std::vector<std::size_t> src(numel(to));
  std::vector<std::int64_t> idx(to.size(), 0);
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < from.size(); ++i) {
      if (from[i] != 1) s += static_cast<std::size_t>(idx[off + i]) * from_st[i];
    }
    src[flat] = s;
    for (std::size_t i = to.size(); i-- > 0;) {
      if (++idx[i] < to[i]) break;
      idx[i] = 0;
    }
  }
  return src;
}

// Groups of input indices reduced into each output element along `axis`.
inline std::vector<std::vector<std::size_t>> axis_groups(const Shape& in, int axis) {
  const auto a = static_cast<std::size_t>(normalize_axis(axis, in.size()));
  const auto st = strides_of(in);
  const Shape out = reduce_shape(in, axis);
  std::vector<std::vector<std::size_t>> groups(numel(out));
  const auto out_st = strides_of(out);
  for (std::size_t flat = 0; flat < groups.size(); ++flat) {
    std::size_t base = 0, rem = flat;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto c = rem / out_st[i];
      rem %= out_st[i];
      base += c * st[i];
    }
    auto& g = groups[flat];
    g.reserve(static_cast<std::size_t>(in[a]));
    for (std::int64_t k = 0; k < in[a]; ++k) g.push_back(base + static_cast<std::size_t>(k) * st[a]);
  }
  return groups;
}

// Non-overlapping window x window pooling groups over the last two dims.
inline std::vector<std::vector<std::size_t>> pool_groups(const Shape& in, std::int64_t window) {
  const Shape out = pool_shape(in, window);
  const std::size_t r = in.size();
  const auto st = strides_of(in);
  const auto out_st = strides_of(out);
  std::vector<std::vector<std::size_t>> groups(numel(out));
  for (std::size_t flat = 0; flat < groups.size(); ++flat) {
    std::size_t base = 0, rem = flat;
    std::vector<std::size_t> coord(r);
    for (std::size_t i = 0; i < r; ++i) {
      coord[i] = rem / out_st[i];
      rem %= out_st[i];
    }
    for (std::size_t i = 0; i + 2 < r; ++i) base += coord[i] * st[i];
    auto& g = groups[flat];
    for (std::int64_t dy = 0; dy < window; ++dy) {
      for (std::int64_t dx = 0; dx < window; ++dx) {
        const auto y = coord[r - 2] * static_cast<std::size_t>(window) + static_cast<std::size_t>(dy);
        const auto x = coord[r - 1] * static_cast<std::size_t>(window) + static_cast<std::size_t>(dx);
        g.push_back(base + y * st[r - 2] + x * st[r - 1]);
      }
    }
  }
  return groups;
}

// Expanded product plan for mul-like ops: out[out_idx[k]] += lhs[lhs_idx[k]] * rhs[rhs_idx[k]].
struct ProductPlan {
  Shape out_shape;
  std::vector<std::size_t> lhs_idx, rhs_idx, out_idx;
  std::size_t products() const { return lhs_idx.size(); }
};

enum class MulKind { Elementwise, MatMul, Conv2d };

inline ProductPlan elementwise_plan(const Shape& a, const Shape& b) {
  ProductPlan p;
  p.out_shape = elementwise_shape(a, b);
  const auto n = numel(p.out_shape);
  const bool a1 = numel(a) == 1 && n != 1, b1 = numel(b) == 1 && n != 1;
  p.lhs_idx.resize(n);
  p.rhs_idx.resize(n);
  p.out_idx.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.lhs_idx[i] = a1 ? 0 : i;
    p.rhs_idx[i] = b1 ? 0 : i;
    p.out_idx[i] = i;
  }
  return p;
}

inline ProductPlan matmul_plan(const Shape& a, const Shape& b) {
  ProductPlan p;
  p.out_shape = matmul_shape(a, b);
  const auto m = static_cast<std::size_t>(a[0]), k = static_cast<std::size_t>(a[1]), n = static_cast<std::size_t>(b[1]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t j = 0; j < n; ++j) {
        p.lhs_idx.push_back(i * k + l);
        p.rhs_idx.push_back(l * n + j);
        p.out_idx.push_back(i * n + j);
      }
  return p;
}

inline ProductPlan conv2d_plan(const Shape& in, const Shape& w) {
  ProductPlan p;
  p.out_shape = conv2d_shape(in, w);
  const std::size_t off = in.size() - 3;
  const std::size_t batch = off ? static_cast<std::size_t>(in[0]) : 1;
  const auto C = static_cast<std::size_t>(in[off]), H = static_cast<std::size_t>(in[off + 1]),
             W = static_cast<std::size_t>(in[off + 2]);
  const auto O = static_cast<std::size_t>(w[0]), KH = static_cast<std::size_t>(w[2]), KW = static_cast<std::size_t>(w[3]);
  const auto OH = H - KH + 1, OW = W - KW + 1;
  for (std::size_t nb = 0; nb < batch; ++nb)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t y = 0; y < OH; ++y)
        for (std::size_t x = 0; x < OW; ++x)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < KH; ++ky)
              for (std::size_t kx = 0; kx < KW; ++kx) {
                p.lhs_idx.push_back(((nb * C + c) * H + y + ky) * W + x + kx);
                p.rhs_idx.push_back(((o * C + c) * KH + ky) * KW + kx);
                p.out_idx.push_back(((nb * O + o) * OH + y) * OW + x);
              }
  return p;
}

inline ProductPlan product_plan(MulKind kind, const Shape& a, const Shape& b) {
  switch (kind) {
    case MulKind::Elementwise: return elementwise_plan(a, b);
    case MulKind::MatMul: return matmul_plan(a, b);
    case MulKind::Conv2d: return conv2d_plan(a, b);
  }
  throw ShapeError("unknown mul kind");
}

template <class T>
Tensor<T> gather(const Tensor<T>& in, const Shape& out_shape, const std::vector<std::size_t>& src) {
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = in.data[src[i]];
  return out;
}

template <class T>
Tensor<T> stack_tensors(const std::vector<const Tensor<T>*>& ins, int axis) {
  std::vector<Shape> shapes;
  for (auto* t : ins) shapes.push_back(t->shape);
  const Shape out_shape = stack_shape(shapes, axis);
  const auto a = static_cast<std::size_t>(normalize_axis(axis, out_shape.size()));
  // outer = product of dims before axis, inner = product of dims from axis on (of an operand)
  std::size_t outer = 1;
  for (std::size_t i = 0; i < a; ++i) outer *= static_cast<std::size_t>(out_shape[i]);
  const std::size_t inner = ins.empty() ? 0 : ins.front()->size() / outer;
  Tensor<T> out(out_shape);
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o)
    for (auto* t : ins)
      for (std::size_t i = 0; i < inner; ++i) out.data[pos++] = t->data[o * inner + i];
  return out;
}

}  // namespace mpcc
