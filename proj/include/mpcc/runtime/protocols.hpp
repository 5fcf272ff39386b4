#pragma once

#include <functional>
#include <vector>

#include "mpcc/runtime/channel.hpp"
#include "mpcc/runtime/dealer.hpp"
#include "mpcc/runtime/shares.hpp"

namespace mpcc {

struct MpcContext {
  Ring ring;
  Channel& channel;
  Dealer& dealer;
  // Debug hook after every ltz evaluation (inputs and outputs, both parties).
  std::function<void(const SharePair& in, const SharePair& out, int window)> on_ltz;
};

// Beaver product over an expanded index plan. Each party opens x-a and y-b
// for every product in one exchange; output scale is the product of scales.
inline SharePair beaver_mul(MpcContext& ctx, const SharePair& x, const SharePair& y, MulKind kind, ArithTriples& t) {
  const Ring& R = ctx.ring;
  const ProductPlan plan = product_plan(kind, x[0].values.shape, y[0].values.shape);
  const std::size_t P = plan.products();
  if (t.size() != P) {
    throw ProtocolError("beaver_mul: triple batch of " + std::to_string(t.size()) + " for " + std::to_string(P) + " products");
  }
  ctx.dealer.consume(t.id);

  std::array<std::vector<u64>, 2> opened;
  for (int p = 0; p < 2; ++p) {
    const auto& xs = x[p].values;
    const auto& ys = y[p].values;
    std::vector<u64> de(2 * P);
    for (std::size_t k = 0; k < P; ++k) {
      de[k] = R.sub(xs[plan.lhs_idx[k]], t.a[p][k]);
      de[P + k] = R.sub(ys[plan.rhs_idx[k]], t.b[p][k]);
    }
    opened[p] = de;
    ctx.channel.send(p, 1 - p, pack_ring(R, de));
  }
  SharePair out;
  for (int p = 0; p < 2; ++p) {
    const auto theirs = unpack_ring(R, ctx.channel.recv(p, 1 - p), 2 * P);
    RingTensor z(plan.out_shape);
    for (std::size_t k = 0; k < P; ++k) {
      const u64 d = R.add(opened[p][k], theirs[k]);
      const u64 e = R.add(opened[p][P + k], theirs[P + k]);
      u64 v = R.add(t.c[p][k], R.add(R.mul(d, t.b[p][k]), R.mul(e, t.a[p][k])));
      if (p == 0) v = R.add(v, R.mul(d, e));
      z[plan.out_idx[k]] = R.add(z[plan.out_idx[k]], v);
    }
    out[p] = {std::move(z), x[p].scale * y[p].scale, p};
  }
  return out;
}

namespace detail {

using Bits = std::vector<std::uint8_t>;

// One GMW layer of AND gates over XOR-shared bits.
inline std::array<Bits, 2> and_layer(MpcContext& ctx, const std::array<Bits, 2>& x, const std::array<Bits, 2>& y) {
  const std::size_t G = x[0].size();
  BoolTriples t = ctx.dealer.boolean(G);
  ctx.dealer.consume(t.id);
  std::array<Bits, 2> opened;
  for (int p = 0; p < 2; ++p) {
    Bits de(2 * G);
    for (std::size_t k = 0; k < G; ++k) {
      de[k] = x[p][k] ^ t.a[p][k];
      de[G + k] = y[p][k] ^ t.b[p][k];
    }
    opened[p] = de;
    ctx.channel.send(p, 1 - p, pack_bits(de));
  }
  std::array<Bits, 2> z;
  for (int p = 0; p < 2; ++p) {
    const Bits theirs = unpack_bits(ctx.channel.recv(p, 1 - p), 2 * G);
    z[p].resize(G);
    for (std::size_t k = 0; k < G; ++k) {
      const std::uint8_t d = opened[p][k] ^ theirs[k];
      const std::uint8_t e = opened[p][G + k] ^ theirs[G + k];
      std::uint8_t v = t.c[p][k] ^ (d & t.b[p][k]) ^ (e & t.a[p][k]);
      if (p == 0) v ^= d & e;
      z[p][k] = v;
    }
  }
  return z;
}

}  // namespace detail

// Sign bit of x as a 0/1 share at scale 1. Correct when x lies in
// [-2^(w-1), 2^(w-1)); outside the window the result is unspecified.
inline SharePair ltz_protocol(MpcContext& ctx, const SharePair& x, int w) {
  const Ring& R = ctx.ring;
  if (w < 1 || w > R.width()) {
    throw ProtocolError("ltz window " + std::to_string(w) + " outside [1, " + std::to_string(R.width()) + "]");
  }
  using detail::Bits;
  const std::size_t n = x[0].values.size();
  const auto m = static_cast<std::size_t>(w - 1);

  // Party p's low w bits; as XOR shares, a = (bits0, 0) and b = (0, bits1).
  std::array<Bits, 2> own;
  for (int p = 0; p < 2; ++p) {
    own[p].resize(n * static_cast<std::size_t>(w));
    for (std::size_t e = 0; e < n; ++e)
      for (std::size_t i = 0; i < static_cast<std::size_t>(w); ++i)
        own[p][e * static_cast<std::size_t>(w) + i] = static_cast<std::uint8_t>((x[p].values[e] >> i) & 1u);
  }
  auto bit = [&](int p, std::size_t e, std::size_t i) { return own[p][e * static_cast<std::size_t>(w) + i]; };

  // Generate/propagate prefixes over the low m bits, layout [e*m + i].
  std::array<Bits, 2> G, P;
  if (m > 0) {
    std::array<Bits, 2> ga, gb;
    for (int p = 0; p < 2; ++p) {
      ga[p].assign(n * m, 0);
      gb[p].assign(n * m, 0);
      P[p].resize(n * m);
      for (std::size_t e = 0; e < n; ++e)
        for (std::size_t i = 0; i < m; ++i) {
          const auto b = bit(p, e, i);
          (p == 0 ? ga[p] : gb[p])[e * m + i] = b;
          P[p][e * m + i] = b;
        }
    }
    G = detail::and_layer(ctx, ga, gb);
    for (std::size_t d = 1; d < m; d *= 2) {
      const std::size_t span = m - d;
      std::array<Bits, 2> xs, ys;
      for (int p = 0; p < 2; ++p) {
        xs[p].resize(2 * n * span);
        ys[p].resize(2 * n * span);
        std::size_t k = 0;
        for (std::size_t e = 0; e < n; ++e)
          for (std::size_t i = d; i < m; ++i, ++k) {
            xs[p][k] = P[p][e * m + i];
            ys[p][k] = G[p][e * m + i - d];
            xs[p][n * span + k] = P[p][e * m + i];
            ys[p][n * span + k] = P[p][e * m + i - d];
          }
      }
      const auto z = detail::and_layer(ctx, xs, ys);
      for (int p = 0; p < 2; ++p) {
        std::size_t k = 0;
        for (std::size_t e = 0; e < n; ++e)
          for (std::size_t i = d; i < m; ++i, ++k) {
            G[p][e * m + i] ^= z[p][k];
            P[p][e * m + i] = z[p][n * span + k];
          }
      }
    }
  }

  // sign = a_{w-1} ^ b_{w-1} ^ carry into bit w-1
  std::array<Bits, 2> s;
  for (int p = 0; p < 2; ++p) {
    s[p].resize(n);
    for (std::size_t e = 0; e < n; ++e) s[p][e] = bit(p, e, m) ^ (m > 0 ? G[p][e * m + m - 1] : 0);
  }

  // B2A with a daBit: open c = s ^ r, then [s] = c + [r] - 2c[r].
  DaBits r = ctx.dealer.dabits(n);
  ctx.dealer.consume(r.id);
  std::array<Bits, 2> opened;
  for (int p = 0; p < 2; ++p) {
    opened[p].resize(n);
    for (std::size_t e = 0; e < n; ++e) opened[p][e] = s[p][e] ^ r.bit[p][e];
    ctx.channel.send(p, 1 - p, pack_bits(opened[p]));
  }
  SharePair out;
  for (int p = 0; p < 2; ++p) {
    const Bits theirs = unpack_bits(ctx.channel.recv(p, 1 - p), n);
    RingTensor v(x[p].values.shape);
    for (std::size_t e = 0; e < n; ++e) {
      const u64 c = opened[p][e] ^ theirs[e];
      u64 a = R.sub(r.arith[p][e], R.mul(2 * c, r.arith[p][e]));
      if (p == 0) a = R.add(a, c);
      v[e] = a;
    }
    out[p] = {std::move(v), 1, p};
  }
  if (ctx.on_ltz) ctx.on_ltz(x, out, w);
  return out;
}

struct MaxStats {
  std::size_t comparisons = 0;
  std::size_t depth = 0;
};

// Tree reduction per group: c = 1 - ltz(x - y), keep y + c(x - y).
inline SharePair max_kernel(MpcContext& ctx, const SharePair& x, const std::vector<std::vector<std::size_t>>& groups,
                            const Shape& out_shape, int w, MaxStats* stats = nullptr) {
  const Ring& R = ctx.ring;
  const std::int64_t scale = x[0].scale;
  std::array<std::vector<std::vector<u64>>, 2> cur;
  for (int p = 0; p < 2; ++p) {
    cur[p].resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (auto idx : groups[g]) cur[p][g].push_back(x[p].values[idx]);
  }
  MaxStats st;
  for (;;) {
    std::size_t pairs = 0;
    for (const auto& g : cur[0]) pairs += g.size() / 2;
    if (!pairs) break;
    SharePair diff, lo;
    for (int p = 0; p < 2; ++p) {
      diff[p] = {RingTensor({static_cast<std::int64_t>(pairs)}), scale, p};
      lo[p] = {RingTensor({static_cast<std::int64_t>(pairs)}), scale, p};
      std::size_t k = 0;
      for (const auto& g : cur[p])
        for (std::size_t j = 0; j + 1 < g.size(); j += 2, ++k) {
          diff[p].values[k] = R.sub(g[j], g[j + 1]);
          lo[p].values[k] = g[j + 1];
        }
    }
    SharePair c = ltz_protocol(ctx, diff, w);
    for (int p = 0; p < 2; ++p)
      for (auto& v : c[p].values.data) v = p == 0 ? R.sub(1, v) : R.neg(v);
    ArithTriples t = ctx.dealer.arith(pairs);
    const SharePair prod = beaver_mul(ctx, c, diff, MulKind::Elementwise, t);
    for (int p = 0; p < 2; ++p) {
      std::size_t k = 0;
      for (auto& g : cur[p]) {
        std::vector<u64> next;
        for (std::size_t j = 0; j + 1 < g.size(); j += 2, ++k) next.push_back(R.add(lo[p].values[k], prod[p].values[k]));
        if (g.size() % 2) next.push_back(g.back());
        g = std::move(next);
      }
    }
    st.comparisons += pairs;
    ++st.depth;
  }
  SharePair out;
  for (int p = 0; p < 2; ++p) {
    RingTensor v(out_shape);
    for (std::size_t g = 0; g < groups.size(); ++g) v[g] = cur[p][g].front();
    out[p] = {std::move(v), scale, p};
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace mpcc
