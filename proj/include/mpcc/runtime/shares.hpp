#pragma once

#include <array>
#include <random>

#include "mpcc/core/error.hpp"
#include "mpcc/core/ring.hpp"
#include "mpcc/core/tensor.hpp"

namespace mpcc {

using RingTensor = Tensor<u64>;
using Rng = std::mt19937_64;

// One party's additive share of a fixed-point tensor.
struct ShareTensor {
  RingTensor values;
  std::int64_t scale = 1;
  int party = 0;
  bool operator==(const ShareTensor&) const = default;
};

using SharePair = std::array<ShareTensor, 2>;

inline RingTensor random_ring(const Ring& ring, const Shape& shape, Rng& rng) {
  RingTensor t(shape);
  for (auto& v : t.data) v = ring.reduce(rng());
  return t;
}

inline RingTensor encode_tensor(const Ring& ring, const DTensor& x, std::int64_t scale) {
  RingTensor t(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = encode_fixed(ring, x[i], scale);
  return t;
}

inline DTensor decode_tensor(const Ring& ring, const RingTensor& x, std::int64_t scale) {
  DTensor t(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = decode_fixed(ring, x[i], scale);
  return t;
}

// share0 = x - r, share1 = r with r uniform in the ring.
inline SharePair share(const Ring& ring, const RingTensor& x, std::int64_t scale, Rng& rng) {
  RingTensor r = random_ring(ring, x.shape, rng);
  RingTensor s0(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) s0[i] = ring.sub(x[i], r[i]);
  return {ShareTensor{std::move(s0), scale, 0}, ShareTensor{std::move(r), scale, 1}};
}

inline RingTensor reconstruct(const Ring& ring, const ShareTensor& a, const ShareTensor& b) {
  if (a.values.shape != b.values.shape) throw ProtocolError("reconstruct: share shapes differ");
  RingTensor t(a.values.shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = ring.add(a.values[i], b.values[i]);
  return t;
}
inline RingTensor reconstruct(const Ring& ring, const SharePair& s) { return reconstruct(ring, s[0], s[1]); }

namespace detail {
template <class F>
RingTensor ring_binary(const RingTensor& a, const RingTensor& b, F f) {
  RingTensor r(elementwise_shape(a.shape, b.shape));
  const bool a1 = a.size() == 1, b1 = b.size() == 1;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(a[a1 ? 0 : i], b[b1 ? 0 : i]);
  return r;
}
}  // namespace detail

inline ShareTensor add_shares(const Ring& ring, const ShareTensor& a, const ShareTensor& b) {
  return {detail::ring_binary(a.values, b.values, [&](u64 x, u64 y) { return ring.add(x, y); }), a.scale, a.party};
}

inline ShareTensor sub_shares(const Ring& ring, const ShareTensor& a, const ShareTensor& b) {
  return {detail::ring_binary(a.values, b.values, [&](u64 x, u64 y) { return ring.sub(x, y); }), a.scale, a.party};
}

// Public constant enters the sum at party 0 only.
inline ShareTensor add_public(const Ring& ring, const ShareTensor& a, const RingTensor& c) {
  if (a.party != 0) {
    RingTensor r(elementwise_shape(a.values.shape, c.shape));
    const bool a1 = a.values.size() == 1;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a.values[a1 ? 0 : i];
    return {std::move(r), a.scale, a.party};
  }
  return {detail::ring_binary(a.values, c, [&](u64 x, u64 y) { return ring.add(x, y); }), a.scale, a.party};
}

inline ShareTensor mul_public(const Ring& ring, const ShareTensor& a, const RingTensor& c) {
  return {detail::ring_binary(a.values, c, [&](u64 x, u64 y) { return ring.mul(x, y); }), a.scale, a.party};
}

// Local truncation: each party shifts its signed share.
inline ShareTensor trunc_local(const Ring& ring, const ShareTensor& a, std::int64_t by) {
  const int k = log2_exact(by);
  ShareTensor r{RingTensor(a.values.shape), a.scale / by, a.party};
  for (std::size_t i = 0; i < a.values.size(); ++i) r.values[i] = ring.shift_right(a.values[i], k);
  return r;
}

}  // namespace mpcc
