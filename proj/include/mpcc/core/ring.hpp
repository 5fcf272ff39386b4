#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpcc {

using u64 = std::uint64_t;
using i64 = std::int64_t;

// Arithmetic modulo 2^width for 1 <= width <= 64. Elements are stored in the
// low `width` bits of a u64; the high bits are always zero.
class Ring {
 public:
  explicit Ring(int width = 64) : width_(width) {
    if (width < 1 || width > 64) {
      throw std::invalid_argument("ring width must be in [1, 64], got " + std::to_string(width));
    }
    mask_ = width == 64 ? ~u64{0} : ((u64{1} << width) - 1);
  }

  int width() const { return width_; }
  u64 mask() const { return mask_; }
  // Bytes needed to put one element on the wire.
  int wire_bytes() const { return (width_ + 7) / 8; }

  u64 reduce(u64 v) const { return v & mask_; }
  u64 add(u64 a, u64 b) const { return (a + b) & mask_; }
  u64 sub(u64 a, u64 b) const { return (a - b) & mask_; }
  u64 mul(u64 a, u64 b) const { return (a * b) & mask_; }
  u64 neg(u64 a) const { return (u64{0} - a) & mask_; }

  // Two's-complement interpretation of an element.
  i64 to_signed(u64 v) const {
    v &= mask_;
    if (width_ == 64) return static_cast<i64>(v);
    const u64 sign = u64{1} << (width_ - 1);
    return (v & sign) ? static_cast<i64>(v | ~mask_) : static_cast<i64>(v);
  }
  u64 from_signed(i64 v) const { return static_cast<u64>(v) & mask_; }

  // Arithmetic right shift of the signed interpretation.
  u64 shift_right(u64 v, int bits) const {
    if (bits == 0) return v & mask_;
    return from_signed(to_signed(v) >> bits);
  }

  bool operator==(const Ring&) const = default;

 private:
  int width_;
  u64 mask_;
};

inline bool is_power_of_two(i64 s) { return s > 0 && std::has_single_bit(static_cast<u64>(s)); }

inline int log2_exact(i64 s) {
  if (!is_power_of_two(s)) throw std::invalid_argument("scale " + std::to_string(s) + " is not a power of two");
  return std::countr_zero(static_cast<u64>(s));
}

// Fixed-point encode: round(x * scale) into the ring.
inline u64 encode_fixed(const Ring& ring, double x, i64 scale) {
  return ring.from_signed(static_cast<i64>(std::llround(x * static_cast<double>(scale))));
}

inline double decode_fixed(const Ring& ring, u64 v, i64 scale) {
  return static_cast<double>(ring.to_signed(v)) / static_cast<double>(scale);
}

}  // namespace mpcc
