#pragma once

#include <map>

#include "mpcc/backend/lower.hpp"
#include "mpcc/runtime/engine.hpp"

namespace mpcc {

// Decoded value of every lowered node after a run with keep_registers. Shares
// are reconstructed from both parties, which only a debugging harness can do.
inline std::map<int, DTensor> node_values(const Lowered& low, const ExecResult& res) {
  const Ring ring(low.programs[0].ring_width);
  std::map<int, DTensor> out;
  for (const auto& [id, regs] : low.node_regs) {
    const BackType& t = low.node_types.at(id);
    if (t.is_secret()) {
      const auto& a = res.registers[0].at(static_cast<std::size_t>(regs[0]));
      const auto& b = res.registers[1].at(static_cast<std::size_t>(regs[1]));
      const ShareTensor s0{a.r, a.scale, 0}, s1{b.r, b.scale, 1};
      out[id] = decode_tensor(ring, reconstruct(ring, s0, s1), t.scale);
    } else {
      const int p = regs[0] >= 0 ? 0 : 1;
      out[id] = res.registers[static_cast<std::size_t>(p)].at(static_cast<std::size_t>(regs[static_cast<std::size_t>(p)])).f;
    }
  }
  return out;
}

}  // namespace mpcc
