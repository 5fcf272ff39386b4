#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/backend/cost.hpp"
#include "mpcc/backend/lower.hpp"
#include "mpcc/ir/interpret.hpp"

namespace mpcc {

enum class HbMode { Off, Static, Recorded };

inline constexpr int kStaticWindow = 33;  // guess -2^32 <= x < 2^32
inline constexpr int kMinWindow = 8;

inline const char* hb_mode_name(HbMode m) {
  switch (m) {
    case HbMode::Off: return "off";
    case HbMode::Static: return "static";
    case HbMode::Recorded: return "recorded";
  }
  return "?";
}

inline HbMode parse_hb_mode(const std::string& s) {
  if (s == "off") return HbMode::Off;
  if (s == "static") return HbMode::Static;
  if (s == "recorded") return HbMode::Recorded;
  throw ConfigError("unknown hummingbird mode '" + s + "' (expected off, static or recorded)");
}

// Observed comparison inputs of one site, in fixed-point units.
struct SiteRange {
  std::string site;
  double min = 0;
  double max = 0;
  double margin = 2.0;
  int window = kMinWindow;
  std::size_t samples = 0;
  bool tight = false;  // less than one bit of headroom over the observed hull
};

using RangeMap = std::map<std::string, SiteRange>;

// Smallest w with margin*hull inside [-2^(w-1), 2^(w-1)), clamped to [8, N].
inline int window_bits(double lo, double hi, double margin, int ring_width) {
  const double mag = margin * std::max(std::abs(lo), std::abs(hi));
  int w = mag < 1 ? 1 : static_cast<int>(std::ceil(std::log2(mag))) + 1;
  while (w < 64 && (hi >= std::ldexp(1.0, w - 1) || lo < -std::ldexp(1.0, w - 1))) ++w;
  return std::clamp(w, kMinWindow, ring_width);
}

namespace detail {

inline void widen(SiteRange& r, double v) {
  if (r.samples == 0) {
    r.min = r.max = v;
  } else {
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  ++r.samples;
}

}  // namespace detail

// Plaintext calibration run: hulls of every secret comparison input. Max
// sites record the differences their tree reduction compares.
inline RangeMap record_ranges(const Graph& g, const std::vector<TensorMap>& dataset, double margin = 2.0,
                              const LowerConfig& cfg = {}) {
  if (dataset.empty()) throw Error(Stage::Hummingbird, "calibration dataset is empty");
  if (margin < 1) throw Error(Stage::Hummingbird, "margin factor must be at least 1");
  const Lowered low = lower_both(g, cfg);
  RangeMap ranges;
  auto scale_of = [&](int node) -> double {
    auto it = low.node_types.find(node);
    return it == low.node_types.end() ? 1.0 : static_cast<double>(it->second.scale);
  };
  const NodeHook hook = [&](const Node& n, const std::vector<const DTensor*>& args, const DTensor&) {
    const bool cmp = n.op == OpKind::Ltz || is_max_like(n.op);
    if (!cmp || !low.node_types.count(n.id) || !low.node_types.at(n.inputs[0]).is_secret()) return;
    const double s = scale_of(n.inputs[0]);
    SiteRange& r = ranges[n.site];
    r.site = n.site;
    const DTensor& x = *args[0];
    if (n.op == OpKind::Ltz) {
      for (double v : x.data) detail::widen(r, std::nearbyint(v * s));
      return;
    }
    for (const auto& grp : max_groups(n.op, n.attrs, x.shape)) {
      std::vector<double> cur;
      for (auto i : grp) cur.push_back(x[i]);
      while (cur.size() > 1) {
        std::vector<double> next;
        for (std::size_t j = 0; j + 1 < cur.size(); j += 2) {
          detail::widen(r, std::nearbyint((cur[j] - cur[j + 1]) * s));
          next.push_back(std::max(cur[j], cur[j + 1]));
        }
        if (cur.size() % 2) next.push_back(cur.back());
        cur = std::move(next);
      }
    }
  };
  for (const auto& sample : dataset) interpret_values(g, sample, hook);
  for (auto& [site, r] : ranges) {
    r.margin = margin;
    r.window = window_bits(r.min, r.max, margin, cfg.ring_width);
    const double mag = std::max(std::abs(r.min), std::abs(r.max));
    r.tight = r.window == cfg.ring_width || mag > std::ldexp(1.0, r.window - 2);
  }
  return ranges;
}

// Sites whose window leaves under one bit of headroom on calibration data.
inline std::vector<std::string> window_warnings(const RangeMap& ranges) {
  std::vector<std::string> out;
  for (const auto& [site, r] : ranges) {
    if (r.tight) {
      out.push_back("window-violation possible at " + site + ": observed hull [" + std::to_string(r.min) + ", " +
                    std::to_string(r.max) + "] leaves under one bit of headroom in w=" + std::to_string(r.window));
    }
  }
  return out;
}

// Sets the comparison width of every ltz/max instruction; unknown sites get
// the static default.
inline ProgramPair apply_windows(ProgramPair progs, const RangeMap& ranges, int static_default = kStaticWindow) {
  for (auto& prog : progs) {
    const int N = prog.ring_width;
    for (auto& i : prog.instrs) {
      if (i.op != Opcode::LtzMPC && i.op != Opcode::MaxKernel) continue;
      auto it = ranges.find(i.site);
      i.window = std::min(N, it != ranges.end() ? it->second.window : static_default);
    }
  }
  return progs;
}

inline ProgramPair apply_mode(ProgramPair progs, HbMode mode, const RangeMap& ranges) {
  switch (mode) {
    case HbMode::Off: return progs;
    case HbMode::Static: return apply_windows(std::move(progs), {}, kStaticWindow);
    case HbMode::Recorded: return apply_windows(std::move(progs), ranges, kStaticWindow);
  }
  return progs;
}

inline nlohmann::json ranges_to_json(const RangeMap& ranges) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [site, r] : ranges) {
    j[site] = {{"min", r.min}, {"max", r.max}, {"w", r.window}, {"margin", r.margin}, {"samples", r.samples},
               {"tight", r.tight}};
  }
  return j;
}

inline RangeMap ranges_from_json(const nlohmann::json& j) {
  RangeMap out;
  for (const auto& [site, v] : j.items()) {
    SiteRange r;
    r.site = site;
    r.min = v.at("min").get<double>();
    r.max = v.at("max").get<double>();
    r.window = v.at("w").get<int>();
    r.margin = v.value("margin", 2.0);
    r.samples = v.value("samples", std::size_t{0});
    r.tight = v.value("tight", false);
    out[site] = r;
  }
  return out;
}

}  // namespace mpcc
