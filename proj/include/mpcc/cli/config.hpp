#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/approx/library.hpp"
#include "mpcc/hummingbird/windows.hpp"
#include "mpcc/ir/tensor_io.hpp"
#include "mpcc/tuner/tuner.hpp"

namespace mpcc {

struct PassSpec {
  std::string name;
  KnobValues fixed;  // knobs pinned by configuration
};

struct TunerSection {
  std::string strategy = "greedy-linear";
  std::string loss = "cross_entropy";
  double threshold = 0.0;  // absolute loss delta
  std::optional<fs::path> dataset;
  std::size_t max_steps = 0;
  std::uint64_t seed = 1;
};

// One JSON file per project; relative paths resolve against its directory.
struct ProjectConfig {
  fs::path file;
  fs::path graph;
  fs::path annotation;
  std::vector<PassSpec> passes;
  std::optional<fs::path> knobs;
  TunerSection tuner;
  int ring_width = 64;
  std::int64_t scale = std::int64_t{1} << 16;
  std::string hummingbird = "off";
  double margin = 2.0;
  std::optional<fs::path> calibration;
  std::optional<int> reveal_to;
  std::uint64_t seed = 1;
  std::optional<fs::path> inputs;
};

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline fs::path existing(const fs::path& base, const std::string& rel, const char* what) {
  fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " file not found: " + p.string());
  return p;
}

}  // namespace detail

inline ProjectConfig parse_config(const nlohmann::json& j, const fs::path& file) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kKeys = {"graph", "annotation", "passes", "knobs", "tuner", "ring_width", "scale",
                                              "hummingbird", "margin", "calibration", "reveal_to", "seed", "inputs"};
  for (const auto& [k, v] : j.items())
    if (!kKeys.count(k)) throw ConfigError("unknown config field '" + k + "'");
  const fs::path base = file.parent_path();
  ProjectConfig c;
  c.file = file;
  if (!j.contains("graph")) throw ConfigError("config lacks 'graph'");
  if (!j.contains("annotation")) throw ConfigError("config lacks 'annotation'");
  c.graph = detail::existing(base, j.at("graph").get<std::string>(), "graph");
  c.annotation = detail::existing(base, j.at("annotation").get<std::string>(), "annotation");
  if (j.contains("passes")) {
    for (const auto& p : j.at("passes")) {
      if (p.is_string()) {
        c.passes.push_back({p.get<std::string>(), {}});
      } else if (p.is_object() && p.contains("name")) {
        PassSpec s{p.at("name").get<std::string>(), {}};
        if (p.contains("fixed"))
          for (const auto& [k, v] : p.at("fixed").items()) s.fixed[k] = v.get<int>();
        c.passes.push_back(std::move(s));
      } else {
        throw ConfigError("pass entries must be names or {\"name\", \"fixed\"} objects");
      }
    }
  } else {
    for (const auto& n : builtin_pass_names()) c.passes.push_back({n, {}});
  }
  if (j.contains("knobs")) c.knobs = detail::existing(base, j.at("knobs").get<std::string>(), "knobs");
  if (j.contains("tuner")) {
    const auto& t = j.at("tuner");
    c.tuner.strategy = detail::field<std::string>(t, "strategy", c.tuner.strategy);
    c.tuner.loss = detail::field<std::string>(t, "loss", c.tuner.loss);
    c.tuner.threshold = detail::field<double>(t, "threshold", 0.0);
    c.tuner.max_steps = detail::field<std::size_t>(t, "max_steps", 0);
    c.tuner.seed = detail::field<std::uint64_t>(t, "seed", 1);
    if (t.contains("dataset")) c.tuner.dataset = detail::existing(base, t.at("dataset").get<std::string>(), "tuning dataset");
  }
  c.ring_width = detail::field<int>(j, "ring_width", 64);
  c.scale = detail::field<std::int64_t>(j, "scale", c.scale);
  c.hummingbird = detail::field<std::string>(j, "hummingbird", "off");
  c.margin = detail::field<double>(j, "margin", 2.0);
  if (j.contains("calibration")) c.calibration = detail::existing(base, j.at("calibration").get<std::string>(), "calibration dataset");
  if (j.contains("reveal_to")) c.reveal_to = j.at("reveal_to").get<int>();
  c.seed = detail::field<std::uint64_t>(j, "seed", 1);
  if (j.contains("inputs")) c.inputs = detail::existing(base, j.at("inputs").get<std::string>(), "inputs");
  return c;
}

inline ProjectConfig load_config(const fs::path& file) { return parse_config(read_json(file), file); }

// Field checks that flags may have changed after loading.
inline void check_config(const ProjectConfig& c) {
  if (c.ring_width < 16 || c.ring_width > 64) throw ConfigError("ring_width must lie in [16, 64]");
  if (c.scale < 1 || (c.scale & (c.scale - 1)) != 0) throw ConfigError("scale must be a power of two");
  if (c.margin < 1) throw ConfigError("margin must be at least 1");
  if (c.reveal_to && (*c.reveal_to < 0 || *c.reveal_to > 1)) throw ConfigError("reveal_to must be 0 or 1");
  if (!(c.tuner.threshold >= 0)) throw ConfigError("tuner threshold must be >= 0");
  parse_hb_mode(c.hummingbird);
  parse_strategy(c.tuner.strategy);
  parse_loss(c.tuner.loss);
}

// Registered passes selected and configured by the project.
inline std::vector<PassDescriptor> build_passes(const ProjectConfig& c) {
  const auto all = builtin_passes();
  std::vector<PassDescriptor> out;
  for (const auto& spec : c.passes) {
    auto it = std::find_if(all.begin(), all.end(), [&](const PassDescriptor& p) { return p.name == spec.name; });
    if (it == all.end()) throw ConfigError("unknown pass '" + spec.name + "'");
    PassDescriptor p = *it;
    for (const auto& [k, v] : spec.fixed) {
      const KnobSpec* ks = p.knob(k);
      if (!ks) throw ConfigError("pass " + p.name + " has no knob '" + k + "'");
      if (!ks->admits(v)) throw ConfigError("knob " + p.name + "." + k + "=" + std::to_string(v) + " out of range");
      p.fixed[k] = v;
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline LowerConfig lower_config(const ProjectConfig& c, const Graph& g, const Annotation& ann) {
  LowerConfig lc;
  lc.ring_width = c.ring_width;
  lc.scale = c.scale;
  lc.reveal_to = c.reveal_to ? *c.reveal_to : default_reveal_to(g, ann);
  return lc;
}

}  // namespace mpcc
