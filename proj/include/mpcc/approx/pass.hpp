#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mpcc/core/error.hpp"
#include "mpcc/frontend/ownership.hpp"
#include "mpcc/ir/builder.hpp"
#include "mpcc/ir/validate.hpp"

namespace mpcc {

struct KnobSpec {
  std::string name;
  int lo = 0;
  int hi = 0;
  // Admissible values when the range is sparse (e.g. polynomial degree 0/2/4).
  std::vector<int> values;
  // Boolean knobs (clamp) are decremented last by the tuner.
  bool flag = false;

  bool admits(int v) const {
    if (v < lo || v > hi) return false;
    return values.empty() || std::find(values.begin(), values.end(), v) != values.end();
  }
  // Next lower admissible value, if any.
  std::optional<int> below(int v) const {
    for (int c = v - 1; c >= lo; --c)
      if (admits(c)) return c;
    return std::nullopt;
  }
};

using KnobValues = std::map<std::string, int>;

// (site_id, knob name) -> value
using KnobAssignment = std::map<std::pair<std::string, std::string>, int>;

using ReplaceFn = std::function<int(GraphBuilder& b, const Node& matched, const std::vector<int>& inputs,
                                    const KnobValues& knobs)>;
using FilterFn = std::function<bool(const Graph& g, const Node& n)>;

struct PassDescriptor {
  std::string name;
  OpKind pattern = OpKind::Relu;
  FilterFn filter;  // empty: the matched value is secret
  std::vector<KnobSpec> knobs;
  ReplaceFn replace;
  // Knobs pinned by configuration; these are not offered to the tuner.
  KnobValues fixed;

  const KnobSpec* knob(const std::string& k) const {
    for (const auto& s : knobs)
      if (s.name == k) return &s;
    return nullptr;
  }
};

inline bool is_secret_node(const Graph&, const Node& n) { return n.owner && !n.owner->is_public(); }

// Tunable sites seen during a rewrite, in final-graph order.
struct SiteRecord {
  std::string site;
  std::string pass;
  OpKind op = OpKind::Relu;
  std::vector<KnobSpec> knobs;  // tunable knobs only
  KnobValues values;            // values used for this rewrite (tunable and fixed)
  std::size_t position = 0;     // first position of the site's expansion in the final topo order
};

struct RewriteResult {
  Graph graph;
  std::vector<SiteRecord> sites;
  int rounds = 0;
};

// Termination measure: an expansion may only emit unsupported operators of
// strictly lower rank than the one it replaces.
inline int op_rank(OpKind k) {
  switch (k) {
    case OpKind::Softmax:
    case OpKind::LayerNorm: return 3;
    case OpKind::Gelu:
    case OpKind::Silu:
    case OpKind::Sigmoid:
    case OpKind::Reciprocal:
    case OpKind::Rsqrt: return 2;
    default: return is_supported(k) ? 0 : 1;
  }
}

inline KnobValues resolve_knobs(const PassDescriptor& p, const std::string& site, const KnobAssignment& ka) {
  KnobValues v;
  for (const auto& spec : p.knobs) {
    int value = spec.hi;
    if (auto f = p.fixed.find(spec.name); f != p.fixed.end()) value = f->second;
    if (auto it = ka.find({site, spec.name}); it != ka.end()) value = it->second;
    if (!spec.admits(value)) {
      throw Error(Stage::Approx,
                  "knob " + spec.name + "=" + std::to_string(value) + " out of range for pass " + p.name, site);
    }
    v[spec.name] = value;
  }
  return v;
}

inline bool needs_rewrite(const Node& n) {
  if (is_supported(n.op)) return false;
  return !(n.owner && n.owner->is_public());
}

inline RewriteResult rewrite_fixpoint(const Graph& input, const std::vector<PassDescriptor>& passes,
                                      const KnobAssignment& knobs = {}) {
  if (!fully_owned(input)) throw Error(Stage::Approx, "graph must be owner-annotated before approximation");
  RewriteResult res;
  Graph g = input;
  assign_sites(g);
  std::map<std::string, SiteRecord> records;
  const std::size_t guard = std::max<std::size_t>(1, input.nodes.size()) * std::max<std::size_t>(1, passes.size()) + 1;

  for (;;) {
    bool pending = false;
    for (const auto& [id, n] : g.nodes) pending = pending || needs_rewrite(n);
    if (!pending) break;
    if (static_cast<std::size_t>(++res.rounds) > guard) {
      throw Error(Stage::Approx, "internal error: rewriting did not terminate after " + std::to_string(guard) + " rounds");
    }

    Graph next;
    next.outputs.clear();
    std::map<int, int> remap;
    for (int id : topo_order(g)) {
      const Node& n = g.node(id);
      std::vector<int> ins;
      for (int in : n.inputs) ins.push_back(remap.at(in));
      if (!needs_rewrite(n)) {
        Node m = n;
        m.id = next.next_id();
        m.inputs = ins;
        remap[id] = m.id;
        next.nodes.emplace(m.id, std::move(m));
        continue;
      }
      const PassDescriptor* pass = nullptr;
      for (const auto& p : passes) {
        if (p.pattern != n.op) continue;
        if (p.filter ? p.filter(g, n) : is_secret_node(g, n)) {
          pass = &p;
          break;
        }
      }
      if (!pass) throw Error(Stage::Approx, std::string("no approximation for ") + op_name(n.op) + " at " + n.site, n.site);

      const KnobValues kv = resolve_knobs(*pass, n.site, knobs);
      const int first = next.next_id();
      GraphBuilder b(next, n.site);
      const int out = pass->replace(b, n, ins, kv);
      for (auto it = next.nodes.lower_bound(first); it != next.nodes.end(); ++it) {
        if (!is_supported(it->second.op) && op_rank(it->second.op) >= op_rank(n.op)) {
          throw Error(Stage::Approx,
                      "internal error: pass " + pass->name + " emitted " + op_name(it->second.op) +
                          " which does not reduce the rewrite measure",
                      n.site);
        }
      }
      if (next.node(out).meta.shape != n.meta.shape) {
        throw Error(Stage::Approx, "internal error: pass " + pass->name + " changed the output shape", n.site);
      }
      remap[id] = out;
      if (!pass->knobs.empty()) {
        SiteRecord r{n.site, pass->name, n.op, {}, kv, 0};
        for (const auto& k : pass->knobs)
          if (!pass->fixed.count(k.name)) r.knobs.push_back(k);
        records[n.site] = std::move(r);
      }
    }
    for (int o : g.outputs) next.outputs.push_back(remap.at(o));
    for (const auto& in : g.inputs) next.inputs.push_back({in.name, remap.at(in.id)});
    g = repropagate(std::move(next));
  }

  // Order sites by where their expansion first appears in the final graph.
  std::map<std::string, std::size_t> first_pos;
  std::size_t pos = 0;
  for (int id : topo_order(g)) {
    const std::string& s = g.node(id).site;
    for (const auto& [site, rec] : records) {
      if (s.size() > site.size() && s.compare(0, site.size(), site) == 0 && s[site.size()] == '.') {
        first_pos.try_emplace(site, pos);
      }
    }
    ++pos;
  }
  for (auto& [site, rec] : records) {
    rec.position = first_pos.count(site) ? first_pos[site] : pos;
    res.sites.push_back(rec);
  }
  std::stable_sort(res.sites.begin(), res.sites.end(),
                   [](const SiteRecord& a, const SiteRecord& b) { return a.position < b.position; });
  res.graph = std::move(g);
  require_valid(res.graph, GraphStage::PostApprox, Stage::Approx);
  return res;
}

// Maximal assignment for every tunable knob at every recorded site.
inline KnobAssignment maximal_knobs(const std::vector<SiteRecord>& sites) {
  KnobAssignment ka;
  for (const auto& s : sites)
    for (const auto& k : s.knobs) ka[{s.site, k.name}] = k.hi;
  return ka;
}

inline std::size_t knob_count(const std::vector<SiteRecord>& sites) {
  std::size_t n = 0;
  for (const auto& s : sites) n += s.knobs.size();
  return n;
}

}  // namespace mpcc
