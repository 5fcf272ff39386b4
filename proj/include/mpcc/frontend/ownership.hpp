#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "mpcc/core/error.hpp"
#include "mpcc/ir/graph.hpp"
#include "mpcc/ir/validate.hpp"

namespace mpcc {

// input name -> owner set
using Annotation = std::map<std::string, OwnerSet>;

// {"secrets": {"x": [0]}, "public": ["w"]}. Inputs listed under "public" are
// owned by every party.
inline Annotation parse_annotation(const nlohmann::json& j) {
  Annotation ann;
  if (!j.is_object()) throw ConfigError("annotation must be a JSON object");
  if (j.contains("secrets")) {
    for (const auto& [name, parties] : j.at("secrets").items()) {
      try {
        ann[name] = OwnerSet::from_list(parties.get<std::vector<int>>());
      } catch (const std::exception& e) {
        throw ConfigError("bad owner list for input '" + name + "': " + e.what());
      }
    }
  }
  if (j.contains("public")) {
    for (const auto& name : j.at("public")) ann[name.get<std::string>()] = OwnerSet::all();
  }
  return ann;
}

inline nlohmann::json annotation_to_json(const Annotation& ann) {
  nlohmann::json secrets = nlohmann::json::object();
  nlohmann::json pub = nlohmann::json::array();
  for (const auto& [name, o] : ann) {
    if (o.is_public()) {
      pub.push_back(name);
    } else {
      secrets[name] = o.parties();
    }
  }
  return {{"secrets", secrets}, {"public", pub}};
}

// Names every node "<op>/<topo ordinal>". Existing sites are kept unless
// overwrite is set, so rewritten graphs keep their provenance.
inline void assign_sites(Graph& g, bool overwrite = false) {
  int ordinal = 0;
  for (int id : topo_order(g)) {
    Node& n = g.node(id);
    if (overwrite || n.site.empty()) n.site = std::string(op_name(n.op)) + "/" + std::to_string(ordinal);
    ++ordinal;
  }
}

inline OwnerSet derive_owner(const Graph& g, const Node& n) {
  if (n.op == OpKind::Const || is_value_free(n.op)) return OwnerSet::all();
  OwnerSet o = OwnerSet::all();
  for (int in : n.inputs) {
    const Node& src = g.node(in);
    if (!src.owner) throw Error(Stage::Frontend, "input node " + std::to_string(in) + " has no owner", n.site);
    o = o & *src.owner;
  }
  return o;
}

// Forward propagation with intersection where flows meet. Input owners come
// from the annotation; every other owner is recomputed from scratch.
inline Graph propagate_ownership(Graph g, const Annotation& ann) {
  for (const auto& in : g.inputs) {
    auto it = ann.find(in.name);
    if (it == ann.end()) throw Error(Stage::Frontend, "missing ownership annotation for input '" + in.name + "'");
  }
  for (int id : topo_order(g)) {
    Node& n = g.node(id);
    if (n.op == OpKind::Input) {
      auto it = ann.find(n.attrs.name);
      if (it == ann.end()) {
        throw Error(Stage::Frontend, "missing ownership annotation for input '" + n.attrs.name + "'", n.site);
      }
      n.owner = it->second;
    } else {
      n.owner = derive_owner(g, n);
    }
  }
  return g;
}

// The annotation already carried by the input nodes of an owner-annotated graph.
inline Annotation annotation_of(const Graph& g) {
  Annotation ann;
  for (const auto& in : g.inputs) {
    const Node& n = g.node(in.id);
    if (!n.owner) throw Error(Stage::Frontend, "input '" + in.name + "' carries no owner", n.site);
    ann[in.name] = *n.owner;
  }
  return ann;
}

inline Graph repropagate(Graph g) {
  const Annotation ann = annotation_of(g);
  return propagate_ownership(std::move(g), ann);
}

// Default reveal target: the sole owner of the first singly-owned input, else 0.
inline int default_reveal_to(const Graph& g, const Annotation& ann) {
  for (const auto& in : g.inputs) {
    auto it = ann.find(in.name);
    if (it != ann.end()) {
      if (auto p = it->second.sole_owner()) return *p;
    }
  }
  return 0;
}

inline bool fully_owned(const Graph& g) {
  for (const auto& [id, n] : g.nodes)
    if (!n.owner) return false;
  return true;
}

// Frontend entry point: validate, name sites, attach owners.
inline Graph run_frontend(Graph g, const Annotation& ann) {
  require_valid(g, GraphStage::PreApprox, Stage::Frontend);
  assign_sites(g);
  return propagate_ownership(std::move(g), ann);
}

}  // namespace mpcc
