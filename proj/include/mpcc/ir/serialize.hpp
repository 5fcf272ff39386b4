#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "mpcc/core/error.hpp"
#include "mpcc/ir/graph.hpp"

namespace mpcc {

using json = nlohmann::json;

inline constexpr const char* kGraphFormat = "mpcc.graph";
inline constexpr int kGraphVersion = 1;

namespace detail {

inline std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline json attrs_to_json(OpKind op, const Attrs& a) {
  json j = json::object();
  switch (op) {
    case OpKind::Input: j["name"] = a.name; break;
    case OpKind::Const: j["value"] = a.value; break;
    case OpKind::Sum:
    case OpKind::Mean:
    case OpKind::Max:
    case OpKind::Softmax:
    case OpKind::Stack: j["axis"] = a.axis; break;
    case OpKind::LayerNorm:
      j["axis"] = a.axis;
      j["eps"] = a.eps;
      break;
    case OpKind::Reshape:
    case OpKind::Permute:
    case OpKind::Expand: j["dims"] = a.dims; break;
    case OpKind::AvgPool:
    case OpKind::MaxPool: j["window"] = a.window; break;
    case OpKind::FullLike: j["fill"] = a.fill; break;
    case OpKind::Cmp: j["cmp"] = cmp_name(a.cmp); break;
    case OpKind::Encode:
      j["scale_from"] = a.scale_from;
      j["scale_to"] = a.scale_to;
      break;
    case OpKind::Trunc: j["scale"] = a.scale_from; break;
    case OpKind::MulMPC: j["kind"] = mul_kind_name(a.mul_kind); break;
    default: break;
  }
  return j;
}

inline Attrs attrs_from_json(OpKind op, const json& j) {
  Attrs a;
  if (!j.is_object()) throw std::invalid_argument("attrs must be an object");
  a.name = j.value("name", std::string{});
  if (j.contains("value")) a.value = j.at("value").get<std::vector<double>>();
  a.axis = j.value("axis", -1);
  if (j.contains("dims")) a.dims = j.at("dims").get<std::vector<std::int64_t>>();
  a.window = j.value("window", std::int64_t{0});
  a.eps = j.value("eps", 1e-5);
  a.fill = j.value("fill", 0.0);
  if (j.contains("cmp")) {
    auto c = parse_cmp(j.at("cmp").get<std::string>());
    if (!c) throw std::invalid_argument("unknown comparison '" + j.at("cmp").get<std::string>() + "'");
    a.cmp = *c;
  }
  if (op == OpKind::Trunc) {
    a.scale_from = j.value("scale", std::int64_t{1});
  } else {
    a.scale_from = j.value("scale_from", std::int64_t{1});
    a.scale_to = j.value("scale_to", std::int64_t{1});
  }
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    a.mul_kind = k == "matmul" ? MulKind::MatMul : k == "conv2d" ? MulKind::Conv2d : MulKind::Elementwise;
  }
  return a;
}

}  // namespace detail

inline json owner_to_json(OwnerSet o) { return o.parties(); }

inline json back_type_to_json(const BackType& t) {
  return {{"label", t.is_secret() ? "secret" : "pub"}, {"dtype", dtype_name(t.dtype)}, {"scale", t.scale}};
}

inline BackType back_type_from_json(const json& j) {
  BackType t;
  const auto label = j.at("label").get<std::string>();
  if (label != "secret" && label != "pub") throw std::invalid_argument("unknown label '" + label + "'");
  t.label = label == "secret" ? Label::Secret : Label::Pub;
  auto d = parse_dtype(j.at("dtype").get<std::string>());
  if (!d) throw std::invalid_argument("unknown dtype in back_type");
  t.dtype = *d;
  t.scale = j.at("scale").get<std::int64_t>();
  return t;
}

inline json graph_to_json(const Graph& g) {
  json nodes = json::array();
  for (const auto& [id, n] : g.nodes) {
    json jn = {{"id", id},
               {"op", op_name(n.op)},
               {"inputs", n.inputs},
               {"site", n.site},
               {"attrs", detail::attrs_to_json(n.op, n.attrs)},
               {"meta", {{"shape", n.meta.shape}, {"dtype", dtype_name(n.meta.dtype)}}}};
    if (n.owner) jn["owner"] = owner_to_json(*n.owner);
    if (n.back_type) jn["back_type"] = back_type_to_json(*n.back_type);
    nodes.push_back(std::move(jn));
  }
  json ins = json::array();
  for (const auto& in : g.inputs) ins.push_back({{"name", in.name}, {"id", in.id}});
  return {{"format", kGraphFormat}, {"version", kGraphVersion}, {"inputs", ins}, {"outputs", g.outputs},
          {"nodes", nodes}};
}

inline std::string serialize(const Graph& g) { return graph_to_json(g).dump(1) + "\n"; }

inline Graph graph_from_json(const json& j) {
  for (const char* key : {"nodes", "outputs", "inputs"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("missing \"") + key + "\" key");
  }
  Graph g;
  for (const auto& jn : j.at("nodes")) {
    Node n;
    n.id = jn.at("id").get<int>();
    const auto opname = jn.at("op").get<std::string>();
    auto op = parse_op(opname);
    if (!op) throw std::invalid_argument("unknown operator '" + opname + "' at node " + std::to_string(n.id));
    n.op = *op;
    n.inputs = jn.at("inputs").get<std::vector<int>>();
    n.site = jn.value("site", std::string{});
    n.attrs = detail::attrs_from_json(n.op, jn.value("attrs", json::object()));
    const auto& meta = jn.at("meta");
    n.meta.shape = meta.at("shape").get<Shape>();
    auto dt = parse_dtype(meta.at("dtype").get<std::string>());
    if (!dt) throw std::invalid_argument("unknown dtype at node " + std::to_string(n.id));
    n.meta.dtype = *dt;
    if (jn.contains("owner")) n.owner = OwnerSet::from_list(jn.at("owner").get<std::vector<int>>());
    if (jn.contains("back_type")) n.back_type = back_type_from_json(jn.at("back_type"));
    if (!g.nodes.emplace(n.id, n).second) throw std::invalid_argument("duplicate node id " + std::to_string(n.id));
  }
  g.outputs = j.at("outputs").get<std::vector<int>>();
  for (const auto& ji : j.at("inputs")) g.inputs.push_back({ji.at("name").get<std::string>(), ji.at("id").get<int>()});
  return g;
}

// Parses graph text. Syntax errors carry the offending line/column; schema
// errors are reported at the position of the top-level value.
inline Graph deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(std::string("malformed graph JSON: ") + e.what(), line, col);
  }
  std::size_t start = text.find_first_not_of(" \t\r\n");
  auto [line, col] = detail::line_col(text, start == std::string_view::npos ? 0 : start);
  try {
    return graph_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid graph: ") + e.what(), line, col);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid graph: ") + e.what(), line, col);
  }
}

}  // namespace mpcc
