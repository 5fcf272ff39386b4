#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mpcc/ir/graph.hpp"
#include "mpcc/ir/interpret.hpp"
#include "mpcc/ir/tensor_io.hpp"

namespace mpcc {

inline constexpr std::size_t kMaxDatasetSamples = 512;

// Per-sample graph inputs plus an optional reference per sample (a class
// index for classification losses, a target tensor for mse).
struct Dataset {
  std::vector<TensorMap> samples;
  std::vector<DTensor> references;
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Manifest: {"inputs": {name: file}, "fixed": {name: file}, "labels": file,
// "limit": n}. Batched files carry a leading sample dimension; fixed tensors
// (weights) are shared by every sample. Paths are relative to the manifest.
inline Dataset load_dataset(const fs::path& manifest) {
  const auto j = read_json(manifest);
  const fs::path dir = manifest.parent_path();
  auto resolve = [&](const std::string& f) { return fs::path(f).is_absolute() ? fs::path(f) : dir / f; };

  TensorMap fixed;
  if (j.contains("fixed"))
    for (const auto& [name, f] : j.at("fixed").items()) fixed[name] = read_tensor(resolve(f.get<std::string>()));

  std::map<std::string, DTensor> batched;
  std::size_t n = 0;
  bool first = true;
  if (!j.contains("inputs") || j.at("inputs").empty()) throw ConfigError(manifest.string() + ": dataset has no inputs");
  for (const auto& [name, f] : j.at("inputs").items()) {
    DTensor t = read_tensor(resolve(f.get<std::string>()));
    if (t.shape.empty()) throw ConfigError(manifest.string() + ": input '" + name + "' has no batch dimension");
    const auto rows = static_cast<std::size_t>(t.shape[0]);
    if (!first && rows != n) throw ConfigError(manifest.string() + ": inputs disagree on the number of samples");
    n = rows;
    first = false;
    batched[name] = std::move(t);
  }
  if (n == 0) throw ConfigError(manifest.string() + ": dataset is empty");
  const std::size_t limit = std::min(j.value("limit", kMaxDatasetSamples), kMaxDatasetSamples);
  n = std::min(n, limit);

  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    TensorMap s = fixed;
    for (const auto& [name, t] : batched) s[name] = batch_row(t, i);
    ds.samples.push_back(std::move(s));
  }
  if (j.contains("labels")) {
    const DTensor labels = read_tensor(resolve(j.at("labels").get<std::string>()));
    if (labels.shape.empty() || static_cast<std::size_t>(labels.shape[0]) < n) {
      throw ConfigError(manifest.string() + ": fewer labels than samples");
    }
    for (std::size_t i = 0; i < n; ++i) ds.references.push_back(batch_row(labels, i));
  }
  return ds;
}

// Checks every sample against the graph's declared input shapes.
inline void check_dataset(const Graph& g, const Dataset& ds, Stage who) {
  if (ds.empty()) throw Error(who, "dataset is empty");
  if (!ds.references.empty() && ds.references.size() != ds.size()) {
    throw Error(who, "dataset has " + std::to_string(ds.references.size()) + " references for " +
                         std::to_string(ds.size()) + " samples");
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (const auto& in : g.inputs) {
      const Node& n = g.node(in.id);
      auto it = ds.samples[i].find(in.name);
      if (it == ds.samples[i].end()) throw Error(who, "dataset sample " + std::to_string(i) + " lacks input '" + in.name + "'");
      if (it->second.shape != n.meta.shape) {
        throw Error(who, "dataset shape mismatch for input '" + in.name + "': expected " + shape_str(n.meta.shape) +
                             ", got " + shape_str(it->second.shape));
      }
    }
  }
}

}  // namespace mpcc
