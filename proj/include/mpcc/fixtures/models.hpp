#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/approx/library.hpp"
#include "mpcc/frontend/ownership.hpp"
#include "mpcc/ir/builder.hpp"
#include "mpcc/ir/interpret.hpp"
#include "mpcc/ir/serialize.hpp"
#include "mpcc/ir/tensor_io.hpp"
#include "mpcc/tuner/dataset.hpp"
#include "mpcc/tuner/loss.hpp"

namespace mpcc::fixtures {

// A model with its ownership, weights (party 1), a tuning/calibration set,
// and one sample input for single runs.
struct ModelFixture {
  std::string name;
  Graph graph;  // pre-frontend
  Annotation annotation;
  TensorMap weights;
  std::vector<std::string> data_inputs;  // per-sample inputs, owned by party 0
  Dataset dataset;                       // samples include the weights
  LossKind loss = LossKind::CrossEntropy;
  double threshold = 0.0;
  TensorMap sample() const { return dataset.samples.front(); }
};

namespace detail {

inline DTensor normal(std::mt19937_64& rng, const Shape& shape, double sd) {
  std::normal_distribution<double> d(0.0, sd);
  DTensor t(shape);
  for (auto& v : t.data) v = d(rng);
  return t;
}

inline void finish(ModelFixture& f) {
  for (const auto& in : f.graph.inputs) {
    const bool data = std::find(f.data_inputs.begin(), f.data_inputs.end(), in.name) != f.data_inputs.end();
    f.annotation[in.name] = OwnerSet::single(data ? 0 : 1);
  }
}

}  // namespace detail

// Two-layer ReLU MLP on a two-class problem separated along direction u.
inline ModelFixture mlp_fixture(std::size_t samples = 128) {
  constexpr int d = 8, h = 16;
  ModelFixture f;
  f.name = "mlp";
  GraphBuilder b(f.graph);
  const int x = b.input("x", {1, d});
  const int w1 = b.input("w1", {d, h});
  const int b1 = b.input("b1", {h});
  const int w2 = b.input("w2", {h, 2});
  const int b2 = b.input("b2", {2});
  const int hid = b.relu(b.op(OpKind::Linear, {x, w1, b1}));
  Attrs sm;
  sm.axis = -1;
  b.output(b.op(OpKind::Softmax, {b.op(OpKind::Linear, {hid, w2, b2})}, sm));
  f.data_inputs = {"x"};
  detail::finish(f);

  std::mt19937_64 rng(20240501);
  std::vector<double> u(d);
  for (int i = 0; i < d; ++i) u[static_cast<std::size_t>(i)] = (i % 2 ? -1.0 : 1.0) / std::sqrt(static_cast<double>(d));
  // Hidden unit j responds to +u (j < h/2) or -u, with a little jitter.
  DTensor W1 = detail::normal(rng, {d, h}, 0.05), B1({h}, -0.1), W2({h, 2}), B2({2});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < h; ++j) W1[static_cast<std::size_t>(i * h + j)] += (j < h / 2 ? 1.0 : -1.0) * u[static_cast<std::size_t>(i)];
  for (int j = 0; j < h; ++j) {
    W2[static_cast<std::size_t>(j * 2 + (j < h / 2 ? 1 : 0))] = 0.5;
    W2[static_cast<std::size_t>(j * 2 + (j < h / 2 ? 0 : 1))] = -0.25;
  }
  f.weights = {{"w1", W1}, {"b1", B1}, {"w2", W2}, {"b2", B2}};

  std::normal_distribution<double> noise(0.0, 0.6);
  for (std::size_t s = 0; s < samples; ++s) {
    const int label = static_cast<int>(s % 2);
    DTensor xs({1, d});
    for (int i = 0; i < d; ++i) xs[static_cast<std::size_t>(i)] = (label ? 1.5 : -1.5) * u[static_cast<std::size_t>(i)] + noise(rng);
    TensorMap m = f.weights;
    m["x"] = xs;
    f.dataset.samples.push_back(std::move(m));
    f.dataset.references.push_back(DTensor({1}, std::vector<double>{static_cast<double>(label)}));
  }
  f.threshold = 0.05;
  return f;
}

// One pre-LN transformer block (seq 4, d_model 8) with a pooled 2-way head.
// Labels are the exact model's predictions.
inline ModelFixture transformer_fixture(std::size_t samples = 256) {
  constexpr int seq = 4, dm = 8, dff = 16;
  ModelFixture f;
  f.name = "transformer";
  GraphBuilder b(f.graph);
  const int x = b.input("x", {seq, dm});
  const int g1 = b.input("ln1_g", {dm});
  const int be1 = b.input("ln1_b", {dm});
  const int wq = b.input("wq", {dm, dm});
  const int wk = b.input("wk", {dm, dm});
  const int wv = b.input("wv", {dm, dm});
  const int g2 = b.input("ln2_g", {dm});
  const int be2 = b.input("ln2_b", {dm});
  const int w1 = b.input("w1", {dm, dff});
  const int b1 = b.input("b1", {dff});
  const int w2 = b.input("w2", {dff, dm});
  const int b2 = b.input("b2", {dm});
  const int wo = b.input("wout", {dm, 2});

  Attrs last;
  last.axis = -1;
  const int h1 = b.op(OpKind::LayerNorm, {x, g1, be1}, last);
  const int q = b.matmul(h1, wq), k = b.matmul(h1, wk), v = b.matmul(h1, wv);
  const int scores = b.mul_scalar(b.matmul(q, b.op(OpKind::Transpose, {k})), 1.0 / std::sqrt(static_cast<double>(dm)));
  const int attn = b.matmul(b.op(OpKind::Softmax, {scores}, last), v);
  const int r1 = b.add(x, attn);
  const int h2 = b.op(OpKind::LayerNorm, {r1, g2, be2}, last);
  const int ff = b.op(OpKind::Linear, {b.op(OpKind::Gelu, {b.op(OpKind::Linear, {h2, w1, b1})}), w2, b2});
  const int r2 = b.add(r1, ff);
  const int pooled = b.with_axis(OpKind::Mean, r2, 0);
  b.output(b.op(OpKind::Softmax, {b.matmul(pooled, wo)}, last));
  f.data_inputs = {"x"};
  detail::finish(f);

  std::mt19937_64 rng(7331);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dm));
  f.weights["ln1_g"] = DTensor({dm}, 1.0);
  f.weights["ln1_b"] = DTensor({dm}, 0.0);
  f.weights["ln2_g"] = DTensor({dm}, 1.0);
  f.weights["ln2_b"] = DTensor({dm}, 0.0);
  f.weights["wq"] = detail::normal(rng, {dm, dm}, sd);
  f.weights["wk"] = detail::normal(rng, {dm, dm}, sd);
  f.weights["wv"] = detail::normal(rng, {dm, dm}, sd);
  f.weights["w1"] = detail::normal(rng, {dm, dff}, sd);
  f.weights["b1"] = detail::normal(rng, {dff}, 0.1);
  f.weights["w2"] = detail::normal(rng, {dff, dm}, 1.0 / std::sqrt(static_cast<double>(dff)));
  f.weights["b2"] = detail::normal(rng, {dm}, 0.1);
  f.weights["wout"] = detail::normal(rng, {dm, 2}, 1.0);

  for (std::size_t s = 0; s < samples; ++s) {
    TensorMap m = f.weights;
    m["x"] = detail::normal(rng, {seq, dm}, 1.0);
    const DTensor p = interpret(f.graph, m).front();
    f.dataset.references.push_back(DTensor({1}, std::vector<double>{p[1] > p[0] ? 1.0 : 0.0}));
    f.dataset.samples.push_back(std::move(m));
  }
  f.threshold = 0.02;
  return f;
}

// Two independent softmax sites. Site A sees a nearly flat input and
// tolerates the crudest exp; site B sees logits spread over [-8, 0].
inline ModelFixture two_softmax_fixture(std::size_t samples = 64) {
  constexpr int n = 4;
  ModelFixture f;
  f.name = "two_softmax";
  GraphBuilder b(f.graph);
  const int a = b.input("a", {1, n});
  const int c = b.input("b", {1, n});
  Attrs last;
  last.axis = -1;
  Attrs first;
  first.axis = 0;
  b.output(b.op(OpKind::Stack, {b.op(OpKind::Softmax, {a}, last), b.op(OpKind::Softmax, {c}, last)}, first));
  f.data_inputs = {"a", "b"};
  detail::finish(f);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> flat(-0.01, 0.01), wide(-8.0, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    DTensor av({1, n}), bv({1, n});
    for (auto& v : av.data) v = flat(rng);
    for (auto& v : bv.data) v = wide(rng);
    TensorMap m{{"a", av}, {"b", bv}};
    f.dataset.references.push_back(interpret(f.graph, m).front());
    f.dataset.samples.push_back(std::move(m));
  }
  f.loss = LossKind::Mse;
  f.threshold = 1e-4;
  return f;
}

// Input straight to output.
inline ModelFixture identity_fixture() {
  ModelFixture f;
  f.name = "identity";
  GraphBuilder b(f.graph);
  b.output(b.input("x", {2, 3}));
  f.data_inputs = {"x"};
  detail::finish(f);
  f.dataset.samples.push_back({{"x", DTensor({2, 3}, std::vector<double>{1.5, -2.25, 0.0, 3.0, -0.125, 7.0})}});
  return f;
}

inline std::vector<ModelFixture> all_fixtures() {
  return {mlp_fixture(), transformer_fixture(), two_softmax_fixture(), identity_fixture()};
}

// Writes graph.json, annotation.json, weights, dataset.json (+ batched
// tensors), input.json for one run, and config.json.
inline void write_fixture(const fs::path& dir, const ModelFixture& f) {
  write_text(dir / "graph.json", serialize(f.graph));
  write_text(dir / "annotation.json", annotation_to_json(f.annotation).dump(1) + "\n");

  nlohmann::json fixed = nlohmann::json::object(), inputs = nlohmann::json::object(), run = nlohmann::json::object();
  for (const auto& [name, t] : f.weights) {
    write_tensor(dir / "weights" / (name + ".bin"), t);
    fixed[name] = "weights/" + name + ".bin";
    run[name] = "weights/" + name + ".bin";
  }
  for (const auto& name : f.data_inputs) {
    std::vector<DTensor> rows;
    for (const auto& s : f.dataset.samples) rows.push_back(s.at(name));
    write_tensor(dir / "data" / (name + ".bin"), stack_rows(rows));
    inputs[name] = "data/" + name + ".bin";
    write_tensor(dir / "run" / (name + ".csv"), f.dataset.samples.front().at(name));
    run[name] = "run/" + name + ".csv";
  }
  nlohmann::json manifest = {{"inputs", inputs}, {"fixed", fixed}};
  if (!f.dataset.references.empty()) {
    write_tensor(dir / "data" / "labels.bin", stack_rows(f.dataset.references));
    manifest["labels"] = "data/labels.bin";
  }
  write_text(dir / "dataset.json", manifest.dump(1) + "\n");
  write_text(dir / "inputs.json", run.dump(1) + "\n");

  nlohmann::json cfg = {
      {"graph", "graph.json"},
      {"annotation", "annotation.json"},
      {"passes", builtin_pass_names()},
      {"ring_width", 64},
      {"scale", 65536},
      {"hummingbird", "off"},
      {"margin", 2.0},
      {"calibration", "dataset.json"},
      {"inputs", "inputs.json"},
      {"seed", 1},
      {"tuner",
       {{"strategy", "greedy-linear"},
        {"loss", loss_name(f.loss)},
        {"threshold", f.threshold},
        {"dataset", "dataset.json"},
        {"seed", 1}}}};
  write_text(dir / "config.json", cfg.dump(1) + "\n");
}

}  // namespace mpcc::fixtures
