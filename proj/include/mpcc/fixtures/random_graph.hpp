#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mpcc/frontend/ownership.hpp"
#include "mpcc/ir/builder.hpp"
#include "mpcc/ir/interpret.hpp"

namespace mpcc::fixtures {

struct RandomCase {
  Graph graph;
  Annotation annotation;
  TensorMap inputs;
};

struct RandomGraphOptions {
  int max_nodes = 10;
  double value_range = 4.0;
  // Resampling filters: comparison inputs this close to zero flip under
  // fixed-point noise, and large magnitudes amplify truncation error.
  double min_ltz_margin = 1.0 / 64;
  double max_abs_value = 64.0;
  bool secret_inputs = true;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int pick(std::mt19937_64& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

inline DTensor random_tensor(std::mt19937_64& rng, const Shape& shape, double range) {
  DTensor t(shape);
  for (auto& v : t.data) v = uniform(rng, -range, range);
  return t;
}

inline RandomCase draw_case(std::mt19937_64& rng, const RandomGraphOptions& opt) {
  RandomCase rc;
  GraphBuilder b(rc.graph);
  static const std::vector<Shape> kShapes = {{4}, {2, 3}, {3, 3}, {2, 4}};
  const Shape base = kShapes[static_cast<std::size_t>(pick(rng, static_cast<int>(kShapes.size())))];

  std::vector<int> pool;
  const int n_inputs = 1 + pick(rng, 2);
  for (int i = 0; i < n_inputs; ++i) {
    const std::string name = "x" + std::to_string(i);
    pool.push_back(b.input(name, base));
    rc.annotation[name] = opt.secret_inputs ? OwnerSet::single(pick(rng, 2)) : OwnerSet::all();
    rc.inputs[name] = random_tensor(rng, base, opt.value_range);
  }

  auto same_shape = [&](const Shape& s) {
    std::vector<int> c;
    for (int id : pool)
      if (b.meta(id).shape == s) c.push_back(id);
    return c;
  };

  while (static_cast<int>(rc.graph.nodes.size()) + 1 < opt.max_nodes) {
    const int x = pool[static_cast<std::size_t>(pick(rng, static_cast<int>(pool.size())))];
    const Shape s = b.meta(x).shape;
    int y = -1;
    switch (pick(rng, 11)) {
      case 0:
      case 1: {
        auto c = same_shape(s);
        y = b.add(x, c[static_cast<std::size_t>(pick(rng, static_cast<int>(c.size())))]);
        break;
      }
      case 2: {
        auto c = same_shape(s);
        y = b.sub(x, c[static_cast<std::size_t>(pick(rng, static_cast<int>(c.size())))]);
        break;
      }
      case 3: {
        auto c = same_shape(s);
        y = b.mul(x, c[static_cast<std::size_t>(pick(rng, static_cast<int>(c.size())))]);
        break;
      }
      case 4: y = b.mul_scalar(x, uniform(rng, -2, 2)); break;
      case 5: y = b.add_scalar(x, uniform(rng, -2, 2)); break;
      case 6: y = b.ltz(x); break;
      case 7:
        if (s.size() == 2) {
          const Shape ws{s[1], 1 + pick(rng, 3)};
          y = b.matmul(x, b.constant(random_tensor(rng, ws, 1.0)));
        }
        break;
      case 8: y = b.with_axis(pick(rng, 2) ? OpKind::Sum : OpKind::Mean, x, -1); break;
      case 9: y = b.with_axis(OpKind::Max, x, -1); break;
      case 10:
        if (s.size() == 2) y = b.op(OpKind::Transpose, {x});
        break;
    }
    if (y >= 0) pool.push_back(y);
  }
  b.output(pool.back());
  if (pool.size() > 2 && pick(rng, 2)) b.output(pool[pool.size() - 2]);
  return rc;
}

inline bool acceptable(const RandomCase& rc, const RandomGraphOptions& opt) {
  bool ok = true;
  interpret_values(rc.graph, rc.inputs, [&](const Node& n, const std::vector<const DTensor*>& args, const DTensor& out) {
    for (double v : out.data)
      if (!std::isfinite(v) || std::abs(v) > opt.max_abs_value) ok = false;
    if (n.op == OpKind::Ltz) {
      for (double v : args[0]->data)
        if (std::abs(v) < opt.min_ltz_margin) ok = false;
    }
    if (n.op == OpKind::Max) {
      for (const auto& g : axis_groups(args[0]->shape, n.attrs.axis)) {
        for (std::size_t i = 0; i < g.size(); ++i)
          for (std::size_t j = i + 1; j < g.size(); ++j)
            if (std::abs((*args[0])[g[i]] - (*args[0])[g[j]]) < opt.min_ltz_margin) ok = false;
      }
    }
  });
  return ok;
}

}  // namespace detail

// A random graph over the supported set with secret inputs and public
// constants, resampled until it passes the numeric filters.
inline RandomCase random_supported_case(std::uint64_t seed, const RandomGraphOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  for (;;) {
    RandomCase rc = detail::draw_case(rng, opt);
    if (!detail::acceptable(rc, opt)) continue;
    assign_sites(rc.graph);
    rc.graph = propagate_ownership(std::move(rc.graph), rc.annotation);
    return rc;
  }
}

}  // namespace mpcc::fixtures
