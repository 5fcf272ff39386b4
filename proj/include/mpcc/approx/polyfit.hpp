#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcc/ir/graph.hpp"
#include "mpcc/ir/interpret.hpp"

namespace mpcc {

// Offline least-squares fitter for the piecewise polynomial activations.
//
// Each target is split by symmetry into a polynomial in u = |x|:
//   gelu(x) = 0.5x + E(u),  E(u) = gelu(u) - 0.5u   (even part)
//   silu(x) = 0.5x + E(u),  E(u) = silu(u) - 0.5u
//   sigmoid(x) = 0.5 + sgn(x) O(u),  O(u) = sigmoid(u) - 0.5
// and P(u) approximates E or O on [0, B]. Outside the interval the activation
// takes its asymptote, which is what E(u) -> 0.5u (or O(u) -> 0.5) gives.

struct PolyFit {
  OpKind op = OpKind::Gelu;
  int degree = 4;
  double bound = 5.0;
  std::vector<double> coefficients;  // ascending powers of u
  double max_abs_error = 0.0;         // over x in [-B, B]
};

inline double poly_target(OpKind op, double u) {
  switch (op) {
    case OpKind::Gelu: return detail::gelu(u) - 0.5 * u;
    case OpKind::Silu: return detail::silu(u) - 0.5 * u;
    case OpKind::Sigmoid: return detail::sigmoid(u) - 0.5;
    default: throw std::invalid_argument(std::string("no polynomial target for ") + op_name(op));
  }
}

inline double horner(const std::vector<double>& c, double u) {
  double p = 0;
  for (std::size_t i = c.size(); i-- > 0;) p = p * u + c[i];
  return p;
}

inline constexpr int kFitGrid = 20001;

inline PolyFit fit_poly(OpKind op, int degree, double bound, int grid = kFitGrid) {
  Eigen::MatrixXd A(grid, degree + 1);
  Eigen::VectorXd y(grid);
  for (int i = 0; i < grid; ++i) {
    const double u = bound * i / (grid - 1);
    double p = 1;
    for (int k = 0; k <= degree; ++k, p *= u) A(i, k) = p;
    y(i) = poly_target(op, u);
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  PolyFit f{op, degree, bound, std::vector<double>(c.data(), c.data() + c.size()), 0.0};
  for (int i = 0; i < grid; ++i) {
    const double u = bound * i / (grid - 1);
    f.max_abs_error = std::max(f.max_abs_error, std::abs(horner(f.coefficients, u) - y(i)));
  }
  return f;
}

inline nlohmann::json poly_fit_to_json(const PolyFit& f) {
  return {{"op", op_name(f.op)},
          {"degree", f.degree},
          {"interval", {-f.bound, f.bound}},
          {"coefficients", f.coefficients},
          {"max_abs_error", f.max_abs_error}};
}

inline PolyFit poly_fit_from_json(const nlohmann::json& j) {
  PolyFit f;
  f.op = *parse_op(j.at("op").get<std::string>());
  f.degree = j.at("degree").get<int>();
  f.bound = j.at("interval").at(1).get<double>();
  f.coefficients = j.at("coefficients").get<std::vector<double>>();
  f.max_abs_error = j.at("max_abs_error").get<double>();
  return f;
}

}  // namespace mpcc
