#pragma once

#include <optional>
#include <vector>

#include "mpcc/ir/graph.hpp"

namespace mpcc {

// Output of tools/polyfit (least squares on a 20001-point grid of u in [0, B]).
// Regenerate with `polyfit --emit-table`; tests check this table against the fitter.

struct PolyEntry {
  OpKind op;
  int degree;
  double bound;
  std::vector<double> coefficients;  // ascending powers of |x|
  double max_abs_error;
};

inline const std::vector<PolyEntry>& poly_table() {
  static const std::vector<PolyEntry> table = {
      {OpKind::Gelu, 4, 3.0,
       {0.0041195368588453274, -0.053911463921840312, 0.56590617477013305, -0.19721801891380678, 0.023292182216720945},
       0.0041195368588453274},
      {OpKind::Gelu, 2, 3.0,
       {-0.10039077376564093, 0.43606045034545721, 0.03779467840535735},
       0.10039077376564093},
      {OpKind::Silu, 4, 5.0,
       {5.1585757002039688e-05, -0.01615481203078609, 0.30961949850699994, -0.065422065354040299, 0.0047854368518389541},
       0.0063691060438024749},
      {OpKind::Silu, 2, 5.0,
       {-0.15244434808812618, 0.41824969476526391, 0.024046722558043007},
       0.15244434808812618},
      {OpKind::Sigmoid, 4, 5.0,
       {-0.0055539410761142665, 0.28448760563098113, -0.047902416552333245, 0.00012327915361771597, 0.00041906357579209923},
       0.0055539410761142665},
      {OpKind::Sigmoid, 2, 5.0,
       {0.017663466279840612, 0.23474593350217623, -0.029017730886617035},
       0.027357287450419321},
  };
  return table;
}

inline std::optional<PolyEntry> find_poly(OpKind op, int degree) {
  for (const auto& e : poly_table())
    if (e.op == op && e.degree == degree) return e;
  return std::nullopt;
}

}  // namespace mpcc
