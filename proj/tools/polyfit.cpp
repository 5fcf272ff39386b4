// Offline fitter for the GELU/SiLU/Sigmoid piecewise polynomials.
//
//   polyfit --out-dir fixtures/poly     write one JSON fixture per (op, degree)
//   polyfit --emit-table                print the C++ table for poly_table.hpp
#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "mpcc/approx/polyfit.hpp"
#include "mpcc/ir/tensor_io.hpp"

namespace {

struct Target {
  mpcc::OpKind op;
  double bound;
};

const Target kTargets[] = {{mpcc::OpKind::Gelu, 3.0}, {mpcc::OpKind::Silu, 5.0}, {mpcc::OpKind::Sigmoid, 5.0}};

std::string op_enum(mpcc::OpKind op) {
  switch (op) {
    case mpcc::OpKind::Gelu: return "OpKind::Gelu";
    case mpcc::OpKind::Silu: return "OpKind::Silu";
    default: return "OpKind::Sigmoid";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"least-squares polynomial fits for activation approximations"};
  std::string out_dir;
  bool emit_table = false;
  int grid = mpcc::kFitGrid;
  app.add_option("--out-dir", out_dir, "directory for JSON fixtures");
  app.add_flag("--emit-table", emit_table, "print poly_table.hpp entries");
  app.add_option("--grid", grid, "number of fit points on [0, B]");
  CLI11_PARSE(app, argc, argv);

  for (const auto& t : kTargets) {
    for (int degree : {4, 2}) {
      const auto f = mpcc::fit_poly(t.op, degree, t.bound, grid);
      if (!out_dir.empty()) {
        const auto path = std::filesystem::path(out_dir) /
                          (std::string(mpcc::op_name(t.op)) + "_deg" + std::to_string(degree) + ".json");
        mpcc::write_text(path, mpcc::poly_fit_to_json(f).dump(2) + "\n");
      }
      if (emit_table) {
        std::printf("      {%s, %d, %.1f,\n       {", op_enum(t.op).c_str(), degree, t.bound);
        for (std::size_t i = 0; i < f.coefficients.size(); ++i)
          std::printf("%s%.17g", i ? ", " : "", f.coefficients[i]);
        std::printf("},\n       %.17g},\n", f.max_abs_error);
      }
    }
  }
  return 0;
}
