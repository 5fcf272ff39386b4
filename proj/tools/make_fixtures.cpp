// Regenerates tests/fixtures from the in-code model builders.
#include <iostream>

#include "mpcc/fixtures/models.hpp"

int main(int argc, char** argv) {
  const mpcc::fs::path root = argc > 1 ? argv[1] : "tests/fixtures";
  for (const auto& f : mpcc::fixtures::all_fixtures()) {
    mpcc::fixtures::write_fixture(root / f.name, f);
    std::cout << "wrote " << (root / f.name).string() << "\n";
  }
}
