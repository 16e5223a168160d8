#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace specsense {

/// Runs one command-line invocation. `args` excludes the program name.
/// Returns the process exit status: 0 on success, 1 on configuration or
/// runtime errors, 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SpecfunCheckLine {
  std::string function;
  double max_error = 0.0;  // relative, except chi2_isf (absolute in p)
  double tolerance = 0.0;
  int points = 0;

  bool ok() const { return max_error <= tolerance; }
};

/// Compares the special functions with adaptive quadrature on fixed grids.
std::vector<SpecfunCheckLine> specfun_check();

}  // namespace specsense
