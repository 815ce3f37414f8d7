#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scan/graph.hpp"
#include "scan/tensor.hpp"

namespace scan {

// A named parameter tensor the objective reads from. The checker perturbs
// the tensor in place and restores it.
struct CheckParam {
  std::string name;
  Tensor* tensor;
};

struct GradCheckOptions {
  double step = 1e-5;  // central-difference step h, must lie in (0, 1e-2]
  double tolerance = 1e-4;
  // 0 checks every coordinate; otherwise at most this many per parameter,
  // drawn with sample_seed (recorded in the report).
  std::size_t max_coords_per_param = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_error = 0.0;
  double step = 0.0;
  bool passed = false;
  bool sampled = false;
  std::uint64_t sample_seed = 0;
  std::string to_string() const;
};

// Rebuilds the scalar objective for the current parameter values. Leaves are
// passed in the same order as the CheckParam list.
using ObjectiveBuilder = std::function<VarId(Graph&, const std::vector<VarId>&)>;

// rel = |analytic - numeric| / max(1, |analytic|, |numeric|)
double gradcheck_relative_error(double analytic, double numeric);

// Compares analytic gradients of a scalar objective against central finite
// differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate.
GradCheckReport finite_difference_check(const ObjectiveBuilder& build,
                                        const std::vector<CheckParam>& params,
                                        const GradCheckOptions& opts = {});

}  // namespace scan
