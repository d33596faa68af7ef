#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cofirec/numerics/matrix.hpp"

namespace cofirec::numerics {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares the analytic gradients already stored in each Param::grad against
// central differences of `loss`. Per-coordinate error is
// |a - n| / max(|a| + |n|, floor * max(1, |loss|)), the loss taken at the
// unperturbed point.
GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  const std::vector<Param*>& params, double eps = 1e-5,
                                  double floor = 1e-6);

}  // namespace cofirec::numerics
