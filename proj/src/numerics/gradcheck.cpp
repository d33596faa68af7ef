#include "cofirec/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cofirec::numerics {

GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  const std::vector<Param*>& params, double eps, double floor) {
  GradCheckReport report;
  const double scaled_floor = floor * std::max(1.0, std::abs(loss()));
  for (Param* p : params) {
    auto values = p->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss();
      values[i] = saved - eps;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.values()[i];
      const double err =
          std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), scaled_floor);
      ++report.coordinates;
      if (err > report.max_relative_error || report.worst_param.empty()) {
        report.max_relative_error = std::max(err, report.max_relative_error);
        report.worst_param = p->name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace cofirec::numerics
