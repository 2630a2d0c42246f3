#include "drex/gradcheck.hpp"

#include <cmath>

namespace drex {

GradcheckReport finite_diff_gradcheck(const ScalarFn& fn, const NamedTensors& params,
                                      const NamedTensors& analytic, double h,
                                      std::size_t stride) {
  if (!params.congruent(analytic)) {
    throw ContractError("finite_diff_gradcheck: analytic gradient layout mismatch");
  }
  if (h <= 0.0) throw ContractError("finite_diff_gradcheck: step must be positive");
  if (stride == 0) stride = 1;

  NamedTensors probe = params.zeros_like();
  for (const std::string& name : params.names()) probe.at(name) = params.at(name);

  GradcheckReport report;
  for (const std::string& name : params.names()) {
    Mat& t = probe.at(name);
    const Mat& a = analytic.at(name);
    for (Eigen::Index idx = 0; idx < t.size(); idx += static_cast<Eigen::Index>(stride)) {
      const double saved = t(idx);
      t(idx) = saved + h;
      const double up = fn(probe);
      t(idx) = saved - h;
      const double down = fn(probe);
      t(idx) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic_v = a(idx);
      const double denom = std::max({std::abs(numeric), std::abs(analytic_v), 1e-8});
      const double rel = std::abs(analytic_v - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = name;
        report.worst_row = static_cast<int>(idx % t.rows());
        report.worst_col = static_cast<int>(idx / t.rows());
      }
    }
  }
  return report;
}

}  // namespace drex
