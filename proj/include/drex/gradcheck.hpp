#pragma once

#include <functional>
#include <string>

#include "drex/params.hpp"

namespace drex {

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  int worst_row = -1;
  int worst_col = -1;
  std::size_t coords_checked = 0;

  bool passed(double threshold = 1e-4) const { return max_rel_error <= threshold; }
};

using ScalarFn = std::function<double(const NamedTensors&)>;

// Central finite differences of fn at params, compared coordinate by
// coordinate against the supplied analytic gradients. Relative error uses
// |a - n| / max(|a|, |n|, 1e-8). stride > 1 probes every stride-th
// coordinate of large tensors to bound runtime.
GradcheckReport finite_diff_gradcheck(const ScalarFn& fn, const NamedTensors& params,
                                      const NamedTensors& analytic, double h = 1e-5,
                                      std::size_t stride = 1);

struct OpCheck {
  std::string op;
  GradcheckReport report;
};

struct GradcheckSuite {
  std::vector<OpCheck> checks;
  double threshold = 1e-4;

  double worst() const;
  bool passed() const;
};

// Checks every differentiable building block in isolation (inputs included
// as checked leaves), then the full per-interaction loss on a three-row toy
// batch with a trainable hashed embedding table.
GradcheckSuite run_gradcheck_suite(std::uint64_t seed = 17);

// One line per op: name, max relative error, pass/fail at the threshold.
std::string gradcheck_text(const GradcheckSuite& suite);

}  // namespace drex
