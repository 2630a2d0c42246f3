#pragma once

#include "drex/params.hpp"

namespace drex {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment buffers plus the shared step counter. The counter is
// bumped once per optimizer step, not once per tensor, so bias correction is
// uniform across a parameter set.
struct AdamState {
  NamedTensors m;
  NamedTensors v;
  long long step = 0;

  static AdamState like(const NamedTensors& params);
};

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state, double lr,
               const AdamOptions& opt = {});

}  // namespace drex
