#include "drex/adam.hpp"

#include <cmath>

namespace drex {

AdamState AdamState::like(const NamedTensors& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state, double lr,
               const AdamOptions& opt) {
  if (!params.congruent(grads)) throw ContractError("adam_step: gradient layout mismatch");
  if (!params.congruent(state.m)) throw ContractError("adam_step: moment layout mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (const std::string& name : params.names()) {
    Mat& p = params.at(name);
    const Mat& g = grads.at(name);
    Mat& m = state.m.at(name);
    Mat& v = state.v.at(name);
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v.array().matrix() + (1.0 - opt.beta2) * g.array().square().matrix();
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    p.array() -= lr * m_hat / (v_hat.sqrt() + opt.epsilon);
  }
}

}  // namespace drex
