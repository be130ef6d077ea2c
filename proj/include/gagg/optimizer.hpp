#pragma once

#include <cmath>
#include <vector>

#include "gagg/matrix.hpp"

namespace gagg {

/// Adam with bias correction; paper only fixes the learning rate, so the
/// moment/epsilon constants are the standard defaults.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// One update over an ordered parameter list. The state is created on the
/// first call and shape-checked afterwards.
inline void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                      AdamState& state, double lr, const AdamConfig& cfg = {}) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  }
  if (state.step == 0) {
    state.m.clear();
    state.v.clear();
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: state holds " + std::to_string(state.m.size()) +
                     " slots for " + std::to_string(params.size()) + " params");
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    detail::require_same_shape(p, g, "adam_step");
    detail::require_same_shape(p, state.m[i], "adam_step state");
    for (std::size_t k = 0; k < p.size(); ++k) {
      double gk = g.values()[k];
      double& mk = state.m[i].values()[k];
      double& vk = state.v[i].values()[k];
      mk = cfg.beta1 * mk + (1.0 - cfg.beta1) * gk;
      vk = cfg.beta2 * vk + (1.0 - cfg.beta2) * gk * gk;
      double mhat = mk / bc1;
      double vhat = vk / bc2;
      p.values()[k] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

}  // namespace gagg
