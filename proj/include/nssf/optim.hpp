/* Copyright 2026 The nssf Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cmath>

#include "nssf/autodiff.hpp"

namespace nssf::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Params m, v;
  long step = 0;
};

// Returns the global gradient norm; scales gradients down in place when the
// norm exceeds max_norm.
inline double clip_global_norm(Params& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += (g.v * g.v).sum();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) g.v *= s;
  }
  return norm;
}

// Standard Adam update with bias correction.
inline void adam_step(Params& params, const Params& grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    if (g.rows != p.rows || g.cols != p.cols)
      throw ShapeError("adam_step: grad shape mismatch for " + name);
    Tensor& m = state.m.try_emplace(name, p.rows, p.cols).first->second;
    Tensor& v = state.v.try_emplace(name, p.rows, p.cols).first->second;
    m.v = cfg.beta1 * m.v + (1.0 - cfg.beta1) * g.v;
    v.v = cfg.beta2 * v.v + (1.0 - cfg.beta2) * g.v * g.v;
    p.v -= cfg.lr * (m.v / bc1) / ((v.v / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace nssf::ad
