#pragma once

#include <functional>
#include <vector>

#include "nssf/autodiff.hpp"
#include "nssf/rng.hpp"

namespace nssf_test {

using nssf::Rng;
using nssf::ad::Arr;
using nssf::ad::Tape;
using nssf::ad::Tensor;
using nssf::ad::Var;

inline Tensor random_tensor(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                            double scale = 1.0) {
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t.v[i] = scale * rng.normal();
  return t;
}

inline Tensor positive_tensor(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t.v[i] = 0.5 + rng.uniform01();
  return t;
}

// Central finite-difference oracle: the independent gradient route every
// differentiable op is checked against. `build` must construct a scalar
// loss from leaf vars created in order from `inputs`.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double eval_loss(const std::vector<Tensor>& inputs,
                        const LossBuilder& build) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, false));
  Var loss = build(tape, vars);
  return tape.value(loss)[0];
}

// Returns the max relative error between tape gradients and central
// differences over every coordinate of every input.
inline double fd_max_rel_error(const std::vector<Tensor>& inputs,
                               const LossBuilder& build, double h = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, true));
  Var loss = build(tape, vars);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Arr g_ad = tape.grad(vars[k]);
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[k].v[i] += h;
      minus[k].v[i] -= h;
      const double g_fd =
          (eval_loss(plus, build) - eval_loss(minus, build)) / (2.0 * h);
      const double rel =
          std::abs(g_ad[i] - g_fd) / (std::abs(g_fd) + 1e-8);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace nssf_test
