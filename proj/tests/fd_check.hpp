// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle used by the gradient tests and the
// acceptance suite. Independent of the analytic backward passes it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "itrack/nn.hpp"

namespace itrack::test {

inline constexpr double kFdStep = 1e-5;

// d f / d slot by central differences; restores *slot before returning.
inline double central_diff(const std::function<double()>& f, double* slot, double h = kFdStep) {
  const double orig = *slot;
  *slot = orig + h;
  const double fp = f();
  *slot = orig - h;
  const double fm = f();
  *slot = orig;
  return (fp - fm) / (2.0 * h);
}

// Relative error with a unit floor, so near-zero gradients are judged on
// an absolute scale where finite differences bottom out.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Max relative error between analytic gradients already accumulated in the
// parameters' grad buffers and finite differences of `loss`. `loss` must
// recompute the forward pass from the parameters' current values.
inline double max_grad_fd_error(const std::vector<nn::Parameter*>& params,
                                const std::function<double()>& loss) {
  double worst = 0.0;
  for (nn::Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double numeric = central_diff(loss, &p->value.a[i]);
      worst = std::max(worst, rel_err(p->grad.a[i], numeric));
    }
  }
  return worst;
}

// Same check for a raw buffer (inputs rather than parameters).
inline double max_buffer_fd_error(std::vector<double>& buf, const std::vector<double>& analytic,
                                  const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double numeric = central_diff(loss, &buf[i]);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

}  // namespace itrack::test
