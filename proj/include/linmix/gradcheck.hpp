// Copyright 2026 The linmix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central-difference gradient oracle.
//
// The functions under test are generic callables invocable with both Tensor
// (plain evaluation, used for the numeric side) and Var (recorded on a tape,
// used for the analytic side), returning a single-element result.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "linmix/tape.hpp"

namespace linmix {

namespace detail {

inline double scalar_of(const Tensor& t) {
  const double v = t.item();
  if (!std::isfinite(v)) {
    throw DomainError("finite_diff_check: objective returned non-finite value");
  }
  return v;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace detail

/// Max over coordinates of |analytic - numeric| / max(1, |numeric|).
template <class F>
double finite_diff_check(F&& f, const Tensor& x, double step = 1e-5) {
  if (!(step > 0.0)) throw DomainError("finite_diff_check: step must be > 0");
  Tape tape;
  Var xv = tape.leaf(x);
  Var y = f(xv);
  detail::scalar_of(y.value());
  tape.backward(y);
  const Tensor analytic = tape.grad(xv);

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = detail::scalar_of(f(probe));
    probe[i] = x[i] - step;
    const double down = detail::scalar_of(f(probe));
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, detail::relative_error(analytic[i], numeric));
  }
  return worst;
}

/**
 * Gradient check over every tensor of a parameter bundle.
 *
 * `Params` is a template like MixerLayerParams<V>; `loss` is a generic
 * callable taking Params<Tensor> or Params<Var> and returning a scalar.
 * Returns the worst relative error across all parameter coordinates.
 */
template <template <class> class Params, class F>
double params_gradcheck(const Params<Tensor>& params, F&& loss,
                        double step = 1e-5) {
  Tape tape;
  const Params<Var> bound =
      params.template transform<Var>([&](const Tensor& t) { return tape.leaf(t); });
  Var y = loss(bound);
  detail::scalar_of(y.value());
  tape.backward(y);

  std::vector<Tensor> analytic;
  Params<Var>::visit(bound, "", [&](const std::string&, const Var& v) {
    analytic.push_back(tape.grad(v));
  });

  Params<Tensor> probe = params;
  std::vector<Tensor*> slots;
  Params<Tensor>::visit(probe, "", [&](const std::string&, Tensor& t) {
    slots.push_back(&t);
  });

  double worst = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    Tensor& t = *slots[s];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = t[i];
      t[i] = x + step;
      const double up = detail::scalar_of(loss(probe));
      t[i] = x - step;
      const double down = detail::scalar_of(loss(probe));
      t[i] = x;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, detail::relative_error(analytic[s][i], numeric));
    }
  }
  return worst;
}

}  // namespace linmix
