// Copyright 2026 The telesim Authors
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

#ifndef TELESIM_INTEGRATORS_HPP_
#define TELESIM_INTEGRATORS_HPP_

#include <Eigen/Core>

namespace telesim {

/// One classical Runge-Kutta step of x_dot = f(x). `x` is any Eigen vector
/// expression type; `f` maps it to a vector of the same shape.
template <typename Vector, typename Rate>
Vector rk4_step(const Vector& x, typename Vector::Scalar dt, Rate&& f) {
  using Scalar = typename Vector::Scalar;
  const Vector k1 = f(x);
  const Vector k2 = f(Vector(x + (dt / 2) * k1));
  const Vector k3 = f(Vector(x + (dt / 2) * k2));
  const Vector k4 = f(Vector(x + dt * k3));
  return x + (dt / Scalar(6)) * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace telesim

#endif  // TELESIM_INTEGRATORS_HPP_
