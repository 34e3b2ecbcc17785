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

// Continuous algebraic Riccati equation
//   A^T P + P A - P B R^-1 B^T P + Q = 0
// solved two independent ways: the stable-eigenvector basis of the
// Hamiltonian, and the matrix sign function iteration polished by
// Newton-Kleinman steps.

#ifndef TELESIM_RICCATI_HPP_
#define TELESIM_RICCATI_HPP_

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "telesim/errors.hpp"

namespace telesim {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct CareSolution {
  MatrixX<Scalar> P;
  MatrixX<Scalar> K;  // R^-1 B^T P
  Scalar residual{0};
  int iterations{0};
};

template <typename Scalar>
Scalar care_residual(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                     const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R,
                     const MatrixX<Scalar>& P) {
  const MatrixX<Scalar> S = B * R.ldlt().solve(B.transpose());
  const MatrixX<Scalar> res = A.transpose() * P + P * A - P * S * P + Q;
  return res.cwiseAbs().rowwise().sum().maxCoeff();
}

namespace detail {

template <typename Scalar>
MatrixX<Scalar> hamiltonian(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                            const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R) {
  const Eigen::Index n = A.rows();
  MatrixX<Scalar> H(2 * n, 2 * n);
  H << A, -B * R.ldlt().solve(B.transpose()), -Q, -A.transpose();
  return H;
}

template <typename Scalar>
void check_shapes(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                  const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw ParameterError("care: inconsistent matrix dimensions");
  }
  if (!(Q - Q.transpose()).isZero(Scalar(1e-12)) ||
      !(R - R.transpose()).isZero(Scalar(1e-12))) {
    throw ParameterError("care: Q and R must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> rs(R);
  if (!(rs.eigenvalues().minCoeff() > 0)) {
    throw ParameterError("care: R must be positive definite");
  }
}

// Solves A^T X + X A = -C by vectorization (small n only).
template <typename Scalar>
MatrixX<Scalar> lyapunov(const MatrixX<Scalar>& A, const MatrixX<Scalar>& C) {
  const Eigen::Index n = A.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  MatrixX<Scalar> L = MatrixX<Scalar>::Zero(n * n, n * n);
  const MatrixX<Scalar> At = A.transpose();
  // vec(At X) = (I kron At) vec(X); vec(X A) = (A^T kron I) vec(X)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      L.block(i * n, j * n, n, n) += I(i, j) * At;
      L.block(i * n, j * n, n, n) += At(i, j) * I;
    }
  }
  const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> c(C.data(), n * n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = L.fullPivLu().solve(-c);
  MatrixX<Scalar> X = Eigen::Map<MatrixX<Scalar>>(x.data(), n, n);
  return (X + X.transpose()) / 2;
}

/// Rejects a candidate whose closed loop A - B K is not Hurwitz.
template <typename Scalar>
void require_stabilizing(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                         const MatrixX<Scalar>& K) {
  const MatrixX<Scalar> Acl = A - B * K;
  Eigen::EigenSolver<MatrixX<Scalar>> es(Acl, false);
  if (es.info() != Eigen::Success) {
    throw SynthesisError("care: closed-loop eigendecomposition failed", NAN);
  }
  Scalar worst = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    worst = std::max(worst, es.eigenvalues()(i).real());
  }
  if (!(worst < 0)) {
    throw SynthesisError("care: solution does not stabilize (A, B), max pole real part " +
                         std::to_string(double(worst)), NAN);
  }
}

}  // namespace detail

/// Eigenvector method: P = X2 X1^-1 for the stable invariant subspace
/// [X1; X2] of the Hamiltonian.
template <typename Scalar>
CareSolution<Scalar> solve_care_eigen(const MatrixX<Scalar>& A,
                                      const MatrixX<Scalar>& B,
                                      const MatrixX<Scalar>& Q,
                                      const MatrixX<Scalar>& R) {
  detail::check_shapes(A, B, Q, R);
  const Eigen::Index n = A.rows();
  const MatrixX<Scalar> H = detail::hamiltonian(A, B, Q, R);
  Eigen::EigenSolver<MatrixX<Scalar>> es(H);
  if (es.info() != Eigen::Success) {
    throw SynthesisError("care: Hamiltonian eigendecomposition failed", NAN);
  }
  using Complex = std::complex<Scalar>;
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> basis(2 * n, n);
  Eigen::Index count = 0;
  const Scalar scale = std::max(Scalar(1), H.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const Scalar re = es.eigenvalues()(i).real();
    if (std::abs(re) <= Scalar(1e-10) * scale) {
      throw SynthesisError(
          "care: Hamiltonian has eigenvalues on the imaginary axis "
          "(unstabilizable or undetectable mode)",
          NAN);
    }
    if (re < 0) {
      if (count == n) break;
      basis.col(count++) = es.eigenvectors().col(i);
    }
  }
  if (count != n) {
    throw SynthesisError("care: stable subspace has wrong dimension", NAN);
  }
  const auto X1 = basis.topRows(n);
  const auto X2 = basis.bottomRows(n);
  const auto lu = X1.transpose().fullPivLu();
  if (!lu.isInvertible()) {
    throw SynthesisError("care: stable subspace is not a graph (uncontrollable mode)", NAN);
  }
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> Pc =
      lu.solve(X2.transpose()).transpose();
  MatrixX<Scalar> P = Pc.real();
  P = (P + P.transpose()) / 2;
  CareSolution<Scalar> out;
  out.P = P;
  out.K = R.ldlt().solve(B.transpose() * P);
  out.residual = care_residual(A, B, Q, R, P);
  out.iterations = 1;
  detail::require_stabilizing<Scalar>(A, B, out.K);
  return out;
}

/// Iterative method: scaled Newton iteration for sign(H), then the stabilizing
/// solution from the stable subspace relation (sign(H) + I) [I; P] = 0, then
/// Newton-Kleinman refinement until the update stalls.
template <typename Scalar>
CareSolution<Scalar> solve_care_iterative(const MatrixX<Scalar>& A,
                                          const MatrixX<Scalar>& B,
                                          const MatrixX<Scalar>& Q,
                                          const MatrixX<Scalar>& R,
                                          int max_iterations = 100) {
  detail::check_shapes(A, B, Q, R);
  const Eigen::Index n = A.rows();
  MatrixX<Scalar> Z = detail::hamiltonian(A, B, Q, R);
  int it = 0;
  for (; it < max_iterations; ++it) {
    Eigen::FullPivLU<MatrixX<Scalar>> lu(Z);
    if (!lu.isInvertible()) {
      throw SynthesisError("care: sign iteration hit a singular iterate", NAN);
    }
    const Scalar det = std::abs(lu.determinant());
    const Scalar c = std::pow(det, Scalar(-1) / Scalar(2 * n));
    const MatrixX<Scalar> next = (c * Z + lu.inverse() / c) / 2;
    const Scalar change = (next - Z).cwiseAbs().colwise().sum().maxCoeff();
    const Scalar norm = Z.cwiseAbs().colwise().sum().maxCoeff();
    Z = next;
    if (change <= Scalar(1e-13) * norm) break;
  }
  if (it == max_iterations) {
    throw SynthesisError("care: sign iteration did not converge", NAN);
  }
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  MatrixX<Scalar> lhs(2 * n, n);
  MatrixX<Scalar> rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + I;
  rhs << Z.topLeftCorner(n, n) + I, Z.bottomLeftCorner(n, n);
  MatrixX<Scalar> P = lhs.colPivHouseholderQr().solve(-rhs);
  P = (P + P.transpose()) / 2;

  for (int k = 0; k < 20; ++k, ++it) {
    const MatrixX<Scalar> K = R.ldlt().solve(B.transpose() * P);
    const MatrixX<Scalar> Acl = A - B * K;
    const MatrixX<Scalar> next =
        detail::lyapunov<Scalar>(Acl, Q + K.transpose() * R * K);
    const Scalar change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (change <= Scalar(1e-15) * std::max(Scalar(1), P.cwiseAbs().maxCoeff())) {
      break;
    }
  }
  CareSolution<Scalar> out;
  out.P = P;
  out.K = R.ldlt().solve(B.transpose() * P);
  out.residual = care_residual(A, B, Q, R, P);
  out.iterations = it;
  detail::require_stabilizing<Scalar>(A, B, out.K);
  return out;
}

}  // namespace telesim

#endif  // TELESIM_RICCATI_HPP_
