#pragma once

// Test-only oracles, independent of the solver implementations they check.

#include "bregman_ot/types.hpp"

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace test_oracles {

using bregman_ot::Index;
using bregman_ot::Matrix;
using bregman_ot::Vector;

// Plain double-loop Sinkhorn scaling, run for a fixed number of sweeps.
inline Matrix long_run_scaling(const Matrix& kernel_matrix, const Vector& a, const Vector& b,
                               long sweeps) {
  const Index m = kernel_matrix.rows(), n = kernel_matrix.cols();
  std::vector<double> u(m, 1.0), v(n, 1.0);
  for (long t = 0; t < sweeps; ++t) {
    for (Index i = 0; i < m; ++i) {
      double kv = 0;
      for (Index j = 0; j < n; ++j) kv += kernel_matrix(i, j) * v[j];
      u[i] = a[i] / kv;
    }
    for (Index j = 0; j < n; ++j) {
      double ku = 0;
      for (Index i = 0; i < m; ++i) ku += kernel_matrix(i, j) * u[i];
      v[j] = b[j] / ku;
    }
  }
  Matrix x(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) x(i, j) = u[i] * kernel_matrix(i, j) * v[j];
  return x;
}

// Brute-force Euclidean projection onto the transportation polytope: enumerate
// all active sets, solve the equality-constrained least-squares problem and
// keep the feasible candidate with the smallest objective.
inline Matrix brute_force_projection(const Matrix& g, const Vector& a, const Vector& b) {
  const Index m = g.rows(), n = g.cols();
  const Index cells = m * n;
  const Index eq = m + n;
  double best = std::numeric_limits<double>::infinity();
  Matrix best_x;

  for (unsigned long mask = 0; mask < (1ul << cells); ++mask) {
    const int active = __builtin_popcountl(mask);
    Eigen::MatrixXd B(eq + active, cells);
    Eigen::VectorXd d(eq + active);
    B.setZero();
    d.setZero();
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) B(i, i + j * m) = 1.0;  // row sums (column-major vec)
      d[i] = a[i];
    }
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) B(m + j, i + j * m) = 1.0;
      d[m + j] = b[j];
    }
    Index row = eq;
    for (Index k = 0; k < cells; ++k)
      if (mask & (1ul << k)) B(row++, k) = 1.0;

    const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data(), cells);
    const Eigen::MatrixXd gram = B * B.transpose();
    const Eigen::VectorXd rhs = d - B * gv;
    const Eigen::VectorXd lambda = gram.completeOrthogonalDecomposition().solve(rhs);
    if ((gram * lambda - rhs).cwiseAbs().maxCoeff() > 1e-9) continue;  // inconsistent subset
    const Eigen::VectorXd xv = gv + B.transpose() * lambda;
    if (xv.minCoeff() < -1e-9) continue;
    const double value = 0.5 * (xv - gv).squaredNorm();
    if (value < best) {
      best = value;
      best_x = Eigen::Map<const Matrix>(xv.data(), m, n);
    }
  }
  return best_x;
}

}  // namespace test_oracles
