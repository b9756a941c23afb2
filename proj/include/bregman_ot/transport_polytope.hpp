#pragma once

#include "bregman_ot/types.hpp"

namespace bregman_ot {

// The marginal operator A(X) = [X e_n; X^T e_m] and its adjoint
// A*(y) = y_f e_n^T + e_m y_g^T.
template <typename Scalar = double>
struct MarginalOperator {
  Index m = 0;
  Index n = 0;

  VectorX<Scalar> apply(const MatrixX<Scalar>& x) const {
    if (x.rows() != m || x.cols() != n)
      throw std::invalid_argument("MarginalOperator::apply: shape mismatch");
    VectorX<Scalar> out(m + n);
    out.head(m) = x.rowwise().sum();
    out.tail(n) = x.colwise().sum().transpose();
    return out;
  }

  MatrixX<Scalar> adjoint(const VectorX<Scalar>& y) const {
    if (y.size() != m + n)
      throw std::invalid_argument("MarginalOperator::adjoint: shape mismatch");
    MatrixX<Scalar> out = y.head(m).replicate(1, n);
    out.rowwise() += y.tail(n).transpose();
    return out;
  }
};

// Rounding onto the transportation polytope: scale rows by min(a_i/r_i, 1),
// then columns by min(b_j/c_j, 1), then add the rank-one deficit correction
// err_a err_b^T / ||err_a||_1. Output satisfies the marginals to ~1e-12 and
// ||x - G(x)||_1 <= 2 (||x e - a||_1 + ||x^T e - b||_1).
template <typename Scalar>
MatrixX<Scalar> round_to_polytope(const MatrixX<Scalar>& x, const VectorX<Scalar>& a,
                                  const VectorX<Scalar>& b) {
  if (x.rows() != a.size() || x.cols() != b.size())
    throw std::invalid_argument("round_to_polytope: shape mismatch");
  if ((x.array() < Scalar(0)).any())
    throw std::invalid_argument("round_to_polytope: input must be nonnegative");
  if ((a.array() <= Scalar(0)).any() || (b.array() <= Scalar(0)).any())
    throw std::invalid_argument("round_to_polytope: marginals must be strictly positive");

  const VectorX<Scalar> r = x.rowwise().sum();
  // a_i > 0, so a zero row gives a_i/0 = +inf and scale 1.
  const VectorX<Scalar> row_scale = (a.array() / r.array()).min(Scalar(1)).matrix();
  MatrixX<Scalar> y = row_scale.asDiagonal() * x;

  const VectorX<Scalar> c = y.colwise().sum().transpose();
  const VectorX<Scalar> col_scale = (b.array() / c.array()).min(Scalar(1)).matrix();
  y = y * col_scale.asDiagonal();

  // Both deficits are nonnegative after scaling and share the same l1 mass.
  const VectorX<Scalar> err_a = (a - y.rowwise().sum()).cwiseMax(Scalar(0));
  const VectorX<Scalar> err_b = (b - y.colwise().sum().transpose()).cwiseMax(Scalar(0));
  const Scalar mass_a = err_a.sum();
  const Scalar mass_b = err_b.sum();
  if (mass_a > Scalar(1e-15) && mass_b > Scalar(1e-15))
    y.noalias() += err_a * (err_b / mass_a).transpose();
  return y;
}

}  // namespace bregman_ot
