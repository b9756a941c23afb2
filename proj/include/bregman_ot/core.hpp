#pragma once

#include "bregman_ot/types.hpp"

#include <algorithm>
#include <cmath>

namespace bregman_ot {

namespace detail {

// Neumaier-compensated accumulator. Scalar reductions that enter traces and
// stopping tests go through this so repeated runs agree to ~1e-13 or better.
template <typename Scalar>
class CompensatedSum {
 public:
  void add(Scalar value) {
    const Scalar t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value))
      comp_ += (sum_ - t) + value;
    else
      comp_ += (value - t) + sum_;
    sum_ = t;
  }
  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dot_compensated(const Eigen::MatrixBase<DerivedA>& x,
                                          const Eigen::MatrixBase<DerivedB>& y) {
  CompensatedSum<typename DerivedA::Scalar> acc;
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) acc.add(x(i, j) * y(i, j));
  return acc.value();
}

}  // namespace detail

// Frobenius inner product <C, X>.
template <typename Scalar>
Scalar objective(const OtInstance<Scalar>& inst, const MatrixX<Scalar>& x) {
  if (x.rows() != inst.rows() || x.cols() != inst.cols())
    throw std::invalid_argument("objective: plan dimensions do not match the instance");
  return detail::dot_compensated(inst.cost, x);
}

// ||X e_n - a|| + ||X^T e_m - b||  (Euclidean norms).
template <typename Scalar>
Scalar marginal_residual(const OtInstance<Scalar>& inst, const MatrixX<Scalar>& x) {
  if (x.rows() != inst.rows() || x.cols() != inst.cols())
    throw std::invalid_argument("marginal_residual: plan dimensions do not match the instance");
  return (x.rowwise().sum() - inst.a).norm() +
         (x.colwise().sum().transpose() - inst.b).norm();
}

// Relative KKT residual:
//   delta_p = max{ ||Xe-a||/(1+||a||), ||X^Te-b||/(1+||b||), ||min(X,0)||_F/(1+||X||_F) }
//   delta_d = ||min(Z,0)||_F / (1+||C||_F)
//   delta_c = |<X, Z>| / (1+||C||_F),   Z = C - f e^T - e g^T.
template <typename Scalar>
KktResidual<Scalar> kkt_residual(const OtInstance<Scalar>& inst, const MatrixX<Scalar>& x,
                                 const DualPair<Scalar>& duals) {
  if (x.rows() != inst.rows() || x.cols() != inst.cols())
    throw std::invalid_argument("kkt_residual: plan dimensions do not match the instance");
  if (duals.f.size() != inst.rows() || duals.g.size() != inst.cols())
    throw std::invalid_argument("kkt_residual: dual dimensions do not match the instance");

  const MatrixX<Scalar> z = duals.slack(inst.cost);
  const Scalar cost_norm = inst.cost.norm();

  KktResidual<Scalar> r;
  const Scalar dp_row = (x.rowwise().sum() - inst.a).norm() / (Scalar(1) + inst.a.norm());
  const Scalar dp_col =
      (x.colwise().sum().transpose() - inst.b).norm() / (Scalar(1) + inst.b.norm());
  const Scalar dp_neg = x.cwiseMin(Scalar(0)).norm() / (Scalar(1) + x.norm());
  r.delta_p = std::max({dp_row, dp_col, dp_neg});
  r.delta_d = z.cwiseMin(Scalar(0)).norm() / (Scalar(1) + cost_norm);
  r.delta_c = std::abs(detail::dot_compensated(x, z)) / (Scalar(1) + cost_norm);
  r.delta_kkt = std::max({r.delta_p, r.delta_d, r.delta_c});
  return r;
}

}  // namespace bregman_ot
