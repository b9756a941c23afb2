#pragma once

#include "bregman_ot/core.hpp"
#include "bregman_ot/types.hpp"

#include <cmath>

namespace bregman_ot {

enum class KernelKind { quadratic, entropic };

// D_phi(P, X) = sum_ij p (log p - log x) - p + x with the p = 0 terms dropped,
// for callers that already hold log X (robust when X has underflowed entries).
template <typename Scalar>
Scalar entropic_divergence_given_log(const MatrixX<Scalar>& p, const MatrixX<Scalar>& log_x,
                                     const MatrixX<Scalar>& x) {
  detail::CompensatedSum<Scalar> acc;
  for (Index j = 0; j < p.cols(); ++j) {
    for (Index i = 0; i < p.rows(); ++i) {
      const Scalar pij = p(i, j);
      if (pij > Scalar(0)) acc.add(pij * (std::log(pij) - log_x(i, j)) - pij);
      acc.add(x(i, j));
    }
  }
  return acc.value();
}

// Bregman kernel phi with its quadrangle scaling parameters.
//   quadratic: phi(X) = 0.5 ||X||_F^2,            lambda = 2, tau1 = tau2 = 2
//   entropic:  phi(X) = sum x (log x - 1),        default lambda = 2 with tau1
//              adapted by the outer solver (doubling heuristic, starting at 1);
//              conservative mode lambda = tau1 = tau2 = 1 (joint convexity).
// Kernel objects are immutable; the adaptive tau1 state lives in the outer solver.
template <typename Scalar = double>
struct BregmanKernel {
  KernelKind kind = KernelKind::quadratic;
  Scalar qse_lambda = Scalar(2);
  Scalar qsc_tau1 = Scalar(2);
  Scalar qsc_tau2 = Scalar(2);

  static BregmanKernel quadratic() { return {KernelKind::quadratic, Scalar(2), Scalar(2), Scalar(2)}; }
  static BregmanKernel entropic() { return {KernelKind::entropic, Scalar(2), Scalar(1), Scalar(1)}; }
  static BregmanKernel entropic_conservative() {
    return {KernelKind::entropic, Scalar(1), Scalar(1), Scalar(1)};
  }

  bool is_entropic() const { return kind == KernelKind::entropic; }

  Scalar phi(const MatrixX<Scalar>& x) const {
    if (kind == KernelKind::quadratic) return Scalar(0.5) * x.squaredNorm();
    detail::CompensatedSum<Scalar> acc;
    for (Index j = 0; j < x.cols(); ++j) {
      for (Index i = 0; i < x.rows(); ++i) {
        const Scalar xij = x(i, j);
        if (xij < Scalar(0))
          throw std::domain_error("BregmanKernel::phi: negative entry under the entropic kernel");
        if (xij > Scalar(0)) acc.add(xij * (std::log(xij) - Scalar(1)));
        // 0 * (log 0 - 1) := 0
      }
    }
    return acc.value();
  }

  // grad phi: identity map (quadratic) or elementwise log (entropic, interior only).
  MatrixX<Scalar> grad(const MatrixX<Scalar>& y) const {
    if (kind == KernelKind::quadratic) return y;
    if ((y.array() <= Scalar(0)).any())
      throw std::domain_error("BregmanKernel::grad: entropic gradient needs y > 0 entrywise");
    return y.array().log().matrix();
  }

  // (grad phi)^{-1}: identity (quadratic) or elementwise exp (entropic).
  MatrixX<Scalar> mirror_inverse(const MatrixX<Scalar>& g) const {
    if (kind == KernelKind::quadratic) return g;
    return g.array().exp().matrix();
  }

  // D_phi(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>. The entropic case is
  // evaluated as sum x log(x/y) - x + y to avoid cancellation.
  Scalar divergence(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y) const {
    if (x.rows() != y.rows() || x.cols() != y.cols())
      throw std::invalid_argument("BregmanKernel::divergence: shape mismatch");
    if (kind == KernelKind::quadratic) return Scalar(0.5) * (x - y).squaredNorm();
    if ((y.array() <= Scalar(0)).any())
      throw std::domain_error("BregmanKernel::divergence: y on the boundary of dom phi");
    if ((x.array() < Scalar(0)).any())
      throw std::domain_error("BregmanKernel::divergence: x outside dom phi");
    return entropic_divergence_given_log<Scalar>(x, y.array().log().matrix(), y);
  }
};

}  // namespace bregman_ot
