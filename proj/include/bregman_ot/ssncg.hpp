#pragma once

#include "bregman_ot/transport_polytope.hpp"
#include "bregman_ot/types.hpp"

#include <cmath>
#include <functional>

namespace bregman_ot {

// Dual of the Euclidean projection of G onto the transportation polytope:
//   min Psi(y) = 0.5 ||Pi_+(A*(y)+G)||_F^2 - <y, c> - 0.5 ||G||_F^2,
// over y in Ran(A), with primal candidate X(y) = Pi_+(A*(y)+G).
// In the quadratic-prox subproblem G = S - C/gamma.
template <typename Scalar = double>
struct DualProjectionProblem {
  MatrixX<Scalar> G;
  VectorX<Scalar> c;  // [a; b]
  Scalar gamma = 1;

  Index m() const { return G.rows(); }
  Index n() const { return G.cols(); }
};

// Ran(A) is the orthogonal complement of span{[e_m; -e_n]}.
template <typename Scalar>
VectorX<Scalar> project_onto_range(VectorX<Scalar> y, Index m, Index n) {
  const Scalar t = (y.head(m).sum() - y.tail(n).sum()) / Scalar(m + n);
  y.head(m).array() -= t;
  y.tail(n).array() += t;
  return y;
}

template <typename Scalar = double>
struct PsiEval {
  Scalar value{};
  VectorX<Scalar> grad;     // A(X(y)) - c: exactly the marginal residual of X(y)
  MatrixX<Scalar> primal;   // X(y) = Pi_+(A*(y)+G)
};

template <typename Scalar>
PsiEval<Scalar> psi_and_grad(const DualProjectionProblem<Scalar>& prob, const VectorX<Scalar>& y) {
  const MarginalOperator<Scalar> op{prob.m(), prob.n()};
  PsiEval<Scalar> e;
  e.primal = (op.adjoint(y) + prob.G).cwiseMax(Scalar(0));
  e.value = Scalar(0.5) * e.primal.squaredNorm() - y.dot(prob.c) -
            Scalar(0.5) * prob.G.squaredNorm();
  e.grad = op.apply(e.primal) - prob.c;
  return e;
}

namespace ssncg_detail {

// Generalized Hessian H = A Diag(sigma) A* + eps I restricted to Ran(A); the
// apply is matrix-free via two marginal reductions over the active mask.
template <typename Scalar>
struct ActiveMask {
  MatrixX<Scalar> sigma;
  VectorX<Scalar> row_count, col_count;
};

template <typename Scalar>
ActiveMask<Scalar> make_active_mask(const DualProjectionProblem<Scalar>& prob,
                                    const VectorX<Scalar>& y) {
  const MarginalOperator<Scalar> op{prob.m(), prob.n()};
  ActiveMask<Scalar> mask;
  mask.sigma = ((op.adjoint(y) + prob.G).array() > Scalar(0)).template cast<Scalar>().matrix();
  mask.row_count = mask.sigma.rowwise().sum();
  mask.col_count = mask.sigma.colwise().sum().transpose();
  return mask;
}

template <typename Scalar>
VectorX<Scalar> hessian_apply(const ActiveMask<Scalar>& mask, const VectorX<Scalar>& d,
                              Scalar eps_reg, Index m, Index n) {
  VectorX<Scalar> h(m + n);
  h.head(m) = mask.row_count.cwiseProduct(d.head(m)) + mask.sigma * d.tail(n);
  h.tail(n) = mask.col_count.cwiseProduct(d.tail(n)) + mask.sigma.transpose() * d.head(m);
  h += eps_reg * d;
  return project_onto_range(std::move(h), m, n);
}

// CG on Ran(A) with relative residual target rel_tol. Falls back to the caller
// on breakdown (returns false).
template <typename Scalar>
bool cg_solve(const ActiveMask<Scalar>& mask, const VectorX<Scalar>& rhs, Scalar eps_reg,
              Scalar rel_tol, Index m, Index n, VectorX<Scalar>& out) {
  const Scalar rhs_norm = rhs.norm();
  out = VectorX<Scalar>::Zero(m + n);
  if (rhs_norm == Scalar(0)) return true;
  VectorX<Scalar> r = rhs;
  VectorX<Scalar> p = r;
  Scalar rs = r.squaredNorm();
  const long max_iters = 2 * (m + n) + 10;
  for (long it = 0; it < max_iters; ++it) {
    const VectorX<Scalar> hp = hessian_apply(mask, p, eps_reg, m, n);
    const Scalar php = p.dot(hp);
    if (!(php > Scalar(0))) return it > 0;  // breakdown
    const Scalar step = rs / php;
    out += step * p;
    r -= step * hp;
    const Scalar rs_new = r.squaredNorm();
    if (std::sqrt(rs_new) <= rel_tol * rhs_norm) return true;
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return true;
}

}  // namespace ssncg_detail

// One semismooth Newton direction: solves H d = -grad Psi by CG with forcing
// term min(0.5, ||grad||^{1/2}); steepest descent on breakdown.
template <typename Scalar>
VectorX<Scalar> newton_step(const DualProjectionProblem<Scalar>& prob, const VectorX<Scalar>& y) {
  const PsiEval<Scalar> e = psi_and_grad(prob, y);
  const auto mask = ssncg_detail::make_active_mask(prob, y);
  const Scalar gn = e.grad.norm();
  const Scalar eps_reg = Scalar(1e-12) * (Scalar(1) + gn);
  const Scalar forcing = std::min(Scalar(0.5), std::sqrt(gn));
  VectorX<Scalar> d;
  const bool ok = ssncg_detail::cg_solve(mask, VectorX<Scalar>(-e.grad), eps_reg, forcing,
                                         prob.m(), prob.n(), d);
  if (!ok || !(d.dot(e.grad) < Scalar(0))) d = -e.grad;
  return d;
}

template <typename Scalar = double>
struct SsncgResult {
  MatrixX<Scalar> primal;
  VectorX<Scalar> y;
  long newton_iters = 0;
  bool truncated = false;
  Scalar grad_norm = std::numeric_limits<Scalar>::quiet_NaN();
};

// Newton loop with Armijo backtracking (slope 1e-4, factor 0.5, max 50) until
// ||grad Psi|| <= tol; optional accept predicate for relative-error schemes is
// checked at every iterate before the tolerance test.
template <typename Scalar>
SsncgResult<Scalar> solve_projection(
    const DualProjectionProblem<Scalar>& prob, const VectorX<Scalar>& y0, Scalar tol,
    long max_newton = 1000,
    const std::function<bool(const MatrixX<Scalar>&, Scalar)>& accept = nullptr) {
  const Index m = prob.m(), n = prob.n();
  SsncgResult<Scalar> res;
  VectorX<Scalar> y = project_onto_range(y0.size() == m + n ? y0 : VectorX<Scalar>::Zero(m + n),
                                         m, n);
  PsiEval<Scalar> e = psi_and_grad(prob, y);
  while (true) {
    res.grad_norm = e.grad.norm();
    if (accept && accept(e.primal, res.grad_norm)) break;
    if (res.grad_norm <= tol) break;
    if (res.newton_iters >= max_newton) {
      res.truncated = true;
      break;
    }

    const auto mask = ssncg_detail::make_active_mask(prob, y);
    const Scalar eps_reg = Scalar(1e-12) * (Scalar(1) + res.grad_norm);
    const Scalar forcing = std::min(Scalar(0.5), std::sqrt(res.grad_norm));
    VectorX<Scalar> d;
    const bool ok =
        ssncg_detail::cg_solve(mask, VectorX<Scalar>(-e.grad), eps_reg, forcing, m, n, d);
    if (!ok || !(d.dot(e.grad) < Scalar(0))) d = -e.grad;

    bool accepted = false;
    for (int pass = 0; pass < 2 && !accepted; ++pass) {
      Scalar slope = d.dot(e.grad);
      Scalar step = Scalar(1);
      for (int bt = 0; bt < 50; ++bt) {
        const VectorX<Scalar> y_trial = project_onto_range(VectorX<Scalar>(y + step * d), m, n);
        const PsiEval<Scalar> trial = psi_and_grad(prob, y_trial);
        if (trial.value <= e.value + Scalar(1e-4) * step * slope) {
          y = y_trial;
          e = trial;
          accepted = true;
          break;
        }
        step *= Scalar(0.5);
      }
      if (!accepted) d = -e.grad;  // retry once along steepest descent
    }
    if (!accepted) {
      res.truncated = true;  // no decrease possible at this accuracy
      break;
    }
    ++res.newton_iters;
  }
  res.primal = e.primal;
  res.y = y;
  return res;
}

// Euclidean projection of x onto {X >= 0 : Xe = a, X^T e = b} (cross-check path).
template <typename Scalar>
MatrixX<Scalar> project_to_polytope(const MatrixX<Scalar>& x, const VectorX<Scalar>& a,
                                    const VectorX<Scalar>& b, Scalar tol = Scalar(1e-10)) {
  DualProjectionProblem<Scalar> prob;
  prob.G = x;
  prob.c.resize(a.size() + b.size());
  prob.c << a, b;
  prob.gamma = Scalar(1);
  return solve_projection(prob, VectorX<Scalar>(), tol).primal;
}

}  // namespace bregman_ot
