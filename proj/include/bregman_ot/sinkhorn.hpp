#pragma once

#include "bregman_ot/kernels.hpp"
#include "bregman_ot/transport_polytope.hpp"
#include "bregman_ot/types.hpp"

#include <cmath>

namespace bregman_ot {

template <typename Scalar>
VectorX<Scalar> rowwise_log_sum_exp(const MatrixX<Scalar>& t) {
  const VectorX<Scalar> mx = t.rowwise().maxCoeff();
  return (mx.array() + (t.colwise() - mx).array().exp().rowwise().sum().log()).matrix();
}

template <typename Scalar>
VectorX<Scalar> colwise_log_sum_exp(const MatrixX<Scalar>& t) {
  const VectorX<Scalar> mx = t.colwise().maxCoeff().transpose();
  return (mx.array() +
          (t.rowwise() - mx.transpose()).array().exp().colwise().sum().transpose().log())
      .matrix();
}

enum class SinkhornStopMode { bregman_to_rounded, marginal_l2 };

template <typename Scalar = double>
struct SinkhornStop {
  SinkhornStopMode mode = SinkhornStopMode::marginal_l2;
  Scalar tol = Scalar(1e-8);
  long max_inner = 10000;
  int check_every = 10;  // cadence of the O(mn) rounding-based test
};

// Matrix-scaling state for the entropic-prox subproblem
//   min <M, X> + gamma sum x (log x - 1)  s.t.  X e = a, X^T e = b,
// with M = C - gamma log S and K = exp(-M/gamma), X = Diag(u) K Diag(v).
// In log-domain mode the state carries alpha = gamma log u, beta = gamma log v
// and never forms K.
template <typename Scalar = double>
struct SinkhornState {
  MatrixX<Scalar> M;
  Scalar gamma = 1;
  VectorX<Scalar> a, b;
  bool log_domain = false;

  MatrixX<Scalar> K;           // standard mode only
  VectorX<Scalar> u, v;        // standard mode scalings
  VectorX<Scalar> alpha, beta; // log-domain scalings, alpha = gamma log u

  Index rows() const { return M.rows(); }
  Index cols() const { return M.cols(); }

  // gamma log u / gamma log v, valid in either mode.
  VectorX<Scalar> log_scaling_u() const {
    return log_domain ? alpha : (gamma * u.array().log()).matrix();
  }
  VectorX<Scalar> log_scaling_v() const {
    return log_domain ? beta : (gamma * v.array().log()).matrix();
  }

  // log X = (-M + alpha e^T + e beta^T) / gamma
  MatrixX<Scalar> log_plan() const {
    MatrixX<Scalar> lp = -M;
    lp.colwise() += log_scaling_u();
    lp.rowwise() += log_scaling_v().transpose();
    lp /= gamma;
    return lp;
  }

  MatrixX<Scalar> plan() const {
    if (!log_domain) return u.asDiagonal() * K * v.asDiagonal();
    return log_plan().array().exp().matrix();
  }

  VectorX<Scalar> row_marginal() const {
    if (!log_domain) return (u.array() * (K * v).array()).matrix();
    return rowwise_log_sum_exp(log_plan()).array().exp().matrix();
  }

  // ||u . Kv - a||: the only residual left after a sweep (columns are exact).
  Scalar row_residual() const { return (row_marginal() - a).norm(); }
};

// state with M = C - gamma * log S given log S directly.
template <typename Scalar>
SinkhornState<Scalar> build_subproblem_log(const OtInstance<Scalar>& inst,
                                           const MatrixX<Scalar>& log_center, Scalar gamma,
                                           const VectorX<Scalar>* warm_log_u = nullptr,
                                           const VectorX<Scalar>* warm_log_v = nullptr,
                                           Scalar log_domain_threshold = Scalar(300)) {
  if (log_center.rows() != inst.rows() || log_center.cols() != inst.cols())
    throw std::invalid_argument("build_subproblem: prox center shape mismatch");
  if (!(gamma > Scalar(0))) throw std::invalid_argument("build_subproblem: gamma must be positive");

  SinkhornState<Scalar> st;
  st.M = inst.cost - gamma * log_center;
  st.gamma = gamma;
  st.a = inst.a;
  st.b = inst.b;
  // exp(-M/gamma) stays representable while max|M|/gamma <= threshold.
  st.log_domain = st.M.cwiseAbs().maxCoeff() / gamma > log_domain_threshold;

  const bool have_warm = warm_log_u && warm_log_v && warm_log_u->size() == inst.rows() &&
                         warm_log_v->size() == inst.cols();
  if (st.log_domain) {
    st.alpha = have_warm ? *warm_log_u : VectorX<Scalar>::Zero(inst.rows());
    st.beta = have_warm ? *warm_log_v : VectorX<Scalar>::Zero(inst.cols());
  } else {
    st.K = (-st.M / gamma).array().exp().matrix();
    st.u = VectorX<Scalar>::Ones(inst.rows());
    st.v = VectorX<Scalar>::Ones(inst.cols());
    if (have_warm) {
      const VectorX<Scalar> wu = (warm_log_u->array() / gamma).exp().matrix();
      const VectorX<Scalar> wv = (warm_log_v->array() / gamma).exp().matrix();
      if (wu.allFinite() && wv.allFinite() && (wu.array() > Scalar(0)).all() &&
          (wv.array() > Scalar(0)).all()) {
        st.u = wu;
        st.v = wv;
      }
    }
  }
  return st;
}

// S > 0 entrywise required; M = C - gamma log S, K = S .* exp(-C/gamma).
template <typename Scalar>
SinkhornState<Scalar> build_subproblem(const OtInstance<Scalar>& inst,
                                       const MatrixX<Scalar>& prox_center, Scalar gamma,
                                       const VectorX<Scalar>* warm_log_u = nullptr,
                                       const VectorX<Scalar>* warm_log_v = nullptr,
                                       Scalar log_domain_threshold = Scalar(300)) {
  if ((prox_center.array() <= Scalar(0)).any())
    throw std::invalid_argument("build_subproblem: prox center must be strictly positive");
  return build_subproblem_log(inst, prox_center.array().log().matrix().eval(), gamma,
                              warm_log_u, warm_log_v, log_domain_threshold);
}

// One balancing sweep: u = a ./ K v, then v = b ./ K^T u. Afterwards the
// column marginals are exact up to roundoff.
template <typename Scalar>
void log_domain_sweep(SinkhornState<Scalar>& st) {
  MatrixX<Scalar> lp = st.log_plan();
  st.alpha += st.gamma * (st.a.array().log() - rowwise_log_sum_exp(lp).array()).matrix();
  lp = st.log_plan();
  st.beta += st.gamma * (st.b.array().log() - colwise_log_sum_exp(lp).array()).matrix();
}

template <typename Scalar>
void sweep(SinkhornState<Scalar>& st) {
  if (st.log_domain) {
    log_domain_sweep(st);
    return;
  }
  st.u = (st.a.array() / (st.K * st.v).array()).matrix();
  st.v = (st.b.array() / (st.K.transpose() * st.u).array()).matrix();
  if (!st.u.allFinite() || !st.v.allFinite())
    throw std::runtime_error("sinkhorn sweep: scaling vector overflow, corrupted state");
}

template <typename Scalar = double>
struct SinkhornResult {
  MatrixX<Scalar> plan;
  MatrixX<Scalar> log_plan;
  VectorX<Scalar> u, v;
  VectorX<Scalar> log_u, log_v;  // gamma log u / gamma log v (subproblem duals)
  long inner_iters = 0;
  bool truncated = false;
  Scalar stop_value = std::numeric_limits<Scalar>::quiet_NaN();
};

// Sweeps until the stop test holds or max_inner is hit (truncation flag).
// marginal_l2 checks ||u . Kv - a|| every sweep; bregman_to_rounded checks
// D_phi(G(X), X) every stop.check_every sweeps.
template <typename Scalar>
SinkhornResult<Scalar> solve_inner(SinkhornState<Scalar>& st, const SinkhornStop<Scalar>& stop) {
  SinkhornResult<Scalar> res;
  const int cadence = std::max(1, stop.check_every);
  while (true) {
    if (res.inner_iters >= stop.max_inner) {
      res.truncated = true;
      break;
    }
    sweep(st);
    ++res.inner_iters;
    if (stop.mode == SinkhornStopMode::marginal_l2) {
      res.stop_value = st.row_residual();
      if (res.stop_value <= stop.tol) break;
    } else if (res.inner_iters % cadence == 0) {
      const MatrixX<Scalar> x = st.plan();
      const MatrixX<Scalar> lx = st.log_plan();
      const MatrixX<Scalar> gx = round_to_polytope(x, st.a, st.b);
      res.stop_value = entropic_divergence_given_log(gx, lx, x);
      if (res.stop_value <= stop.tol) break;
    }
  }
  res.plan = st.plan();
  res.log_plan = st.log_plan();
  res.log_u = st.log_scaling_u();
  res.log_v = st.log_scaling_v();
  if (st.log_domain) {
    res.u = (st.alpha.array() / st.gamma).exp().matrix();
    res.v = (st.beta.array() / st.gamma).exp().matrix();
  } else {
    res.u = st.u;
    res.v = st.v;
  }
  return res;
}

}  // namespace bregman_ot
