#pragma once

#include "bregman_ot/core.hpp"
#include "bregman_ot/kernels.hpp"
#include "bregman_ot/sinkhorn.hpp"
#include "bregman_ot/ssncg.hpp"
#include "bregman_ot/transport_polytope.hpp"

#include <chrono>
#include <functional>

namespace bregman_ot {

// Inner tolerances tol(k) = max(upsilon/(k+1)^p, floor).
template <typename Scalar = double>
struct ToleranceSchedule {
  Scalar upsilon = Scalar(1);
  Scalar p = Scalar(1.1);
  Scalar floor = Scalar(1e-10);

  Scalar operator()(long k) const {
    return std::max(upsilon / std::pow(Scalar(k + 1), p), floor);
  }
};

enum class OuterMethod { ibppa, vibppa, hpe, bhpe };

template <typename Scalar = double>
struct OuterConfig {
  Scalar gamma = Scalar(1);             // constant proximal parameter
  ToleranceSchedule<Scalar> schedule{};
  Scalar kkt_tol = Scalar(1e-7);
  long max_outer = 50000;
  long max_inner_total = 1000;          // cumulative Newton steps / Sinkhorn sweeps
  Scalar pi = Scalar(0);                // estimate-sequence weight; <= 0 means gamma_0
  Scalar sigma = Scalar(0.5);           // HPE/BHPE relative-error constant, in [0, 1)

  SinkhornStopMode sinkhorn_stop = SinkhornStopMode::marginal_l2;
  int bregman_check_every = 10;
  Scalar log_domain_threshold = Scalar(300);

  std::function<Scalar(long)> gamma_schedule{};  // hook; constant gamma when empty
  double f_reference = std::numeric_limits<double>::quiet_NaN();  // enables the nfval column

  Scalar gamma_at(long k) const { return gamma_schedule ? gamma_schedule(k) : gamma; }

  static OuterConfig defaults_for(const BregmanKernel<Scalar>& kernel) {
    OuterConfig cfg;
    if (kernel.is_entropic()) {
      cfg.kkt_tol = Scalar(1e-5);
      cfg.max_inner_total = 10000;
    } else {
      cfg.kkt_tol = Scalar(1e-7);
      cfg.max_inner_total = 1000;
    }
    return cfg;
  }

  void validate() const {
    if (!(gamma > Scalar(0))) throw std::invalid_argument("OuterConfig: gamma must be positive");
    if (!(schedule.upsilon > Scalar(0)) || !(schedule.p > Scalar(0)))
      throw std::invalid_argument("OuterConfig: invalid tolerance schedule");
    if (!(sigma >= Scalar(0) && sigma < Scalar(1)))
      throw std::invalid_argument("OuterConfig: sigma must lie in [0, 1)");
    if (max_outer < 1 || max_inner_total < 1)
      throw std::invalid_argument("OuterConfig: iteration caps must be positive");
  }
};

// Prox iterate x^k (the raw inner output, possibly infeasible), its log for the
// entropic kernel, the current dual candidates and the warm-start carriers.
template <typename Scalar = double>
struct OuterState {
  MatrixX<Scalar> x;
  MatrixX<Scalar> log_x;  // entropic kernel only
  VectorX<Scalar> f, g;
  VectorX<Scalar> warm_log_u, warm_log_v;  // Sinkhorn warm start (gamma log u/v)
  VectorX<Scalar> warm_y;                  // SSNCG warm start
  long cum_inner = 0;
  bool inner_truncated = false;
  Scalar inner_tol = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar inner_value = std::numeric_limits<Scalar>::quiet_NaN();
  long inner_last = 0;
};

// x^0 = a b^T with zero duals.
template <typename Scalar>
OuterState<Scalar> make_initial_state(const OtInstance<Scalar>& inst) {
  OuterState<Scalar> st;
  st.x = inst.a * inst.b.transpose();
  st.log_x = inst.a.array().log().matrix().replicate(1, inst.cols());
  st.log_x.rowwise() += inst.b.array().log().matrix().transpose();
  st.f = VectorX<Scalar>::Zero(inst.rows());
  st.g = VectorX<Scalar>::Zero(inst.cols());
  return st;
}

// Estimate-sequence state of the accelerated variant; z is kept as exp(log_z)
// under the entropic kernel. tau1 is the adaptive quadrangle scaling constant.
template <typename Scalar = double>
struct AcceleratorState {
  MatrixX<Scalar> z;
  MatrixX<Scalar> log_z;
  Scalar c_k = Scalar(1);
  Scalar theta = Scalar(0);
  Scalar tau1 = Scalar(2);
};

template <typename Scalar>
AcceleratorState<Scalar> make_accelerator(const OuterState<Scalar>& st,
                                          const BregmanKernel<Scalar>& kernel) {
  AcceleratorState<Scalar> acc;
  acc.z = st.x;
  acc.log_z = st.log_x;
  acc.tau1 = kernel.qsc_tau1;
  return acc;
}

// Root of tau1 gamma_k theta^lambda = pi_ck (1 - theta) on (0, 1). Closed form
// for lambda in {1, 2}, safeguarded Newton-bisection otherwise; every branch is
// polished by Newton steps until the residual is at roundoff (<= 1e-13 when
// the coefficients permit).
template <typename Scalar>
Scalar solve_theta(Scalar tau1, Scalar gamma_k, Scalar pi_ck, Scalar lambda) {
  if (!(tau1 > Scalar(0)) || !(gamma_k > Scalar(0)) || !(pi_ck > Scalar(0)) ||
      !(lambda >= Scalar(1)))
    throw std::invalid_argument("solve_theta: arguments must be positive with lambda >= 1");
  const Scalar tg = tau1 * gamma_k;
  const Scalar q = pi_ck;

  Scalar theta;
  if (lambda == Scalar(2)) {
    theta = Scalar(2) * q / (q + std::sqrt(q * q + Scalar(4) * tg * q));
  } else if (lambda == Scalar(1)) {
    theta = q / (tg + q);
  } else {
    // residual is increasing from -q at 0 to tg at 1
    Scalar lo = Scalar(0), hi = Scalar(1);
    theta = Scalar(0.5);
    for (int it = 0; it < 200; ++it) {
      const Scalar r = tg * std::pow(theta, lambda) - q * (Scalar(1) - theta);
      if (r > Scalar(0))
        hi = theta;
      else
        lo = theta;
      const Scalar dr = lambda * tg * std::pow(theta, lambda - Scalar(1)) + q;
      Scalar next = theta - r / dr;
      if (!(next > lo && next < hi)) next = Scalar(0.5) * (lo + hi);
      if (std::abs(next - theta) <= Scalar(1e-16) * theta) {
        theta = next;
        break;
      }
      theta = next;
    }
  }
  for (int it = 0; it < 4; ++it) {
    const Scalar r = tg * std::pow(theta, lambda) - q * (Scalar(1) - theta);
    if (std::abs(r) <= Scalar(1e-13)) break;
    const Scalar dr = lambda * tg * std::pow(theta, lambda - Scalar(1)) + q;
    const Scalar next = theta - r / dr;
    if (!(next > Scalar(0) && next < Scalar(1))) break;
    theta = next;
  }
  return theta;
}

namespace outer_detail {

// log(theta z + (1-theta) x) elementwise from the logs, overflow-free.
template <typename Scalar>
MatrixX<Scalar> log_convex_combination(Scalar theta, const MatrixX<Scalar>& log_z,
                                       const MatrixX<Scalar>& log_x) {
  const Scalar lt = std::log(theta);
  const Scalar lo = std::log1p(-theta);
  MatrixX<Scalar> out(log_z.rows(), log_z.cols());
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) {
      const Scalar a1 = lt + log_z(i, j);
      const Scalar a2 = lo + log_x(i, j);
      const Scalar mx = std::max(a1, a2);
      const Scalar mn = std::min(a1, a2);
      out(i, j) = mx + std::log1p(std::exp(mn - mx));
    }
  }
  return out;
}

// Shared entropic inner solve at prox center exp(log_center); updates the
// iterate, duals (the subproblem multipliers gamma log u / gamma log v) and
// warm starts.
template <typename Scalar>
void entropic_inner(OuterState<Scalar>& st, const OtInstance<Scalar>& inst,
                    const OuterConfig<Scalar>& cfg, const MatrixX<Scalar>& log_center,
                    Scalar gamma_k, Scalar tol, long budget) {
  auto sink = build_subproblem_log(inst, log_center, gamma_k, &st.warm_log_u, &st.warm_log_v,
                                   cfg.log_domain_threshold);
  SinkhornStop<Scalar> stop;
  stop.mode = cfg.sinkhorn_stop;
  stop.tol = tol;
  stop.max_inner = budget;
  stop.check_every = cfg.bregman_check_every;
  const auto res = solve_inner(sink, stop);
  st.x = res.plan;
  st.log_x = res.log_plan;
  st.f = res.log_u;
  st.g = res.log_v;
  st.warm_log_u = res.log_u;
  st.warm_log_v = res.log_v;
  st.cum_inner += res.inner_iters;
  st.inner_last = res.inner_iters;
  st.inner_truncated = res.truncated;
  st.inner_value = res.stop_value;
}

// Shared quadratic inner solve at prox center S: projects G = S - C/gamma onto
// the polytope via SSNCG. Duals are gamma * y from the final dual iterate.
template <typename Scalar>
void quadratic_inner(OuterState<Scalar>& st, const OtInstance<Scalar>& inst,
                     const MatrixX<Scalar>& center, Scalar gamma_k, Scalar tol, long budget,
                     const std::function<bool(const MatrixX<Scalar>&, Scalar)>& accept = nullptr) {
  DualProjectionProblem<Scalar> prob;
  prob.G = center - inst.cost / gamma_k;
  prob.c.resize(inst.rows() + inst.cols());
  prob.c << inst.a, inst.b;
  prob.gamma = gamma_k;
  const auto res = solve_projection(prob, st.warm_y, tol, budget, accept);
  st.x = res.primal;
  st.f = gamma_k * res.y.head(inst.rows());
  st.g = gamma_k * res.y.tail(inst.cols());
  st.warm_y = res.y;
  st.cum_inner += res.newton_iters;
  st.inner_last = res.newton_iters;
  st.inner_truncated = res.truncated;
  st.inner_value = res.grad_norm;
}

}  // namespace outer_detail

// One iBPPA step (Algorithm 1): solve the prox subproblem at center x^k down to
// tol(k); the raw, possibly infeasible inner output becomes x^{k+1}.
template <typename Scalar>
void ibppa_step(OuterState<Scalar>& st, const OtInstance<Scalar>& inst,
                const BregmanKernel<Scalar>& kernel, const OuterConfig<Scalar>& cfg, long k) {
  const Scalar gamma_k = cfg.gamma_at(k);
  const Scalar tol = cfg.schedule(k);
  const long budget = cfg.max_inner_total - st.cum_inner;
  st.inner_tol = tol;
  if (kernel.is_entropic())
    outer_detail::entropic_inner(st, inst, cfg, st.log_x, gamma_k, tol, budget);
  else
    outer_detail::quadratic_inner(st, inst, st.x, gamma_k, tol, budget);
}

// One V-iBPPA step (Algorithm 2): theta_k from the scaling equation (with the
// tau1 doubling heuristic in the adaptive entropic mode), y^k = theta z + (1-theta) x,
// inner solve at y^k, then the closed-form mirror update of z.
template <typename Scalar>
void vibppa_step(OuterState<Scalar>& st, AcceleratorState<Scalar>& acc,
                 const OtInstance<Scalar>& inst, const BregmanKernel<Scalar>& kernel,
                 const OuterConfig<Scalar>& cfg, long k) {
  const Scalar gamma_k = cfg.gamma_at(k);
  const Scalar pi = cfg.pi > Scalar(0) ? cfg.pi : cfg.gamma_at(0);
  const Scalar tol = cfg.schedule(k);
  const long budget = cfg.max_inner_total - st.cum_inner;
  st.inner_tol = tol;

  Scalar theta = solve_theta(acc.tau1, gamma_k, pi * acc.c_k, kernel.qse_lambda);
  const bool adaptive = kernel.is_entropic() && kernel.qse_lambda == Scalar(2);
  if (adaptive && acc.tau1 * theta < Scalar(0.1)) {
    acc.tau1 *= Scalar(2);
    theta = solve_theta(acc.tau1, gamma_k, pi * acc.c_k, kernel.qse_lambda);
  }
  acc.theta = theta;
  const Scalar scale = Scalar(1) / (acc.tau1 * theta);

  if (kernel.is_entropic()) {
    const MatrixX<Scalar> log_y = outer_detail::log_convex_combination(theta, acc.log_z, st.log_x);
    outer_detail::entropic_inner(st, inst, cfg, log_y, gamma_k, tol, budget);
    // z^{k+1} = z^k .* (x^{k+1} ./ y^k)^{1/(tau1 theta)}, kept in the log domain
    acc.log_z += scale * (st.log_x - log_y);
    acc.z = acc.log_z.array().exp().matrix();
  } else {
    const MatrixX<Scalar> y = theta * acc.z + (Scalar(1) - theta) * st.x;
    outer_detail::quadratic_inner(st, inst, y, gamma_k, tol, budget);
    // z^{k+1} = z^k + (x^{k+1} - y^k)/(tau1 theta)
    acc.z += scale * (st.x - y);
  }
  acc.c_k *= (Scalar(1) - theta);
}

template <typename Scalar>
void bhpe_step(OuterState<Scalar>& st, const OtInstance<Scalar>& inst,
               const BregmanKernel<Scalar>& kernel, const OuterConfig<Scalar>& cfg, long k);

// HPE step (quadratic kernel): run SSNCG until the relative-error test
// ||grad Psi(y)|| <= sigma^2 ||G_Omega(X) - S||_F^2 holds (with the 1e-10
// absolute floor as a safeguard); the extragradient point equals X itself.
template <typename Scalar>
void hpe_step(OuterState<Scalar>& st, const OtInstance<Scalar>& inst,
              const BregmanKernel<Scalar>& kernel, const OuterConfig<Scalar>& cfg, long k) {
  if (kernel.is_entropic()) {
    bhpe_step(st, inst, kernel, cfg, k);
    return;
  }
  const Scalar gamma_k = cfg.gamma_at(k);
  const long budget = cfg.max_inner_total - st.cum_inner;
  const Scalar floor = cfg.schedule.floor;
  const MatrixX<Scalar> center = st.x;
  const Scalar sigma2 = cfg.sigma * cfg.sigma;
  st.inner_tol = std::numeric_limits<Scalar>::quiet_NaN();
  const std::function<bool(const MatrixX<Scalar>&, Scalar)> accept =
      [&](const MatrixX<Scalar>& primal, Scalar grad_norm) {
        if (grad_norm <= floor) return true;
        const MatrixX<Scalar> rounded = round_to_polytope(primal, inst.a, inst.b);
        return grad_norm <= sigma2 * (rounded - center).squaredNorm();
      };
  outer_detail::quadratic_inner(st, inst, center, gamma_k, floor, budget, accept);
}

// BHPE step (entropic kernel): sweep Sinkhorn until
// D_phi(G_Omega(X), X) <= sigma^2 D_phi(G_Omega(X), S), same floor safeguard.
template <typename Scalar>
void bhpe_step(OuterState<Scalar>& st, const OtInstance<Scalar>& inst,
               const BregmanKernel<Scalar>& kernel, const OuterConfig<Scalar>& cfg, long k) {
  if (!kernel.is_entropic()) {
    hpe_step(st, inst, kernel, cfg, k);
    return;
  }
  const Scalar gamma_k = cfg.gamma_at(k);
  const long budget = cfg.max_inner_total - st.cum_inner;
  const Scalar floor = cfg.schedule.floor;
  const Scalar sigma2 = cfg.sigma * cfg.sigma;
  const MatrixX<Scalar> center = st.x;
  const MatrixX<Scalar> log_center = st.log_x;
  st.inner_tol = std::numeric_limits<Scalar>::quiet_NaN();

  auto sink = build_subproblem_log(inst, log_center, gamma_k, &st.warm_log_u, &st.warm_log_v,
                                   cfg.log_domain_threshold);
  long iters = 0;
  bool truncated = false;
  Scalar lhs = std::numeric_limits<Scalar>::quiet_NaN();
  while (true) {
    if (iters >= budget) {
      truncated = true;
      break;
    }
    sweep(sink);
    ++iters;
    const MatrixX<Scalar> x = sink.plan();
    const MatrixX<Scalar> lx = sink.log_plan();
    const MatrixX<Scalar> gx = round_to_polytope(x, inst.a, inst.b);
    lhs = entropic_divergence_given_log(gx, lx, x);
    if (lhs <= floor) break;
    const Scalar rhs = entropic_divergence_given_log(gx, log_center, center);
    if (lhs <= sigma2 * rhs) break;
  }
  st.x = sink.plan();
  st.log_x = sink.log_plan();
  st.f = sink.log_scaling_u();
  st.g = sink.log_scaling_v();
  st.warm_log_u = st.f;
  st.warm_log_v = st.g;
  st.cum_inner += iters;
  st.inner_last = iters;
  st.inner_truncated = truncated;
  st.inner_value = lhs;
}

template <typename Scalar = double>
struct SolveResult {
  MatrixX<Scalar> plan;  // final rounded plan
  DualPair<Scalar> duals;
  SolveTrace trace;
  SolveStatus status = SolveStatus::outer_cap;
  long outer_iters = 0;
  long inner_iters = 0;
  double objective_final = 0;
  double kkt_final = 0;
};

// Full outer loop: steps until Delta_kkt(X^{k+1}, f^{k+1}, g^{k+1}) < kkt_tol,
// the outer cap, or the cumulative inner-iteration cap.
template <typename Scalar>
SolveResult<Scalar> run(const OtInstance<Scalar>& inst, OuterMethod method,
                        const BregmanKernel<Scalar>& kernel, const OuterConfig<Scalar>& cfg) {
  inst.validate();
  cfg.validate();

  OuterState<Scalar> st = make_initial_state(inst);
  AcceleratorState<Scalar> acc = make_accelerator(st, kernel);
  SolveResult<Scalar> out;
  const auto t0 = std::chrono::steady_clock::now();
  const bool has_ref = std::isfinite(cfg.f_reference);

  MatrixX<Scalar> rounded = round_to_polytope(st.x, inst.a, inst.b);
  for (long k = 0;; ++k) {
    if (k >= cfg.max_outer) {
      out.status = SolveStatus::outer_cap;
      break;
    }
    if (st.cum_inner >= cfg.max_inner_total) {
      out.status = SolveStatus::inner_cap;
      break;
    }

    Scalar theta_k = Scalar(0);
    switch (method) {
      case OuterMethod::ibppa:
        ibppa_step(st, inst, kernel, cfg, k);
        break;
      case OuterMethod::vibppa:
        vibppa_step(st, acc, inst, kernel, cfg, k);
        theta_k = acc.theta;
        break;
      case OuterMethod::hpe:
        hpe_step(st, inst, kernel, cfg, k);
        break;
      case OuterMethod::bhpe:
        bhpe_step(st, inst, kernel, cfg, k);
        break;
    }

    rounded = round_to_polytope(st.x, inst.a, inst.b);
    const double obj = static_cast<double>(objective(inst, rounded));
    const auto kkt = kkt_residual(inst, st.x, DualPair<Scalar>{st.f, st.g});
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    TraceRow row;
    row.outer = k + 1;
    row.cum_inner = st.cum_inner;
    row.objective = obj;
    if (has_ref)
      row.nfval = std::abs(obj - cfg.f_reference) / std::abs(cfg.f_reference);
    row.kkt = static_cast<double>(kkt.delta_kkt);
    row.theta = static_cast<double>(theta_k);
    row.gamma = static_cast<double>(cfg.gamma_at(k));
    row.wall_time_s = elapsed;
    out.trace.push_back(row);

    out.objective_final = obj;
    out.kkt_final = row.kkt;
    if (kkt.delta_kkt < cfg.kkt_tol) {
      out.status = SolveStatus::converged;
      break;
    }
    if (st.inner_truncated) {
      out.status = SolveStatus::inner_cap;
      break;
    }
  }

  if (out.trace.empty()) {
    out.objective_final = static_cast<double>(objective(inst, rounded));
    out.kkt_final = static_cast<double>(
        kkt_residual(inst, st.x, DualPair<Scalar>{st.f, st.g}).delta_kkt);
  }
  out.plan = rounded;
  out.duals = DualPair<Scalar>{st.f, st.g};
  out.outer_iters = static_cast<long>(out.trace.size());
  out.inner_iters = st.cum_inner;
  return out;
}

}  // namespace bregman_ot
