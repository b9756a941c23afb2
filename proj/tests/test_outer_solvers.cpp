#include "bregman_ot/outer_solvers.hpp"

#include "bregman_ot/bench/lp_oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace bregman_ot;

namespace {

double theta_equation_residual(double tau1, double gamma, double pi_ck, double lambda,
                               double theta) {
  return tau1 * gamma * std::pow(theta, lambda) - pi_ck * (1.0 - theta);
}

OtInstance<double> tiny_instance(unsigned seed, Index m = 4, Index n = 4) {
  std::mt19937 rng(seed);
  return test_util::random_instance(rng, m, n);
}

}  // namespace

TEST_CASE("tolerance schedule: formula, floor and monotonicity") {
  ToleranceSchedule<double> sched{1e-3, 3.1, 1e-10};
  CHECK(sched(0) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(sched(1) == doctest::Approx(1e-3 / std::pow(2.0, 3.1)).epsilon(1e-14));
  CHECK(sched(1000000) == 1e-10);
  for (long k = 0; k < 200; ++k) CHECK(sched(k + 1) <= sched(k));
}

TEST_CASE("solve_theta: closed forms") {
  // tau1 gamma = 2, pi c_k = 1, lambda = 2: 2 theta^2 = 1 - theta
  CHECK(solve_theta(2.0, 1.0, 1.0, 2.0) == doctest::Approx(0.5).epsilon(1e-14));
  // lambda = 1 with tau1 gamma = q: theta = 1/2
  CHECK(solve_theta(1.0, 0.7, 0.7, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  // pi c_k -> 0 drives theta -> 0
  CHECK(solve_theta(2.0, 1.0, 1e-14, 2.0) < 1e-6);
  CHECK_THROWS_AS(solve_theta(0.0, 1.0, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_theta(1.0, 1.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("solve_theta: residual at roundoff across a parameter grid") {
  const std::vector<double> scales{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  for (double tg : scales)
    for (double q : scales)
      for (double lambda : {1.0, 1.5, 2.0}) {
        const double theta = solve_theta(tg, 1.0, q, lambda);
        CHECK(theta > 0.0);
        CHECK(theta < 1.0);
        CHECK(std::abs(theta_equation_residual(tg, 1.0, q, lambda, theta)) <= 1e-12);
      }
}

TEST_CASE("ibppa: a 1x1 instance converges in one outer iteration") {
  OtInstance<double> inst;
  inst.cost = Matrix::Constant(1, 1, 0.3);
  inst.a = Vector::Ones(1);
  inst.b = Vector::Ones(1);
  for (auto kernel : {BregmanKernel<double>::quadratic(), BregmanKernel<double>::entropic()}) {
    auto cfg = OuterConfig<double>::defaults_for(kernel);
    cfg.gamma = 0.5;
    cfg.schedule = {1e-3, 3.1, 1e-10};
    const auto res = run(inst, OuterMethod::ibppa, kernel, cfg);
    CHECK(res.status == SolveStatus::converged);
    CHECK(res.outer_iters == 1);
    CHECK(res.kkt_final <= 1e-10);
    CHECK(res.objective_final == doctest::Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("ibppa: zero cost is solved by the product coupling immediately") {
  std::mt19937 rng(5);
  auto inst = test_util::random_instance(rng, 3, 4);
  inst.cost.setZero();
  const auto kernel = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(kernel);
  cfg.gamma = 0.5;
  cfg.sinkhorn_stop = SinkhornStopMode::bregman_to_rounded;
  cfg.bregman_check_every = 1;

  OuterState<double> st = make_initial_state(inst);
  ibppa_step(st, inst, kernel, cfg, 0);
  CHECK(st.inner_value <= st.inner_tol);
  CHECK(objective(inst, st.x) == 0.0);
  CHECK((st.x - inst.a * inst.b.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ibppa: reaches the LP optimum on a 4x4 instance (both kernels)") {
  const auto inst = tiny_instance(11);
  const auto oracle = bench::lp_oracle(inst);
  for (auto kernel : {BregmanKernel<double>::quadratic(), BregmanKernel<double>::entropic()}) {
    auto cfg = OuterConfig<double>::defaults_for(kernel);
    cfg.gamma = 0.1;
    cfg.schedule = {1e-3, 3.1, 1e-10};
    cfg.max_outer = 200;
    cfg.max_inner_total = 200000;
    const auto res = run(inst, OuterMethod::ibppa, kernel, cfg);
    CHECK(res.status == SolveStatus::converged);
    CHECK(std::abs(res.objective_final - oracle.value) <= 1e-6 * (1.0 + std::abs(oracle.value)));
  }
}

TEST_CASE("ibppa: inexact-condition certificates per accepted step") {
  const auto inst = tiny_instance(13);
  const auto ent = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(ent);
  cfg.gamma = 0.2;
  cfg.schedule = {1e-2, 2.1, 1e-10};
  cfg.sinkhorn_stop = SinkhornStopMode::bregman_to_rounded;
  cfg.bregman_check_every = 1;
  cfg.max_inner_total = 100000;
  OuterState<double> st = make_initial_state(inst);
  for (long k = 0; k < 5; ++k) {
    ibppa_step(st, inst, ent, cfg, k);
    CHECK(st.inner_value <= st.inner_tol);
    CHECK(st.x.minCoeff() > 0.0);  // Sinkhorn iterates stay interior
  }

  const auto quad = BregmanKernel<double>::quadratic();
  auto qcfg = OuterConfig<double>::defaults_for(quad);
  qcfg.gamma = 0.5;
  qcfg.schedule = {1e-2, 2.1, 1e-10};
  OuterState<double> qs = make_initial_state(inst);
  for (long k = 0; k < 5; ++k) {
    ibppa_step(qs, inst, quad, qcfg, k);
    CHECK(qs.inner_value <= qs.inner_tol);  // ||grad Psi|| at return
  }
}

TEST_CASE("vibppa: theta_0 = 1/2 under the balanced default weights") {
  const auto inst = tiny_instance(17);
  const auto quad = BregmanKernel<double>::quadratic();
  auto cfg = OuterConfig<double>::defaults_for(quad);
  cfg.gamma = 0.7;  // pi defaults to gamma_0, tau1 = lambda = 2
  cfg.schedule = {1e-2, 2.1, 1e-10};
  OuterState<double> st = make_initial_state(inst);
  auto acc = make_accelerator(st, quad);
  vibppa_step(st, acc, inst, quad, cfg, 0);
  CHECK(acc.theta == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(acc.c_k == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("vibppa: z is a fixed point when the subproblem solution equals y") {
  std::mt19937 rng(19);
  auto inst = test_util::random_instance(rng, 3, 3);
  inst.cost.setZero();  // X^0 = a b^T is optimal, so x^{k+1} = y^k
  const auto ent = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(ent);
  cfg.gamma = 0.5;
  cfg.schedule = {1e-6, 3.1, 1e-10};
  OuterState<double> st = make_initial_state(inst);
  auto acc = make_accelerator(st, ent);
  const Matrix z_before = acc.z;
  vibppa_step(st, acc, inst, ent, cfg, 0);
  CHECK((acc.z - z_before).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("vibppa: mirror-update identity for both kernels") {
  const auto inst = tiny_instance(23);
  for (auto kernel : {BregmanKernel<double>::quadratic(), BregmanKernel<double>::entropic()}) {
    auto cfg = OuterConfig<double>::defaults_for(kernel);
    cfg.gamma = 0.4;
    cfg.schedule = {1e-4, 3.1, 1e-10};
    cfg.max_inner_total = 100000;
    OuterState<double> st = make_initial_state(inst);
    auto acc = make_accelerator(st, kernel);
    for (long k = 0; k < 3; ++k) {
      const Matrix x_old = st.x;
      const Matrix z_old = acc.z;
      vibppa_step(st, acc, inst, kernel, cfg, k);
      const Matrix y = acc.theta * z_old + (1.0 - acc.theta) * x_old;
      const Matrix lhs = kernel.grad(acc.z) - kernel.grad(z_old);
      const Matrix rhs = (kernel.grad(st.x) - kernel.grad(y)) / (acc.tau1 * acc.theta);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("vibppa: c_k is strictly decreasing in (0, 1] and tau1 only grows") {
  const auto inst = tiny_instance(29);
  const auto ent = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(ent);
  cfg.gamma = 0.3;
  cfg.schedule = {1e-2, 1.1, 1e-10};
  cfg.max_inner_total = 1000000;
  OuterState<double> st = make_initial_state(inst);
  auto acc = make_accelerator(st, ent);
  double c_prev = acc.c_k;
  double tau_prev = acc.tau1;
  CHECK(c_prev == 1.0);
  for (long k = 0; k < 25; ++k) {
    vibppa_step(st, acc, inst, ent, cfg, k);
    CHECK(acc.c_k > 0.0);
    CHECK(acc.c_k < c_prev);
    CHECK(acc.tau1 >= tau_prev);
    CHECK(acc.tau1 * acc.theta >= 0.1);  // the doubling heuristic keeps this away from 0
    c_prev = acc.c_k;
    tau_prev = acc.tau1;
  }
}

TEST_CASE("hpe/bhpe: loose sigma accepts the first checked iterate") {
  std::mt19937 rng(31);
  auto inst = test_util::random_instance(rng, 4, 4);
  const auto ent = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(ent);
  cfg.gamma = 1.0;
  cfg.sigma = 0.999;
  OuterState<double> st = make_initial_state(inst);
  bhpe_step(st, inst, ent, cfg, 0);
  CHECK(st.inner_last == 1);
}

TEST_CASE("bhpe: an exactly feasible subproblem solution passes for any sigma") {
  std::mt19937 rng(37);
  auto inst = test_util::random_instance(rng, 3, 3);
  inst.cost.setZero();  // one sweep from ab^T lands on the polytope
  const auto ent = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(ent);
  cfg.gamma = 0.5;
  cfg.sigma = 0.0;
  OuterState<double> st = make_initial_state(inst);
  bhpe_step(st, inst, ent, cfg, 0);
  CHECK(st.inner_last == 1);
  CHECK(st.inner_value <= 1e-10);
}

TEST_CASE("run: trivial termination modes") {
  const auto inst = tiny_instance(41);
  const auto quad = BregmanKernel<double>::quadratic();
  auto cfg = OuterConfig<double>::defaults_for(quad);
  cfg.kkt_tol = 1e9;
  const auto res = run(inst, OuterMethod::ibppa, quad, cfg);
  CHECK(res.status == SolveStatus::converged);
  CHECK(res.outer_iters == 1);

  auto capped = OuterConfig<double>::defaults_for(quad);
  capped.max_outer = 2;
  capped.kkt_tol = 1e-13;
  const auto res2 = run(inst, OuterMethod::ibppa, quad, capped);
  CHECK(res2.status == SolveStatus::outer_cap);
  CHECK(res2.outer_iters == 2);

  auto inner = OuterConfig<double>::defaults_for(quad);
  inner.max_inner_total = 3;
  inner.kkt_tol = 1e-13;
  const auto res3 = run(inst, OuterMethod::ibppa, quad, inner);
  CHECK(res3.status == SolveStatus::inner_cap);
  CHECK(res3.inner_iters <= 3);

  OuterConfig<double> bad = cfg;
  bad.sigma = 1.0;
  CHECK_THROWS_AS(run(inst, OuterMethod::hpe, quad, bad), std::invalid_argument);
}

TEST_CASE("run: every method agrees with the LP oracle on a 4x4 instance") {
  const auto inst = tiny_instance(43);
  const auto oracle = bench::lp_oracle(inst);
  for (auto kernel : {BregmanKernel<double>::quadratic(), BregmanKernel<double>::entropic()}) {
    for (auto method :
         {OuterMethod::ibppa, OuterMethod::vibppa, OuterMethod::hpe, OuterMethod::bhpe}) {
      auto cfg = OuterConfig<double>::defaults_for(kernel);
      cfg.gamma = kernel.is_entropic() ? 0.05 : 0.1;
      cfg.schedule = {1e-3, 3.1, 1e-10};
      cfg.kkt_tol = 1e-7;
      cfg.sigma = 0.5;
      cfg.max_outer = 5000;
      cfg.max_inner_total = 1000000;
      const auto res = run(inst, method, kernel, cfg);
      CHECK(res.status == SolveStatus::converged);
      CHECK(res.kkt_final < cfg.kkt_tol);
      CHECK(std::abs(res.objective_final - oracle.value) <=
            1e-6 * (1.0 + std::abs(oracle.value)));
    }
  }
}

TEST_CASE("run: ibppa and vibppa agree in objective under the same kernel") {
  const auto inst = tiny_instance(47, 6, 5);
  for (auto kernel : {BregmanKernel<double>::quadratic(), BregmanKernel<double>::entropic()}) {
    auto cfg = OuterConfig<double>::defaults_for(kernel);
    cfg.gamma = kernel.is_entropic() ? 0.1 : 0.5;
    cfg.schedule = {1e-3, 3.1, 1e-10};
    cfg.max_outer = 10000;
    cfg.max_inner_total = 1000000;
    const auto plain = run(inst, OuterMethod::ibppa, kernel, cfg);
    const auto accel = run(inst, OuterMethod::vibppa, kernel, cfg);
    CHECK(plain.status == SolveStatus::converged);
    CHECK(accel.status == SolveStatus::converged);
    CHECK(std::abs(plain.objective_final - accel.objective_final) <=
          10.0 * cfg.kkt_tol * (1.0 + std::abs(plain.objective_final)));
  }
}

TEST_CASE("run: rounded objective is non-increasing after a grace window") {
  const auto inst = tiny_instance(53, 8, 8);
  const auto quad = BregmanKernel<double>::quadratic();
  auto cfg = OuterConfig<double>::defaults_for(quad);
  cfg.gamma = 0.5;
  cfg.schedule = {1e-3, 3.1, 1e-10};
  cfg.max_inner_total = 100000;
  cfg.max_outer = 400;
  const auto res = run(inst, OuterMethod::ibppa, quad, cfg);
  for (std::size_t k = 5; k + 1 < res.trace.size(); ++k)
    CHECK(res.trace[k + 1].objective <= res.trace[k].objective + 1e-12);
}

TEST_CASE("run: trace bookkeeping and the gamma hook") {
  const auto inst = tiny_instance(59);
  const auto ent = BregmanKernel<double>::entropic();
  auto cfg = OuterConfig<double>::defaults_for(ent);
  cfg.gamma = 0.2;
  cfg.max_outer = 8;
  cfg.kkt_tol = 1e-13;
  cfg.max_inner_total = 100000;
  cfg.gamma_schedule = [](long k) { return 0.2 / std::sqrt(double(k + 1)); };
  const auto res = run(inst, OuterMethod::ibppa, ent, cfg);
  REQUIRE(res.trace.size() == 8);
  for (std::size_t k = 0; k < res.trace.size(); ++k) {
    CHECK(res.trace[k].outer == long(k) + 1);
    CHECK(res.trace[k].gamma == doctest::Approx(0.2 / std::sqrt(double(k + 1))).epsilon(1e-15));
    if (k > 0) CHECK(res.trace[k].cum_inner >= res.trace[k - 1].cum_inner);
    CHECK(!std::isfinite(res.trace[k].nfval));  // no reference supplied
  }
}
