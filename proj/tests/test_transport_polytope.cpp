#include "bregman_ot/transport_polytope.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace bregman_ot;

TEST_CASE("marginal operator: zeros map to zeros") {
  const MarginalOperator<double> op{3, 4};
  CHECK(op.apply(Matrix::Zero(3, 4)).norm() == 0.0);
  CHECK(op.adjoint(Vector::Zero(7)).norm() == 0.0);
  CHECK_THROWS_AS(op.apply(Matrix::Zero(4, 3)), std::invalid_argument);
  CHECK_THROWS_AS(op.adjoint(Vector::Zero(6)), std::invalid_argument);
}

TEST_CASE("marginal operator: adjointness identity") {
  std::mt19937 rng(3);
  const MarginalOperator<double> op{3, 4};
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = test_util::random_matrix(rng, 3, 4);
    const Vector y = test_util::random_matrix(rng, 7, 1);
    const double lhs = op.apply(x).dot(y);
    const double rhs = (x.array() * op.adjoint(y).array()).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("rounding: feasible input is returned unchanged") {
  // dyadic data so the scaling factors are exactly 1
  const Vector a = Vector::Constant(2, 0.5);
  const Vector b = Vector::Constant(2, 0.5);
  const Matrix x = Matrix::Constant(2, 2, 0.25);
  CHECK((round_to_polytope(x, a, b) - x).norm() == 0.0);
}

TEST_CASE("rounding: hand-traced scaling case") {
  const Vector a = Vector::Constant(2, 0.5);
  const Vector b = Vector::Constant(2, 0.5);
  Matrix x(2, 2);
  x << 0.6, 0.0, 0.0, 0.6;
  Matrix expected(2, 2);
  expected << 0.5, 0.0, 0.0, 0.5;
  CHECK((round_to_polytope(x, a, b) - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("rounding: all-zero input maps to the product coupling") {
  const Vector a = Vector::Constant(2, 0.5);
  const Vector b = Vector::Constant(2, 0.5);
  const Matrix rounded = round_to_polytope(Matrix::Zero(2, 2), a, b);
  CHECK((rounded - Matrix::Constant(2, 2, 0.25)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("rounding: rejects bad input") {
  const Vector a = Vector::Constant(2, 0.5);
  CHECK_THROWS_AS(round_to_polytope(Matrix::Constant(2, 2, -0.1), a, a),
                  std::invalid_argument);
  CHECK_THROWS_AS(round_to_polytope(Matrix::Zero(3, 2), a, a), std::invalid_argument);
  Vector bad = a;
  bad[0] = 0.0;
  CHECK_THROWS_AS(round_to_polytope(Matrix::Zero(2, 2), bad, a), std::invalid_argument);
}

TEST_CASE("rounding: feasibility and the l1 distance bound on random inputs") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const Index m = 2 + trial % 5;
    const Index n = 2 + (trial / 5) % 5;
    const Vector a = test_util::random_probability_vector(rng, m);
    const Vector b = test_util::random_probability_vector(rng, n);
    Matrix x(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) x(i, j) = unif(rng) < 0.2 ? 0.0 : unif(rng) / double(m * n) * 4;

    const Matrix rounded = round_to_polytope(x, a, b);
    CHECK((rounded.rowwise().sum() - a).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((rounded.colwise().sum().transpose() - b).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(rounded.minCoeff() >= 0.0);

    const double moved = (x - rounded).cwiseAbs().sum();
    const double row_gap = (x.rowwise().sum() - a).cwiseAbs().sum();
    const double col_gap = (x.colwise().sum().transpose() - b).cwiseAbs().sum();
    CHECK(moved <= 2.0 * (row_gap + col_gap) + 1e-12);
  }
}

TEST_CASE("rounding: idempotent on the polytope") {
  std::mt19937 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = test_util::random_probability_vector(rng, 4);
    const Vector b = test_util::random_probability_vector(rng, 3);
    Matrix x = test_util::random_positive_matrix(rng, 4, 3);
    x = round_to_polytope(x, a, b);  // now feasible to roundoff
    const Matrix again = round_to_polytope(x, a, b);
    CHECK((again - x).cwiseAbs().maxCoeff() <= 1e-14);
  }

  // exactly feasible dyadic plan comes back bit-identical
  const Vector a = (Vector(2) << 0.25, 0.75).finished();
  Matrix x(2, 2);
  x << 0.125, 0.125, 0.375, 0.375;
  const Vector b = Vector::Constant(2, 0.5);
  const Matrix again = round_to_polytope(x, a, b);
  CHECK((again - x).norm() == 0.0);
}
