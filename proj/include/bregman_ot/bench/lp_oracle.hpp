#pragma once

#include "bregman_ot/types.hpp"

namespace bregman_ot::bench {

struct OracleSolution {
  double value = 0;
  Matrix plan;
  Vector f, g;  // complementary duals from the optimal basis
};

// Exact LP optimum of the transportation problem. Tiny instances (m*n <= 25)
// are solved by enumerating all spanning-tree bases; instances with
// m + n <= 64 go through a Bland-rule transportation simplex. Larger inputs
// are rejected.
OracleSolution lp_oracle(const OtInstance<double>& inst);

// Both paths, exposed for cross-checks.
OracleSolution lp_oracle_enumerate(const OtInstance<double>& inst);
OracleSolution lp_oracle_simplex(const OtInstance<double>& inst);

}  // namespace bregman_ot::bench
