#pragma once

#include "bregman_ot/types.hpp"

#include <cstdint>

namespace bregman_ot::bench {

// Gaussian-mixture instances: weights uniform on (0,1) and normalized, support
// points in R^3 with coordinates drawn from a five-component mixture, cost
// c_ij = ||p_i - q_j||^2 normalized so the maximal entry is 1.
struct GenConfig {
  Index m = 100;
  Index n = 100;
  std::uint64_t seed = 0;
  int num_components = 5;
  Vector means = (Vector(5) << -20, -10, 0, 10, 20).finished();
  double variance = 5.0;
  int support_dim = 3;
};

// Deterministic for a fixed seed (same build, same stream of draws).
OtInstance<double> generate(const GenConfig& cfg);

}  // namespace bregman_ot::bench
