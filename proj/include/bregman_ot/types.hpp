#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bregman_ot {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

// One discrete optimal transport problem:
//   min <C, X>  s.t.  X e_n = a,  X^T e_m = b,  X >= 0.
template <typename Scalar = double>
struct OtInstance {
  MatrixX<Scalar> cost;  // m x n, entrywise nonnegative
  VectorX<Scalar> a;     // length m, strictly positive, sums to 1
  VectorX<Scalar> b;     // length n, strictly positive, sums to 1

  Index rows() const { return cost.rows(); }
  Index cols() const { return cost.cols(); }

  void validate() const {
    if (cost.rows() != a.size() || cost.cols() != b.size())
      throw std::invalid_argument("OtInstance: marginal lengths do not match the cost matrix");
    if (cost.size() == 0) throw std::invalid_argument("OtInstance: empty cost matrix");
    if ((cost.array() < Scalar(0)).any())
      throw std::invalid_argument("OtInstance: cost entries must be nonnegative");
    if ((a.array() <= Scalar(0)).any() || (b.array() <= Scalar(0)).any())
      throw std::invalid_argument("OtInstance: marginals must be strictly positive");
    if (std::abs(a.sum() - Scalar(1)) > Scalar(1e-12) || std::abs(b.sum() - Scalar(1)) > Scalar(1e-12))
      throw std::invalid_argument("OtInstance: marginals must sum to 1 within 1e-12");
  }
};

// Dual variables (f, g) of the OT problem with slack Z(f,g) = C - f e_n^T - e_m g^T.
template <typename Scalar = double>
struct DualPair {
  VectorX<Scalar> f;  // length m
  VectorX<Scalar> g;  // length n

  MatrixX<Scalar> slack(const MatrixX<Scalar>& cost) const {
    MatrixX<Scalar> z = cost;
    z.colwise() -= f;
    z.rowwise() -= g.transpose();
    return z;
  }
};

template <typename Scalar = double>
struct KktResidual {
  Scalar delta_p{};    // primal feasibility
  Scalar delta_d{};    // dual feasibility
  Scalar delta_c{};    // complementarity
  Scalar delta_kkt{};  // max of the three
};

enum class SolveStatus { converged, inner_cap, outer_cap };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::inner_cap: return "inner_cap";
    default: return "outer_cap";
  }
}

// One row per outer iteration. nfval is NaN (and left empty when serialized)
// unless a reference optimal value was supplied.
struct TraceRow {
  long outer = 0;
  long cum_inner = 0;
  double objective = 0;
  double nfval = std::numeric_limits<double>::quiet_NaN();
  double kkt = 0;
  double theta = 0;
  double gamma = 0;
  double wall_time_s = 0;
};

using SolveTrace = std::vector<TraceRow>;

}  // namespace bregman_ot
