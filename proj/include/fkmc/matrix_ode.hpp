#pragma once

#include <functional>
#include <vector>

#include "fkmc/matrix.hpp"

namespace fkmc {

/// Initial value problem Y'(s) = Y(s) F(s), Y(t0) = 1.  F must be pointwise
/// evaluable; supply step functions with nodes aligned to discontinuities.
struct MatrixOdeProblem {
  double t0 = 0.0;
  double t1 = 0.0;
  int dim = 0;
  std::function<void(double, Matrix&)> rhs;  // writes F(s)
};

struct OdeSolution {
  Matrix y;                        // Y(t1)
  std::vector<double> norm_trace;  // |Y| at each node, steps+1 values
};

/// Exponential midpoint rule: Y_{k+1} = Y_k exp(dt F(s_k + dt/2)).  Order 2;
/// preserves unitarity for skew-Hermitian F and the Gronwall bounds below
/// factor by factor.
OdeSolution solve(const MatrixOdeProblem& problem, int steps);

/// Gronwall norm bound for Hermitian F(s) <= c(s):
/// returns (|Y(t1)|, exp(int c)) with the same midpoint quadrature.
struct NormBound {
  double lhs = 0.0;
  double rhs = 0.0;
};
NormBound bound_check_a(const MatrixOdeProblem& problem,
                        const std::function<double(double)>& c, int steps);

/// Two-solution difference bound:
/// |Y1 - Y2| <= exp(2 int |F1| + int |F2|) int |F1 - F2|.
struct DiffBound {
  double diff = 0.0;
  double bound = 0.0;
};
DiffBound bound_check_b(const std::function<void(double, Matrix&)>& f1,
                        const std::function<void(double, Matrix&)>& f2,
                        int dim, double t0, double t1, int steps);

}  // namespace fkmc
