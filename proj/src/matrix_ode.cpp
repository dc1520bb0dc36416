#include "fkmc/matrix_ode.hpp"

#include <cmath>

#include "fkmc/errors.hpp"
#include "fkmc/linalg.hpp"

namespace fkmc {

namespace {
void validate(const MatrixOdeProblem& p, int steps) {
  if (p.dim < 1) throw ValidationError("matrix ode: dim must be >= 1");
  if (!(p.t1 > p.t0) || !std::isfinite(p.t0) || !std::isfinite(p.t1))
    throw ValidationError("matrix ode: need finite t1 > t0");
  if (steps < 1) throw ValidationError("matrix ode: steps must be >= 1");
  if (!p.rhs) throw ValidationError("matrix ode: missing rhs evaluator");
}
}  // namespace

OdeSolution solve(const MatrixOdeProblem& problem, int steps) {
  validate(problem, steps);
  const double dt = (problem.t1 - problem.t0) / steps;
  OdeSolution out;
  out.y = Matrix::identity(problem.dim);
  out.norm_trace.reserve(steps + 1);
  out.norm_trace.push_back(1.0);
  Matrix f(problem.dim), factor(problem.dim), tmp(problem.dim);
  for (int k = 0; k < steps; ++k) {
    const double mid = problem.t0 + (k + 0.5) * dt;
    problem.rhs(mid, f);
    if (!f.all_finite())
      throw NumericError("matrix ode: non-finite F(s)", k);
    f *= cxd(dt, 0.0);
    matrix_exp_into(f, factor);
    Matrix::mul(out.y, factor, tmp);
    std::swap(out.y, tmp);
    if (!out.y.all_finite())
      throw NumericError("matrix ode: non-finite solution", k);
    out.norm_trace.push_back(operator_norm(out.y));
  }
  return out;
}

NormBound bound_check_a(const MatrixOdeProblem& problem,
                        const std::function<double(double)>& c, int steps) {
  validate(problem, steps);
  const double dt = (problem.t1 - problem.t0) / steps;
  Matrix f(problem.dim);
  double c_int = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double mid = problem.t0 + (k + 0.5) * dt;
    problem.rhs(mid, f);
    if (hermitian_defect(f) > kStructureTol)
      throw ValidationError("bound_check_a: F(s) not Hermitian");
    c_int += c(mid) * dt;
  }
  NormBound out;
  out.lhs = solve(problem, steps).norm_trace.back();
  out.rhs = std::exp(c_int);
  return out;
}

DiffBound bound_check_b(const std::function<void(double, Matrix&)>& f1,
                        const std::function<void(double, Matrix&)>& f2,
                        int dim, double t0, double t1, int steps) {
  MatrixOdeProblem p1{t0, t1, dim, f1};
  MatrixOdeProblem p2{t0, t1, dim, f2};
  validate(p1, steps);
  validate(p2, steps);
  const double dt = (t1 - t0) / steps;
  Matrix a(dim), b(dim);
  double n1 = 0.0, n2 = 0.0, nd = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double mid = t0 + (k + 0.5) * dt;
    f1(mid, a);
    f2(mid, b);
    n1 += operator_norm(a) * dt;
    n2 += operator_norm(b) * dt;
    nd += operator_norm(a - b) * dt;
  }
  DiffBound out;
  out.diff = operator_norm(solve(p1, steps).y - solve(p2, steps).y);
  out.bound = std::exp(2.0 * n1 + n2) * nd;
  return out;
}

}  // namespace fkmc
