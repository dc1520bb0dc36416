#include "fkmc/matrix_ode.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "fkmc/errors.hpp"
#include "fkmc/linalg.hpp"
#include "test_util.hpp"

using namespace fkmc;
using fkmc_test::max_entry_diff;
using fkmc_test::random_hermitian;
using fkmc_test::random_matrix;
using fkmc_test::random_skew;

namespace {

/// Smooth random time-dependent coefficient built from three frozen matrices.
struct SmoothF {
  Matrix a, b, c;
  void operator()(double s, Matrix& out) const {
    out = a;
    out.add_scaled(b, cxd(std::sin(s), 0.0));
    out.add_scaled(c, cxd(std::cos(2.0 * s), 0.0));
  }
};

SmoothF smooth_hermitian(std::mt19937_64& gen, int d) {
  return SmoothF{random_hermitian(gen, d), random_hermitian(gen, d),
                 random_hermitian(gen, d)};
}

SmoothF smooth_general(std::mt19937_64& gen, int d) {
  return SmoothF{random_matrix(gen, d, 0.7), random_matrix(gen, d, 0.7),
                 random_matrix(gen, d, 0.7)};
}

}  // namespace

TEST_CASE("solve: trivial and constant coefficients") {
  MatrixOdeProblem zero{0.0, 2.0, 3,
                        [](double, Matrix& f) { f.set_zero(); }};
  auto sol = solve(zero, 16);
  CHECK(sol.y == Matrix::identity(3));
  CHECK(sol.norm_trace.size() == 17);

  const cxd c(-0.8, 0.3);
  MatrixOdeProblem constant{0.5, 1.7, 2, [c](double, Matrix& f) {
                              f.set_identity();
                              f *= c;
                            }};
  auto sc = solve(constant, 64);
  const cxd want = std::exp(c * cxd(1.2, 0.0));
  CHECK(std::abs(sc.y(0, 0) - want) < 1e-12);
  CHECK(std::abs(sc.y(0, 1)) == 0.0);
}

TEST_CASE("solve: skew-Hermitian coefficient gives a unitary flow") {
  std::mt19937_64 gen(31);
  SmoothF f{random_skew(gen, 3), random_skew(gen, 3), random_skew(gen, 3)};
  MatrixOdeProblem p{0.0, 1.0, 3, [&](double s, Matrix& out) { f(s, out); }};
  auto sol = solve(p, 1000);
  CHECK(unitarity_defect(sol.y) <= 1e-8);
  for (double nrm : sol.norm_trace) CHECK(nrm <= 1.0 + 1e-10);
}

TEST_CASE("solve: order-2 self-convergence on smooth F") {
  std::mt19937_64 gen(32);
  SmoothF f = smooth_general(gen, 3);
  MatrixOdeProblem p{0.0, 1.5, 3, [&](double s, Matrix& out) { f(s, out); }};
  Matrix ref = solve(p, 4096).y;
  const double e64 = operator_norm(solve(p, 64).y - ref);
  const double e128 = operator_norm(solve(p, 128).y - ref);
  CHECK(e64 / e128 > 3.0);
  CHECK(e64 / e128 < 5.0);
}

TEST_CASE("bound_check_a saturation and random Hermitian problems") {
  {
    MatrixOdeProblem p{0.0, 1.3, 2, [](double, Matrix& f) {
                         f.set_identity();
                         f *= cxd(-1.0, 0.0);
                       }};
    auto nb = bound_check_a(p, [](double) { return -1.0; }, 200);
    CHECK(std::abs(nb.lhs - std::exp(-1.3)) < 1e-10);
    CHECK(std::abs(nb.lhs - nb.rhs) < 1e-10);
  }
  {
    MatrixOdeProblem p{0.0, 0.9, 2, [](double, Matrix& f) {
                         f.set_zero();
                         f(0, 0) = -2.0;
                         f(1, 1) = -1.0;
                       }};
    auto nb = bound_check_a(p, [](double) { return -1.0; }, 200);
    CHECK(nb.lhs == doctest::Approx(std::exp(-0.9)).epsilon(1e-10));
    CHECK(nb.lhs <= nb.rhs * (1.0 + 1e-12));
  }
  {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 50; ++trial) {
      const int d = 2 + static_cast<int>(gen() % 3);
      SmoothF f = smooth_hermitian(gen, d);
      MatrixOdeProblem p{0.0, 1.0, d,
                         [&](double s, Matrix& out) { f(s, out); }};
      auto c = [&](double s) {
        Matrix m(d);
        f(s, m);
        return hermitian_eig_range(m).second;
      };
      auto nb = bound_check_a(p, c, 128);
      CHECK(nb.lhs <= nb.rhs * (1.0 + 1e-6));
    }
  }
  MatrixOdeProblem bad{0.0, 1.0, 2, [](double, Matrix& f) {
                         f.set_zero();
                         f(0, 1) = 1.0;
                       }};
  CHECK_THROWS_AS(bound_check_a(bad, [](double) { return 1.0; }, 8),
                  ValidationError);
}

TEST_CASE("bound_check_b: trivial, explicit and random pairs") {
  auto zero = [](double, Matrix& f) { f.set_zero(); };
  {
    auto db = bound_check_b(zero, zero, 2, 0.0, 1.0, 32);
    CHECK(db.diff == 0.0);
    CHECK(db.bound == 0.0);
  }
  {
    const double c = 0.7;
    auto f2 = [c](double, Matrix& f) {
      f.set_identity();
      f *= cxd(c, 0.0);
    };
    auto db = bound_check_b(zero, f2, 2, 0.0, 1.0, 256);
    CHECK(db.diff == doctest::Approx(std::exp(c) - 1.0).epsilon(1e-8));
    CHECK(db.diff <= db.bound * (1.0 + 1e-12));
  }
  {
    std::mt19937_64 gen(34);
    for (int trial = 0; trial < 50; ++trial) {
      SmoothF f1 = smooth_general(gen, 3);
      SmoothF f2 = smooth_general(gen, 3);
      auto db = bound_check_b([&](double s, Matrix& m) { f1(s, m); },
                              [&](double s, Matrix& m) { f2(s, m); }, 3, 0.0,
                              0.8, 128);
      CHECK(db.diff <= db.bound * (1.0 + 1e-9));
      if (db.bound > 0.0) CHECK(db.diff / db.bound < 1.0);
    }
  }
}

TEST_CASE("solutions of F and -F^H are mutual inverses") {
  std::mt19937_64 gen(35);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + static_cast<int>(gen() % 3);
    SmoothF f = smooth_general(gen, d);
    MatrixOdeProblem p{0.0, 1.0, d, [&](double s, Matrix& out) { f(s, out); }};
    MatrixOdeProblem padj{0.0, 1.0, d, [&](double s, Matrix& out) {
                            Matrix m(d);
                            f(s, m);
                            m.adjoint_into(out);
                            out *= cxd(-1.0, 0.0);
                          }};
    Matrix y = solve(p, 256).y;
    Matrix z = solve(padj, 256).y;
    CHECK(operator_norm(y * z.adjoint() - Matrix::identity(d)) < 1e-10);
  }
}

TEST_CASE("validation and numeric errors") {
  MatrixOdeProblem p{0.0, 1.0, 2, [](double, Matrix& f) {
                       f.set_zero();
                       f(0, 0) = std::numeric_limits<double>::infinity();
                     }};
  CHECK_THROWS_AS(solve(p, 4), NumericError);
  MatrixOdeProblem degenerate{1.0, 1.0, 2,
                              [](double, Matrix& f) { f.set_zero(); }};
  CHECK_THROWS_AS(solve(degenerate, 4), ValidationError);
}
