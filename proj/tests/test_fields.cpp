#include "fkmc/fields.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fkmc/errors.hpp"
#include "fkmc/paths.hpp"
#include "test_util.hpp"

using namespace fkmc;
using fkmc_test::max_entry_diff;

namespace {

std::vector<double> random_point(std::mt19937_64& gen, int n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> x(n);
  for (auto& v : x) v = d(gen);
  return x;
}

Matrix su2_constant() {
  Matrix a(2);
  a(0, 0) = cxd(0.0, 0.3);
  a(1, 1) = cxd(0.0, -0.3);
  a(0, 1) = cxd(0.5, 0.8);
  a(1, 0) = cxd(-0.5, 0.8);
  return a;  // i(0.8 s1 + 0.5 s2 + 0.3 s3)
}

}  // namespace

TEST_CASE("gauge presets evaluate to skew-Hermitian components") {
  const double x1[1] = {0.7};
  {
    auto g = make_zero_gauge(2, 3);
    const double x[2] = {0.1, -0.4};
    auto a = evaluate_gauge(g, {x, 2});
    CHECK(a.size() == 2);
    CHECK(a[0].max_abs() == 0.0);
    CHECK(a[1].max_abs() == 0.0);
  }
  {
    auto g = make_scalar_magnetic({2.0});
    auto a = evaluate_gauge(g, {x1, 1});
    CHECK(a[0].dim() == 1);
    CHECK(a[0](0, 0) == cxd(0.0, 2.0));
  }
  {
    auto g = make_pauli_like({1.5, -0.5}, 3);
    const double x[2] = {0.0, 1.0};
    auto a = evaluate_gauge(g, {x, 2});
    CHECK(a[0](2, 2) == cxd(0.0, 1.5));
    CHECK(a[1](0, 0) == cxd(0.0, -0.5));
    CHECK(a[0](0, 1) == cxd(0.0, 0.0));
  }
  {
    auto g = make_su2_rotation(0.9, {1.3});
    const double y1[1] = {-0.2}, y2[1] = {0.55};
    auto a1 = evaluate_gauge(g, {y1, 1});
    auto a2 = evaluate_gauge(g, {y2, 1});
    CHECK(max_entry_diff(a1[0], a2[0]) > 1e-3);
    CHECK(skew_defect(a1[0]) <= 1e-12);
    CHECK(skew_defect(a2[0]) <= 1e-12);
  }
  {
    Matrix bad(2);
    bad(0, 1) = 1.0;  // not skew
    CHECK_THROWS_AS(make_constant_gauge({bad}), ValidationError);
  }
}

TEST_CASE("all presets satisfy the structure invariants at random points") {
  std::mt19937_64 gen(42);
  std::vector<GaugeField> gauges;
  gauges.push_back(make_zero_gauge(2, 2));
  gauges.push_back(make_constant_gauge({su2_constant(), su2_constant()}));
  gauges.push_back(make_pauli_like({0.4, -1.1}, 2));
  gauges.push_back(make_su2_rotation(0.7, {0.9, -0.3}));
  Matrix vc(2);
  vc(0, 0) = 1.0;
  vc(1, 1) = 3.0;
  vc(0, 1) = cxd(0.2, -0.1);
  vc(1, 0) = cxd(0.2, 0.1);
  std::vector<Potential> pots;
  pots.push_back(make_zero_potential(2, 2));
  pots.push_back(make_constant_potential(2, vc));
  pots.push_back(make_diagonal_polynomial_well(2, {1.0, 0.5}, {0.0, 0.25}));

  std::vector<Matrix> comps(2, Matrix(2));
  Matrix v(2);
  for (int i = 0; i < 1000; ++i) {
    auto x = random_point(gen, 2, 2.0);
    for (const auto& g : gauges) {
      g.evaluate_into(x, comps);
      for (const auto& m : comps) CHECK(skew_defect(m) <= 1e-10);
    }
    for (const auto& p : pots) {
      p.evaluate_into(x, v);
      CHECK(hermitian_defect(v) <= 1e-10);
    }
  }
}

TEST_CASE("potential evaluation, wells and clipping") {
  {
    Matrix c(2);
    c(0, 0) = 1.0;
    c(1, 1) = 3.0;
    auto p = make_constant_potential(1, c);
    const double x[1] = {123.0};
    CHECK(max_entry_diff(evaluate_potential(p, {x, 1}), c) == 0.0);
  }
  {
    auto p = make_diagonal_polynomial_well(2, {1.0, 1.0}, {0.0, 0.0});
    const double x[2] = {1.0, 1.0};
    Matrix v = evaluate_potential(p, {x, 2});
    CHECK(v(0, 0) == cxd(2.0, 0.0));
    CHECK(v(1, 1) == cxd(2.0, 0.0));
  }
  {
    // Coulomb-like |x|^{-1} I with clipping at the singularity.
    Potential p;
    p.space_dim = 3;
    p.fiber_dim = 2;
    p.policy = SingularPolicy::clip;
    p.clip_max_norm = 1e6;
    p.evaluator = [](std::span<const double> x, Matrix& out) {
      double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      out.set_identity();
      out *= cxd(1.0 / r, 0.0);
    };
    const double origin[3] = {0.0, 0.0, 0.0};
    Matrix v = evaluate_potential(p, {origin, 3});
    CHECK(v(0, 0) == cxd(1e6, 0.0));
    CHECK(v(0, 1) == cxd(0.0, 0.0));
    const double near[3] = {1e-9, 0.0, 0.0};
    CHECK(evaluate_potential(p, {near, 3})(0, 0).real() ==
          doctest::Approx(1e6));

    p.policy = SingularPolicy::reject;
    CHECK_THROWS_AS(evaluate_potential(p, {origin, 3}), SampleError);
  }
  {
    Matrix indef(1);
    indef(0, 0) = -1.0;
    auto p = make_constant_potential(1, indef, true);
    const double x[1] = {0.0};
    CHECK_THROWS_AS(evaluate_potential(p, {x, 1}), DomainError);
    auto ok = make_constant_potential(1, indef, false);
    CHECK(evaluate_potential(ok, {x, 1})(0, 0) == cxd(-1.0, 0.0));
  }
}

TEST_CASE("divergence: analytic, linear and finite-difference agreement") {
  {
    auto g = make_constant_gauge({su2_constant()});
    const double x[1] = {0.33};
    CHECK(evaluate_divergence(g, {x, 1}).max_abs() == 0.0);
  }
  {
    // alpha_1(x) = i x_1 (d=1, n=1): divergence is i.
    GaugeField g;
    g.space_dim = 1;
    g.fiber_dim = 1;
    g.mode = DerivativeMode::finite_difference;
    g.components = [](std::span<const double> x, std::span<Matrix> out) {
      out[0](0, 0) = cxd(0.0, x[0]);
    };
    const double x[1] = {0.8};
    Matrix div = evaluate_divergence(g, {x, 1});
    CHECK(std::abs(div(0, 0) - cxd(0.0, 1.0)) < 1e-9);
  }
  {
    // su2_rotation: finite differences converge to the analytic value at
    // second order (Richardson in h).
    auto g = make_su2_rotation(0.8, {1.1, -0.7});
    const double x[2] = {0.3, -0.6};
    Matrix exact = evaluate_divergence(g, {x, 2});
    GaugeField fd = g;
    fd.mode = DerivativeMode::finite_difference;
    fd.fd_step = 1e-3;
    Matrix d1 = evaluate_divergence(fd, {x, 2});
    fd.fd_step = 5e-4;
    Matrix d2 = evaluate_divergence(fd, {x, 2});
    const double e1 = operator_norm(d1 - exact);
    const double e2 = operator_norm(d2 - exact);
    CHECK(e1 < 1e-5);
    CHECK(e1 / e2 > 3.0);  // ~4 expected for an O(h^2) stencil
    CHECK(e1 / e2 < 5.0);
  }
  {
    auto g = make_constant_gauge({su2_constant()});
    g.mode = DerivativeMode::none;
    const double x[1] = {0.0};
    CHECK_THROWS_AS(evaluate_divergence(g, {x, 1}), UnsupportedError);
  }
}

TEST_CASE("tabulated grid round trip and interpolation") {
  // Tabulate V(x,y) = diag(x^2 + y^2) on a 2-d lattice (d=1), compare the
  // interpolant against the function at interior points.
  std::ostringstream table;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const double x = -1.0 + 0.2 * i, y = -1.0 + 0.2 * j;
      table << x << " " << y << " " << (x * x + y * y) << " 0\n";
    }
  }
  std::istringstream in(table.str());
  auto grid = std::make_shared<TabulatedGrid>(TabulatedGrid::read(in, 2, 1));
  auto p = make_tabulated_potential(grid, 1);
  const double probe[2] = {0.37, -0.51};
  Matrix v = evaluate_potential(p, {probe, 2});
  const double want = probe[0] * probe[0] + probe[1] * probe[1];
  CHECK(v(0, 0).real() == doctest::Approx(want).epsilon(0.05));
  // Exact at lattice nodes.
  const double node[2] = {0.2, 0.4};
  CHECK(evaluate_potential(p, {node, 2})(0, 0).real() ==
        doctest::Approx(0.2).epsilon(1e-12));
  // Clamped outside the box.
  const double outside[2] = {5.0, 0.0};
  CHECK(evaluate_potential(p, {outside, 2})(0, 0).real() ==
        doctest::Approx(1.0).epsilon(1e-12));

  std::istringstream broken("0 0 1 0\n1 0 1 0\n");
  CHECK_THROWS_AS(TabulatedGrid::read(broken, 2, 1), ValidationError);
}

TEST_CASE("kato_diagnostic exact cases") {
  std::vector<std::vector<double>> probes = {{0.0}, {1.0}};
  {
    auto vz = make_zero_potential(1, 2);
    auto r = kato_diagnostic(vz, probes, 0.5, 64, 16, 7);
    CHECK(r.sup_estimate == 0.0);
    for (auto& [mean, se] : r.per_probe) {
      CHECK(mean == 0.0);
      CHECK(se == 0.0);
    }
  }
  {
    Matrix c = Matrix::identity(2);
    c *= 3.0;
    auto vc = make_constant_potential(1, c);
    const double t = 0.25;
    auto r = kato_diagnostic(vc, probes, t, 64, 16, 7);
    for (auto& [mean, se] : r.per_probe) {
      CHECK(mean == doctest::Approx(3.0 * t).epsilon(1e-12));
      CHECK(se == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("kato_diagnostic determinism and monotonicity in t") {
  auto well = make_diagonal_polynomial_well(2, {1.0, 0.5}, {0.1, 0.0});
  std::vector<std::vector<double>> probes = {{0.0, 0.0}, {0.8, -0.3}};
  auto a = kato_diagnostic(well, probes, 0.3, 512, 32, 99);
  auto b = kato_diagnostic(well, probes, 0.3, 512, 32, 99);
  CHECK(a.sup_estimate == b.sup_estimate);
  for (size_t i = 0; i < a.per_probe.size(); ++i) {
    CHECK(a.per_probe[i].first == b.per_probe[i].first);
    CHECK(a.per_probe[i].second == b.per_probe[i].second);
  }
  // V >= 0 makes the expected integral monotone in t.
  const double ts[4] = {0.05, 0.1, 0.2, 0.4};
  std::vector<std::pair<double, double>> stats;
  for (double t : ts) {
    auto r = kato_diagnostic(well, probes, t, 2000, 32, 1234);
    stats.emplace_back(r.per_probe[0].first, r.per_probe[0].second);
  }
  for (int i = 0; i + 1 < 4; ++i) {
    CHECK(stats[i].first <=
          stats[i + 1].first + 3.0 * (stats[i].second + stats[i + 1].second));
  }
}

TEST_CASE("kato_diagnostic on a Coulomb-like potential") {
  // |x|^{-1} I in n=3 is in the Kato class; the estimate must decrease with t
  // and agree with a finer quadrature of the same potential.
  Potential p;
  p.space_dim = 3;
  p.fiber_dim = 1;
  p.policy = SingularPolicy::clip;
  p.clip_max_norm = 1e8;
  p.evaluator = [](std::span<const double> x, Matrix& out) {
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    out(0, 0) = cxd(1.0 / r, 0.0);
  };
  std::vector<std::vector<double>> probes = {{0.05, 0.0, 0.0},
                                             {0.0, -0.05, 0.05}};
  auto coarse01 = kato_diagnostic(p, probes, 0.1, 4000, 64, 555);
  auto coarse005 = kato_diagnostic(p, probes, 0.05, 4000, 64, 555);
  for (size_t i = 0; i < probes.size(); ++i) {
    CHECK(coarse005.per_probe[i].first < coarse01.per_probe[i].first);
  }
  // Quadrature oracle: same estimator at 8x finer time resolution.
  auto fine01 = kato_diagnostic(p, probes, 0.1, 4000, 512, 555);
  for (size_t i = 0; i < probes.size(); ++i) {
    const double a = coarse01.per_probe[i].first;
    const double b = fine01.per_probe[i].first;
    const double se =
        coarse01.per_probe[i].second + fine01.per_probe[i].second;
    CHECK(std::abs(a - b) <= 3.0 * se + 0.15 * b);
  }
}
