#include "fkmc/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "fkmc/errors.hpp"

#include <complex>
#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace fkmc {

namespace {

std::int64_t total_nodes(const std::vector<int>& mesh) {
  std::int64_t n = 1;
  for (int m : mesh) n *= m;
  return n;
}

}  // namespace

std::vector<double> DiscreteOperator::node_coord(std::int64_t node) const {
  std::vector<double> x(space_dim);
  std::int64_t rem = node;
  for (int a = space_dim - 1; a >= 0; --a) {
    const std::int64_t idx = rem % mesh[a];
    rem /= mesh[a];
    x[a] = box.lo[a] + static_cast<double>(idx + 1) * h;
  }
  return x;
}

std::int64_t DiscreteOperator::coord_node(std::span<const double> x) const {
  std::int64_t node = 0;
  for (int a = 0; a < space_dim; ++a) {
    const double pos = (x[a] - box.lo[a]) / h - 1.0;
    const std::int64_t idx = static_cast<std::int64_t>(std::llround(pos));
    if (idx < 0 || idx >= mesh[a] || std::abs(pos - idx) > 1e-6)
      throw ValidationError("coord_node: point is not a mesh node");
    node = node * mesh[a] + idx;
  }
  return node;
}

double DiscreteOperator::cell_volume() const {
  return std::pow(h, space_dim);
}

DiscreteOperator assemble(const Box& box, const std::vector<int>& mesh,
                          const GaugeField& gauge, const Potential& pot,
                          std::int64_t dense_cap) {
  const int n = gauge.space_dim;
  const int d = gauge.fiber_dim;
  if (n < 1 || n > 2)
    throw ValidationError("assemble: space dimension must be 1 or 2");
  if (pot.space_dim != n || pot.fiber_dim != d)
    throw ValidationError("assemble: field dimension mismatch");
  if (static_cast<int>(box.lo.size()) != n ||
      static_cast<int>(box.hi.size()) != n ||
      static_cast<int>(mesh.size()) != n)
    throw ValidationError("assemble: box/mesh dimension mismatch");

  DiscreteOperator op;
  op.box = box;
  op.mesh = mesh;
  op.space_dim = n;
  op.fiber_dim = d;
  for (int a = 0; a < n; ++a) {
    if (mesh[a] < 1) throw ValidationError("assemble: empty mesh axis");
    if (!(box.hi[a] > box.lo[a]))
      throw ValidationError("assemble: empty box axis");
    const double ha = (box.hi[a] - box.lo[a]) / (mesh[a] + 1);
    if (a == 0)
      op.h = ha;
    else if (std::abs(ha - op.h) > 1e-12 * op.h)
      throw ValidationError("assemble: mesh spacing differs between axes");
  }
  op.nodes = total_nodes(mesh);
  const std::int64_t N = op.nodes * d;
  if (N > dense_cap)
    throw ValidationError("assemble: problem exceeds the dense-solve cap");
  op.matrix.assign(static_cast<size_t>(N) * N, cxd(0.0));

  auto at = [&](std::int64_t r, std::int64_t c) -> cxd& {
    return op.matrix[static_cast<size_t>(r) +
                     static_cast<size_t>(c) * static_cast<size_t>(N)];
  };

  const double inv_h2 = 1.0 / (op.h * op.h);
  const double inv_2h = 0.5 / op.h;
  std::vector<Matrix> alpha(static_cast<size_t>(n), Matrix(d));
  Matrix vmat(d), sq(d), diag(d), div(d);

  std::vector<std::int64_t> idx(n);
  for (std::int64_t node = 0; node < op.nodes; ++node) {
    std::int64_t rem = node;
    for (int a = n - 1; a >= 0; --a) {
      idx[a] = rem % mesh[a];
      rem /= mesh[a];
    }
    const std::vector<double> x = op.node_coord(node);

    diag.set_zero();
    for (int i = 0; i < d; ++i) diag(i, i) = n * inv_h2;  // -Laplacian/2 diag
    pot.evaluate_into(x, vmat);
    diag += vmat;
    if (!gauge.identically_zero) {
      gauge.evaluate_into(x, alpha);
      for (int a = 0; a < n; ++a) {
        Matrix::mul(alpha[static_cast<size_t>(a)],
                    alpha[static_cast<size_t>(a)], sq);
        diag.add_scaled(sq, cxd(-0.5, 0.0));
      }
      div = evaluate_divergence(gauge, x);
      diag.add_scaled(div, cxd(-0.5, 0.0));
    }
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) at(node * d + r, node * d + c) = diag(r, c);

    // Couplings to +/- neighbors per axis.
    for (int a = 0; a < n; ++a) {
      std::int64_t stride = 1;
      for (int b = a + 1; b < n; ++b) stride *= mesh[b];
      for (int dir = -1; dir <= 1; dir += 2) {
        const std::int64_t ni = idx[a] + dir;
        if (ni < 0 || ni >= mesh[a]) continue;  // Dirichlet wall
        const std::int64_t nb = node + dir * stride;
        for (int r = 0; r < d; ++r)
          at(node * d + r, nb * d + r) += cxd(-0.5 * inv_h2, 0.0);
        if (!gauge.identically_zero) {
          // -alpha_a d_a with centered differences at the node.
          const Matrix& aa = alpha[static_cast<size_t>(a)];
          const double sgn = static_cast<double>(dir);
          for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
              at(node * d + r, nb * d + c) += -sgn * inv_2h * aa(r, c);
        }
      }
    }
  }

  // Symmetrize, reporting the pre-symmetrization defect.
  double defect2 = 0.0, norm2 = 0.0;
  for (std::int64_t c = 0; c < N; ++c) {
    for (std::int64_t r = 0; r <= c; ++r) {
      const cxd mrc = at(r, c);
      const cxd mcr = at(c, r);
      const cxd herm = 0.5 * (mrc + std::conj(mcr));
      const cxd skew = 0.5 * (mrc - std::conj(mcr));
      const double w = (r == c) ? 1.0 : 2.0;
      defect2 += w * std::norm(skew);
      norm2 += w * std::norm(herm);
      at(r, c) = herm;
      at(c, r) = std::conj(herm);
    }
  }
  op.presym_defect_fro = std::sqrt(defect2);
  op.presym_defect_rel =
      norm2 > 0.0 ? std::sqrt(defect2 / norm2) : 0.0;
  return op;
}

SpectralFactorization factorize(const DiscreteOperator& op) {
  SpectralFactorization fac;
  fac.dim = op.dim();
  fac.q = op.matrix;  // zheev overwrites with the eigenvectors
  fac.eigenvalues.assign(static_cast<size_t>(fac.dim), 0.0);
  const lapack_int info = LAPACKE_zheev(
      LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(fac.dim),
      fac.q.data(), static_cast<lapack_int>(fac.dim), fac.eigenvalues.data());
  if (info != 0)
    throw NumericError("factorize: zheev failed with info " +
                       std::to_string(info));
  return fac;
}

std::vector<cxd> expm_apply(const SpectralFactorization& fac,
                            std::span<const cxd> f, double t) {
  if (t < 0.0) throw DomainError("expm_apply: t must be nonnegative");
  const std::int64_t N = fac.dim;
  if (static_cast<std::int64_t>(f.size()) != N)
    throw ValidationError("expm_apply: vector size mismatch");
  if (t == 0.0) return std::vector<cxd>(f.begin(), f.end());

  std::vector<cxd> coef(static_cast<size_t>(N), cxd(0.0));
  for (std::int64_t k = 0; k < N; ++k) {
    cxd s = 0.0;
    const cxd* col = fac.q.data() + static_cast<size_t>(k) * N;
    for (std::int64_t i = 0; i < N; ++i) s += std::conj(col[i]) * f[i];
    coef[static_cast<size_t>(k)] =
        s * std::exp(-t * fac.eigenvalues[static_cast<size_t>(k)]);
  }
  std::vector<cxd> out(static_cast<size_t>(N), cxd(0.0));
  for (std::int64_t k = 0; k < N; ++k) {
    const cxd c = coef[static_cast<size_t>(k)];
    if (c == cxd(0.0)) continue;
    const cxd* col = fac.q.data() + static_cast<size_t>(k) * N;
    for (std::int64_t i = 0; i < N; ++i) out[static_cast<size_t>(i)] += c * col[i];
  }
  return out;
}

std::vector<cxd> expm_apply(const DiscreteOperator& op, std::span<const cxd> f,
                            double t) {
  return expm_apply(factorize(op), f, t);
}

std::vector<cxd> kernel_column(const DiscreteOperator& op,
                               const SpectralFactorization& fac,
                               std::int64_t y_node, double t) {
  if (y_node < 0 || y_node >= op.nodes)
    throw ValidationError("kernel_column: node out of range");
  const std::int64_t N = op.dim();
  const int d = op.fiber_dim;
  const double inv_cell = 1.0 / op.cell_volume();
  std::vector<cxd> out(static_cast<size_t>(N) * d, cxd(0.0));
  std::vector<cxd> e(static_cast<size_t>(N), cxd(0.0));
  for (int l = 0; l < d; ++l) {
    std::fill(e.begin(), e.end(), cxd(0.0));
    e[static_cast<size_t>(y_node * d + l)] = cxd(inv_cell, 0.0);
    std::vector<cxd> col = expm_apply(fac, e, t);
    std::copy(col.begin(), col.end(),
              out.begin() + static_cast<std::ptrdiff_t>(
                                static_cast<size_t>(l) * N));
  }
  return out;
}

std::vector<cxd> sample_vector_field(const DiscreteOperator& op,
                                     const VectorField& f) {
  if (f.space_dim != op.space_dim || f.fiber_dim != op.fiber_dim)
    throw ValidationError("sample_vector_field: dimension mismatch");
  std::vector<cxd> out(static_cast<size_t>(op.dim()), cxd(0.0));
  std::vector<cxd> val(static_cast<size_t>(op.fiber_dim));
  for (std::int64_t node = 0; node < op.nodes; ++node) {
    const std::vector<double> x = op.node_coord(node);
    f.eval(x, val);
    for (int l = 0; l < op.fiber_dim; ++l)
      out[static_cast<size_t>(node * op.fiber_dim + l)] =
          val[static_cast<size_t>(l)];
  }
  return out;
}

double external_mass_bound(const Box& box, std::span<const double> x,
                           double t) {
  if (!(t > 0.0)) throw DomainError("external_mass_bound: t must be positive");
  double inside = 1.0;
  const double s = std::sqrt(t);
  for (size_t a = 0; a < box.lo.size(); ++a) {
    auto cdf = [&](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    inside *= cdf((box.hi[a] - x[a]) / s) - cdf((box.lo[a] - x[a]) / s);
  }
  return 1.0 - inside;
}

void write_mesh_dump(std::ostream& os, const DiscreteOperator& op,
                     std::span<const cxd> values) {
  if (static_cast<std::int64_t>(values.size()) != op.dim())
    throw ValidationError("write_mesh_dump: value size mismatch");
  char buf[64];
  for (std::int64_t node = 0; node < op.nodes; ++node) {
    const std::vector<double> x = op.node_coord(node);
    bool first = true;
    for (double v : x) {
      std::snprintf(buf, sizeof buf, first ? "%.17g" : " %.17g", v);
      os << buf;
      first = false;
    }
    for (int l = 0; l < op.fiber_dim; ++l) {
      const cxd z = values[static_cast<size_t>(node * op.fiber_dim + l)];
      std::snprintf(buf, sizeof buf, " %.17g %.17g", z.real(), z.imag());
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace fkmc
