#include "fkmc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fkmc/errors.hpp"

namespace fkmc {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(const Matrix& m, const char* op) {
  if (m.dim() < 1) throw ValidationError(std::string(op) + ": empty matrix");
  if (!m.all_finite())
    throw ValidationError(std::string(op) + ": non-finite entries");
}

/// Eigenvalue range of a Hermitian 2x2 [[a, z], [conj z, c]].
std::pair<double, double> eig_range_2x2(const Matrix& m) {
  const double a = m(0, 0).real();
  const double c = m(1, 1).real();
  const double mid = 0.5 * (a + c);
  const double r = std::hypot(0.5 * (a - c), std::abs(m(0, 1)));
  return {mid - r, mid + r};
}

/// One cyclic-Jacobi pass infrastructure: zero the (p,q) element of the
/// Hermitian matrix a, accumulating the rotation into q_acc (a0 = Q A Q^H
/// maintained as A := R^H A R, Q := Q R).
void jacobi_rotate(Matrix& a, Matrix& q_acc, int p, int q) {
  const cxd apq = a(p, q);
  const double m = std::abs(apq);
  if (m == 0.0) return;
  const cxd phase = apq / m;  // e^{i phi}
  const double app = a(p, p).real();
  const double aqq = a(q, q).real();
  const double rho = (app - aqq) / (2.0 * m);
  double t;
  if (rho >= 0.0)
    t = 1.0 / (rho + std::sqrt(1.0 + rho * rho));
  else
    t = -1.0 / (-rho + std::sqrt(1.0 + rho * rho));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;
  const int d = a.dim();

  // Columns: A <- A * R with R = [[c, -s e^{i phi}], [s e^{-i phi}, c]] on (p,q).
  for (int i = 0; i < d; ++i) {
    const cxd aip = a(i, p), aiq = a(i, q);
    a(i, p) = c * aip + s * std::conj(phase) * aiq;
    a(i, q) = -s * phase * aip + c * aiq;
  }
  // Rows: A <- R^H * A.
  for (int i = 0; i < d; ++i) {
    const cxd api = a(p, i), aqi = a(q, i);
    a(p, i) = c * api + s * phase * aqi;
    a(q, i) = -s * std::conj(phase) * api + c * aqi;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  a(p, p) = cxd(a(p, p).real(), 0.0);
  a(q, q) = cxd(a(q, q).real(), 0.0);

  for (int i = 0; i < d; ++i) {
    const cxd qip = q_acc(i, p), qiq = q_acc(i, q);
    q_acc(i, p) = c * qip + s * std::conj(phase) * qiq;
    q_acc(i, q) = -s * phase * qip + c * qiq;
  }
}

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  const int d = a.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) s += std::norm(a(i, j));
  return std::sqrt(s);
}

/// Full Jacobi diagonalization of the Hermitian part of m.
/// Returns unsorted (diag, Q) with m ~= Q diag Q^H.
std::pair<std::vector<double>, Matrix> jacobi_eig(const Matrix& m) {
  const int d = m.dim();
  Matrix a(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      a(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
  Matrix q = Matrix::identity(d);
  const double scale = a.frobenius_norm();
  if (scale > 0.0) {
    const double target = 0.5 * static_cast<double>(d) * kEps * scale;
    for (int sweep = 0; sweep < 60; ++sweep) {
      if (off_diagonal_norm(a) <= target) break;
      for (int p = 0; p < d - 1; ++p)
        for (int qq = p + 1; qq < d; ++qq) jacobi_rotate(a, q, p, qq);
    }
  }
  std::vector<double> evals(d);
  for (int i = 0; i < d; ++i) evals[i] = a(i, i).real();
  return {std::move(evals), std::move(q)};
}

bool column_less(const Matrix& q, int a, int b) {
  for (int i = 0; i < q.dim(); ++i) {
    const cxd va = q(i, a), vb = q(i, b);
    if (va.real() != vb.real()) return va.real() < vb.real();
    if (va.imag() != vb.imag()) return va.imag() < vb.imag();
  }
  return false;
}

/// Taylor core with scaling and squaring, d >= 3.
void exp_taylor_scaled(const Matrix& m, Matrix& out) {
  const int d = m.dim();
  const double nrm = detail::norm_upper(m);
  int squarings = 0;
  double scale = 1.0;
  if (nrm > 1.0) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm)));
    scale = std::ldexp(1.0, -squarings);
  }
  Matrix x(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = m(i, j) * scale;

  Matrix term = Matrix::identity(d);
  Matrix acc = Matrix::identity(d);
  Matrix tmp(d);
  for (int k = 1; k <= 30; ++k) {
    Matrix::mul(term, x, tmp);
    tmp *= cxd(1.0 / k, 0.0);
    std::swap(term, tmp);
    acc += term;
    if (term.frobenius_norm() <= kEps * acc.frobenius_norm()) break;
  }
  for (int s = 0; s < squarings; ++s) {
    Matrix::mul(acc, acc, tmp);
    std::swap(acc, tmp);
  }
  out = std::move(acc);
}

/// Closed form for 2x2: exp(M) = e^{mu} (cosh(s) I + sinh(s)/s (M - mu I)),
/// mu = tr M / 2, s^2 = det-free invariant of the traceless part.  Exactly
/// unitary structure for skew-Hermitian input up to a few ulps.
void exp_2x2(const Matrix& m, Matrix& out) {
  const cxd mu = 0.5 * (m(0, 0) + m(1, 1));
  const cxd a = m(0, 0) - mu;
  const cxd b = m(0, 1);
  const cxd c = m(1, 0);
  const cxd s2 = a * a + b * c;
  const cxd s = std::sqrt(s2);
  const cxd emu = std::exp(mu);
  cxd ch, shs;  // cosh(s), sinh(s)/s
  if (std::abs(s) < 1e-4) {
    ch = 1.0 + s2 * (0.5 + s2 * (1.0 / 24.0 + s2 / 720.0));
    shs = 1.0 + s2 * (1.0 / 6.0 + s2 * (1.0 / 120.0 + s2 / 5040.0));
  } else {
    ch = std::cosh(s);
    shs = std::sinh(s) / s;
  }
  out(0, 0) = emu * (ch + shs * a);
  out(0, 1) = emu * (shs * b);
  out(1, 0) = emu * (shs * c);
  out(1, 1) = emu * (ch - shs * a);
}

}  // namespace

double operator_norm(const Matrix& m) {
  require_finite(m, "operator_norm");
  const int d = m.dim();
  const double scale = m.max_abs();
  if (scale == 0.0) return 0.0;
  if (d == 1) return std::abs(m(0, 0));
  // Largest eigenvalue of (M/scale)^H (M/scale), rescaled back.
  Matrix b(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b(i, j) = m(i, j) / scale;
  Matrix g(d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      cxd s = 0.0;
      for (int k = 0; k < d; ++k) s += std::conj(b(k, i)) * b(k, j);
      g(i, j) = s;
      g(j, i) = std::conj(s);
    }
  }
  double lam;
  if (d == 2) {
    lam = eig_range_2x2(g).second;
  } else {
    auto [evals, q] = jacobi_eig(g);
    lam = *std::max_element(evals.begin(), evals.end());
  }
  return scale * std::sqrt(std::max(lam, 0.0));
}

void matrix_exp_into(const Matrix& m, Matrix& out) {
  require_finite(m, "matrix_exp");
  const int d = m.dim();
  if (out.dim() != d) out = Matrix(d);
  if (d == 1) {
    out(0, 0) = std::exp(m(0, 0));
  } else if (d == 2) {
    exp_2x2(m, out);
  } else {
    exp_taylor_scaled(m, out);
  }
}

Matrix matrix_exp(const Matrix& m) {
  Matrix out;
  matrix_exp_into(m, out);
  return out;
}

Eigendecomposition hermitian_eigendecomposition(const Matrix& m, double tol) {
  require_finite(m, "hermitian_eigendecomposition");
  if (hermitian_defect(m) > tol)
    throw ValidationError("hermitian_eigendecomposition: input not Hermitian");
  const int d = m.dim();
  auto [evals, q] = jacobi_eig(m);

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    if (evals[x] != evals[y]) return evals[x] < evals[y];
    return column_less(q, x, y);
  });

  Eigendecomposition out;
  out.eigenvalues.resize(d);
  out.u = Matrix(d);
  for (int k = 0; k < d; ++k) {
    const int col = order[k];
    out.eigenvalues[k] = evals[col];
    // Phase-fix on the largest-magnitude component (first among ties).
    int pivot = 0;
    double best = -1.0;
    for (int i = 0; i < d; ++i) {
      const double w = std::abs(q(i, col));
      if (w > best) {
        best = w;
        pivot = i;
      }
    }
    cxd phase(1.0, 0.0);
    if (best > 0.0) phase = std::conj(q(pivot, col)) / best;
    // u = Q^H: row k of u is the conjugated eigenvector.
    for (int i = 0; i < d; ++i)
      out.u(k, i) = std::conj(q(i, col) * phase);
  }
  return out;
}

Matrix truncate_nonnegative(const Matrix& m, double cap, double tol) {
  if (cap <= 0.0)
    throw ValidationError("truncate_nonnegative: cap must be positive");
  auto eig = hermitian_eigendecomposition(m, tol);
  for (double ev : eig.eigenvalues)
    if (ev < -tol) throw DomainError("potential not nonnegative");
  const int d = m.dim();
  Matrix out(d);
  // u^H diag(min(max(v,0),cap)) u
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      cxd s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double v = std::clamp(eig.eigenvalues[k], 0.0, cap);
        s += std::conj(eig.u(k, i)) * v * eig.u(k, j);
      }
      out(i, j) = s;
    }
  }
  // Restore exact Hermitian structure lost to roundoff.
  for (int i = 0; i < d; ++i) {
    out(i, i) = cxd(out(i, i).real(), 0.0);
    for (int j = i + 1; j < d; ++j) {
      const cxd v = 0.5 * (out(i, j) + std::conj(out(j, i)));
      out(i, j) = v;
      out(j, i) = std::conj(v);
    }
  }
  return out;
}

double hermitian_defect(const Matrix& m) {
  return operator_norm(m - m.adjoint());
}

double skew_defect(const Matrix& m) { return operator_norm(m + m.adjoint()); }

double unitarity_defect(const Matrix& m) {
  return operator_norm(m.adjoint() * m - Matrix::identity(m.dim()));
}

MatrixClass classify(const Matrix& m, double tol) {
  require_finite(m, "classify");
  if (hermitian_defect(m) <= tol) return MatrixClass::hermitian;
  if (skew_defect(m) <= tol) return MatrixClass::skew_hermitian;
  if (unitarity_defect(m) <= tol) return MatrixClass::unitary;
  return MatrixClass::general;
}

std::pair<double, double> hermitian_eig_range(const Matrix& m) {
  const int d = m.dim();
  if (d == 1) {
    const double v = m(0, 0).real();
    return {v, v};
  }
  if (d == 2) return eig_range_2x2(m);
  auto [evals, q] = jacobi_eig(m);
  auto [lo, hi] = std::minmax_element(evals.begin(), evals.end());
  return {*lo, *hi};
}

Matrix lu_inverse(const Matrix& m) {
  require_finite(m, "lu_inverse");
  const int d = m.dim();
  Matrix a = m;
  Matrix inv = Matrix::identity(d);
  for (int col = 0; col < d; ++col) {
    int piv = col;
    double best = std::abs(a(col, col));
    for (int r = col + 1; r < d; ++r) {
      if (std::abs(a(r, col)) > best) {
        best = std::abs(a(r, col));
        piv = r;
      }
    }
    if (best < 1e-300) throw NumericError("lu_inverse: singular matrix");
    if (piv != col) {
      for (int c = 0; c < d; ++c) {
        std::swap(a(piv, c), a(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    }
    const cxd ipiv = 1.0 / a(col, col);
    for (int c = 0; c < d; ++c) {
      a(col, c) *= ipiv;
      inv(col, c) *= ipiv;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const cxd f = a(r, col);
      if (f == cxd(0.0)) continue;
      for (int c = 0; c < d; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

}  // namespace fkmc
