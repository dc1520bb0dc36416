#pragma once

#include <utility>
#include <vector>

#include "fkmc/matrix.hpp"

namespace fkmc {

/// Default absolute tolerance (operator norm) for structure classification.
inline constexpr double kStructureTol = 1e-10;

/// Largest singular value.  Exact 0 only for the zero matrix.
double operator_norm(const Matrix& m);

/// e^M.  Closed form for d <= 2, scaling-and-squaring with a Taylor core for
/// d >= 3.  Skew-Hermitian input yields a unitary result up to roundoff.
Matrix matrix_exp(const Matrix& m);

/// Allocation-free variant for hot loops (d <= 2 never allocates).
void matrix_exp_into(const Matrix& m, Matrix& out);

/// m = u^H diag(eigenvalues) u, eigenvalues ascending.  Deterministic: fixed
/// cyclic-Jacobi sweep order, ties broken by eigenvector comparison, each
/// eigenvector phase-normalized on its largest component.
struct Eigendecomposition {
  std::vector<double> eigenvalues;
  Matrix u;
};
Eigendecomposition hermitian_eigendecomposition(const Matrix& m,
                                                double tol = kStructureTol);

/// Spectral clamp of a Hermitian matrix with eigenvalues >= -tol into [0, cap].
/// Throws DomainError("potential not nonnegative") below -tol.
Matrix truncate_nonnegative(const Matrix& m, double cap,
                            double tol = kStructureTol);

enum class MatrixClass { general, hermitian, skew_hermitian, unitary };

/// First matching tag in the order hermitian, skew_hermitian, unitary.
MatrixClass classify(const Matrix& m, double tol = kStructureTol);

double hermitian_defect(const Matrix& m);   // ||M - M^H||
double skew_defect(const Matrix& m);        // ||M + M^H||
double unitarity_defect(const Matrix& m);   // ||M^H M - 1||

/// (lambda_min, lambda_max) of a Hermitian matrix; closed form for d <= 2.
std::pair<double, double> hermitian_eig_range(const Matrix& m);

/// Inverse by LU with partial pivoting; NumericError on singular input.
Matrix lu_inverse(const Matrix& m);

namespace detail {
/// Cheap upper bound on the operator norm (Frobenius).
inline double norm_upper(const Matrix& m) { return m.frobenius_norm(); }
}  // namespace detail

}  // namespace fkmc
