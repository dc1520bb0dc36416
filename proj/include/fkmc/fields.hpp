#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fkmc/linalg.hpp"
#include "fkmc/matrix.hpp"

namespace fkmc {

enum class DerivativeMode { analytic, finite_difference, none };

/// The gauge 1-form: maps x in R^n to n skew-Hermitian d x d matrices.
/// Evaluators must be pure; every public evaluation is validated against the
/// Lie-algebra constraint within `tolerance`.
struct GaugeField {
  int space_dim = 0;
  int fiber_dim = 0;
  double tolerance = kStructureTol;
  bool identically_zero = false;
  std::function<void(std::span<const double>, std::span<Matrix>)> components;
  DerivativeMode mode = DerivativeMode::none;
  std::function<void(std::span<const double>, Matrix&)> analytic_divergence;
  double fd_step = 1e-4;  // effective step is fd_step * (1 + |x|)

  /// Writes the n component matrices at x into out (validated).
  void evaluate_into(std::span<const double> x, std::span<Matrix> out) const;
};

enum class SingularPolicy { reject, clip };

/// Hermitian-matrix-valued potential with a nonnegativity contract.
struct Potential {
  int space_dim = 0;
  int fiber_dim = 0;
  double tolerance = kStructureTol;
  bool nonneg_required = true;
  SingularPolicy policy = SingularPolicy::reject;
  double clip_max_norm = 0.0;
  bool identically_zero = false;
  std::function<void(std::span<const double>, Matrix&)> evaluator;

  /// Evaluates at x with the singular policy, Hermiticity check and (if
  /// required) the nonnegativity check applied.
  void evaluate_into(std::span<const double> x, Matrix& out) const;
};

/// Rejected sample under SingularPolicy::reject; the caller decides whether
/// to resample or abort.
struct SampleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<Matrix> evaluate_gauge(const GaugeField& field,
                                   std::span<const double> x);

/// Sum of d(alpha_j)/dx_j at x; analytic when available, otherwise central
/// finite differences with step fd_step * (1 + |x|).
Matrix evaluate_divergence(const GaugeField& field, std::span<const double> x);

Matrix evaluate_potential(const Potential& pot, std::span<const double> x);

// ---- presets ----------------------------------------------------------

GaugeField make_zero_gauge(int space_dim, int fiber_dim);
GaugeField make_constant_gauge(std::vector<Matrix> alphas);
/// d = 1, alpha_j = i b_j (constant real 1-form coefficients).
GaugeField make_scalar_magnetic(std::vector<double> b);
/// Scalar 1-form tensored with the identity: alpha_j = i b_j * 1_d.
GaugeField make_pauli_like(std::vector<double> b, int fiber_dim);
/// Nonconstant smooth su(2) field, d = 2:
///   alpha_j(x) = a [ sin(k.x + phi_j) i s1 + cos(k.x + phi_j) i s2 + 0.5 i s3 ],
/// phi_j = j pi/3, with the analytic divergence attached.
GaugeField make_su2_rotation(double amplitude, std::vector<double> wavevector);

Potential make_zero_potential(int space_dim, int fiber_dim);
Potential make_constant_potential(int space_dim, Matrix v,
                                  bool nonneg_required = true);
/// V(x) = diag(w_j |x|^2 + c_j).
Potential make_diagonal_polynomial_well(int space_dim,
                                        std::vector<double> weights,
                                        std::vector<double> offsets);

/// Spectral truncation x -> min(V(x), cap) applied pointwise (eigenvalue
/// clamp into [0, cap]); the result is again a valid nonnegative potential.
Potential truncate_potential(const Potential& pot, double cap);

// ---- tabulated fields --------------------------------------------------

/// Regular-lattice table read from text: one line per node, n coordinates
/// then values_per_node (re, im) pairs.  Evaluation is multilinear with
/// clamping at the box boundary.
class TabulatedGrid {
 public:
  static TabulatedGrid read(std::istream& is, int space_dim,
                            int values_per_node);
  void interpolate(std::span<const double> x, std::span<cxd> out) const;
  int space_dim() const { return static_cast<int>(axes_.size()); }
  int values_per_node() const { return values_per_node_; }

 private:
  int values_per_node_ = 0;
  std::vector<std::vector<double>> axes_;
  std::vector<std::size_t> strides_;
  std::vector<cxd> values_;
};

GaugeField make_tabulated_gauge(std::shared_ptr<const TabulatedGrid> grid,
                                int fiber_dim);
Potential make_tabulated_potential(std::shared_ptr<const TabulatedGrid> grid,
                                   int fiber_dim);

// ---- Kato-class diagnostic ----------------------------------------------

struct KatoResult {
  double sup_estimate = 0.0;
  std::vector<std::pair<double, double>> per_probe;  // (mean, std_error)
  std::vector<std::int64_t> rejected_per_probe;
};

/// Monte Carlo estimate of E^x[ int_0^t |V(X_s)| ds ] for each probe x via
/// left-endpoint Riemann sums over sampled Brownian paths.
KatoResult kato_diagnostic(const Potential& pot,
                           std::span<const std::vector<double>> probes,
                           double t, std::int64_t n_paths, int steps,
                           std::uint64_t seed, int workers = 0);

}  // namespace fkmc
