#pragma once

#include <cstdint>
#include <memory>

#include "fkmc/fields.hpp"
#include "fkmc/transport.hpp"

namespace fkmc {

/// C^d-valued function on R^n.
struct VectorField {
  int space_dim = 0;
  int fiber_dim = 0;
  std::optional<double> sup_norm_hint;
  std::function<void(std::span<const double>, std::span<cxd>)> eval;
};

/// f(x) = exp(-|x - center|^2 / (2 width^2)) * direction.
VectorField make_gaussian_bump(std::vector<double> center, double width,
                               std::vector<cxd> direction);
/// Constant canonical basis vector e_component.
VectorField make_coordinate_indicator(int space_dim, int fiber_dim,
                                      int component);
VectorField make_tabulated_vector_field(
    std::shared_ptr<const TabulatedGrid> grid, int fiber_dim);

/// Common Monte Carlo run parameters.  path_index_base offsets the random
/// streams so composite runs can keep sub-ensembles disjoint.
struct McRunParams {
  double t = 0.0;
  int steps = 0;
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
  Scheme scheme;
  int workers = 0;
  std::uint64_t path_index_base = 0;
};

struct McEstimate {
  std::vector<cxd> value;
  std::vector<double> std_error_re;  // per component
  std::vector<double> std_error_im;
  double max_sample_norm = 0.0;  // max over paths of |A f(X_t)|
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
  Scheme scheme;
};

/// e^{-tH}f(x) ~ mean over Brownian paths of transport * f(endpoint).
/// Requires t > 0 and a potential with the nonnegativity contract enabled.
/// Bit-identical for fixed (seed, n_paths) at any worker count: per-path
/// samples are folded in fixed 256-path blocks merged by a pairwise tree.
McEstimate apply_semigroup(const VectorField& f, std::span<const double> x,
                           const GaugeField& gauge, const Potential& pot,
                           const McRunParams& params);

struct DominationCheck {
  double lhs = 0.0;  // |estimate|
  double rhs = 0.0;  // mean |f(X_t)| over the same paths
};
DominationCheck semigroup_domination_check(const VectorField& f,
                                           std::span<const double> x,
                                           const GaugeField& gauge,
                                           const Potential& pot,
                                           const McRunParams& params);

struct KernelEstimate {
  Matrix matrix;       // p_t(x,y) * bridge_mean
  double prefactor = 0.0;
  Matrix bridge_mean;  // E^{x,y}[A]
  Matrix std_error;    // entry (i,j): se_re + i se_im of matrix(i,j)
  double max_sample_norm = 0.0;
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
  Scheme scheme;
};

KernelEstimate kernel(std::span<const double> x, std::span<const double> y,
                      const GaugeField& gauge, const Potential& pot,
                      const McRunParams& params);

/// kernel(x,y) and kernel(y,x) from one bridge ensemble, pairing each path
/// with its reversal: the discrete adjoint-reversal identity then makes
/// kernel(y,x) = kernel(x,y)^H up to roundoff, not just MC error.
std::pair<KernelEstimate, KernelEstimate> kernel_symmetric_pair(
    std::span<const double> x, std::span<const double> y,
    const GaugeField& gauge, const Potential& pot, const McRunParams& params);

struct KernelConsistency {
  McEstimate direct;
  std::vector<cxd> via_kernel;
  double cell_volume = 0.0;
  std::int64_t quadrature_nodes = 0;
};

/// Compares e^{-tH}f(x) directly against the cell-midpoint quadrature of
/// kernel(x,y) f(y) over an axis-aligned box.
KernelConsistency kernel_consistency(const VectorField& f,
                                     std::span<const double> x,
                                     std::span<const double> box_lo,
                                     std::span<const double> box_hi,
                                     int nodes_per_axis,
                                     const GaugeField& gauge,
                                     const Potential& pot,
                                     const McRunParams& params);

struct TraceEstimate {
  double value = 0.0;      // box-truncated; the full-space trace may be +inf
  double std_error = 0.0;
  std::int64_t nodes = 0;
  double cell_volume = 0.0;
};

/// Quadrature over an endpoint-inclusive lattice (spacing h per axis) of
/// tr kernel(x,x,t), times the cell volume h^n.
TraceEstimate trace_estimate(std::span<const double> box_lo,
                             std::span<const double> box_hi, double resolution,
                             const GaugeField& gauge, const Potential& pot,
                             const McRunParams& params);

/// For each t in ts: sup over probes of mean |A_t - 1|, with the standard
/// error at the attaining probe.  Small-time decay diagnostic.
std::vector<std::pair<double, double>> small_time_statistic(
    std::span<const std::vector<double>> probes, std::span<const double> ts,
    const GaugeField& gauge, const Potential& pot, const McRunParams& params);

}  // namespace fkmc
