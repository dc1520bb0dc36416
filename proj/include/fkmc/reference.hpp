#pragma once

#include <cstdint>
#include <iosfwd>

#include "fkmc/fields.hpp"
#include "fkmc/semigroup.hpp"

namespace fkmc {

struct Box {
  std::vector<double> lo, hi;
};

/// Dense discretization of the operator on a Dirichlet box: -Laplacian/2 by
/// central second differences, the first-order gauge term by centered first
/// differences with alpha at the nodes, zeroth-order terms at the nodes, then
/// symmetrized as (M + M^H)/2 with the pre-symmetrization defect reported.
struct DiscreteOperator {
  Box box;
  std::vector<int> mesh;  // interior nodes per axis
  double h = 0.0;
  int space_dim = 0;
  int fiber_dim = 0;
  std::int64_t nodes = 0;            // spatial nodes
  std::vector<cxd> matrix;           // column-major, (nodes*d)^2
  double presym_defect_fro = 0.0;    // Frobenius norm of the skew part
  double presym_defect_rel = 0.0;    // relative to |M|_F

  std::int64_t dim() const { return nodes * fiber_dim; }
  std::vector<double> node_coord(std::int64_t node) const;
  std::int64_t coord_node(std::span<const double> x) const;  // nearest node
  double cell_volume() const;
};

DiscreteOperator assemble(const Box& box, const std::vector<int>& mesh,
                          const GaugeField& gauge, const Potential& pot,
                          std::int64_t dense_cap = 6000);

/// Full Hermitian eigendecomposition (LAPACK zheev); reused across times.
struct SpectralFactorization {
  std::int64_t dim = 0;
  std::vector<double> eigenvalues;  // ascending
  std::vector<cxd> q;               // column-major eigenvectors
  double min_eigenvalue() const { return eigenvalues.front(); }
};

SpectralFactorization factorize(const DiscreteOperator& op);

/// Q e^{-t Lambda} Q^H f.  t = 0 returns f unchanged.
std::vector<cxd> expm_apply(const SpectralFactorization& fac,
                            std::span<const cxd> f, double t);
std::vector<cxd> expm_apply(const DiscreteOperator& op, std::span<const cxd> f,
                            double t);

/// Discrete kernel column e^{-tH}(., y): applies the semigroup to the d
/// indicator vectors at node y scaled by 1/cell-volume.  Returns (nodes*d) x d
/// column-major.
std::vector<cxd> kernel_column(const DiscreteOperator& op,
                               const SpectralFactorization& fac,
                               std::int64_t y_node, double t);

/// f sampled on the mesh, node-major.
std::vector<cxd> sample_vector_field(const DiscreteOperator& op,
                                     const VectorField& f);

/// Free heat-kernel mass outside the box for a walk started at x: the oracle
/// is only trusted where this is small.
double external_mass_bound(const Box& box, std::span<const double> x,
                           double t);

/// Delimited text: node coordinates then d (re, im) pairs per line.
void write_mesh_dump(std::ostream& os, const DiscreteOperator& op,
                     std::span<const cxd> values);

}  // namespace fkmc
