#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "fkmc/rng.hpp"

namespace fkmc {

/// Uniform grid on [t_start, t_end] with N steps.  t_start is 0 in all
/// public uses.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  int steps = 0;

  TimeGrid() = default;
  TimeGrid(double start, double end, int n);

  double dt() const { return (t_end - t_start) / steps; }
  double node(int k) const { return t_start + k * dt(); }
};

enum class PathKind { brownian, bridge };

/// A sampled Brownian motion or bridge: grid plus (N+1) positions in R^n.
/// Increments are recomputed from positions (bit-identical by construction).
struct DiscretePath {
  TimeGrid grid;
  int space_dim = 0;
  PathKind kind = PathKind::brownian;
  std::vector<double> start;
  std::vector<double> end;  // bridge only
  std::vector<double> positions;  // (steps+1) * space_dim, node-major

  std::span<const double> position(int k) const {
    return {positions.data() + static_cast<size_t>(k) * space_dim,
            static_cast<size_t>(space_dim)};
  }
  void increment(int k, double* out) const {
    const double* a = positions.data() + static_cast<size_t>(k) * space_dim;
    for (int j = 0; j < space_dim; ++j) out[j] = a[space_dim + j] - a[j];
  }
};

/// Flat heat kernel p_t(x,y) = (2 pi t)^{-n/2} exp(-|x-y|^2 / (2t)).
double heat_kernel(std::span<const double> x, std::span<const double> y,
                   double t);

DiscretePath sample_brownian(std::span<const double> x, const TimeGrid& grid,
                             RandomnessSpec rng);

/// Endpoint-pinning construction: X_k = W_k - (t_k/t)(W_N - y) from a
/// Brownian path W started at x.  Exact discrete bridge law on uniform grids;
/// positions[N] = y exactly.
DiscretePath sample_bridge(std::span<const double> x,
                           std::span<const double> y, const TimeGrid& grid,
                           RandomnessSpec rng);

/// Positions reversed in order; bridge(x,y) becomes bridge(y,x).  Involution.
DiscretePath reverse(const DiscretePath& path);

/// Keep every factor-th node (steps must divide evenly).  Used to compare
/// schemes on the same Brownian refinement.
DiscretePath coarsen(const DiscretePath& path, int factor);

/// One line per node: time then coordinates.
void dump_path(const DiscretePath& path, std::ostream& os);

}  // namespace fkmc
