#include "fkmc/paths.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "fkmc/errors.hpp"

namespace fkmc {

namespace {
void require_point(std::span<const double> x, const char* op) {
  if (x.empty()) throw ValidationError(std::string(op) + ": empty point");
  for (double v : x)
    if (!std::isfinite(v))
      throw ValidationError(std::string(op) + ": non-finite coordinate");
}
}  // namespace

TimeGrid::TimeGrid(double start, double end, int n)
    : t_start(start), t_end(end), steps(n) {
  if (!(std::isfinite(start) && std::isfinite(end)) || !(end > start))
    throw ValidationError("TimeGrid: need finite t_end > t_start");
  if (n < 1) throw ValidationError("TimeGrid: steps must be >= 1");
}

double heat_kernel(std::span<const double> x, std::span<const double> y,
                   double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw DomainError("heat_kernel: t must be positive");
  require_point(x, "heat_kernel");
  if (x.size() != y.size())
    throw ValidationError("heat_kernel: dimension mismatch");
  require_point(y, "heat_kernel");
  double d2 = 0.0;
  for (size_t j = 0; j < x.size(); ++j) {
    const double dj = x[j] - y[j];
    d2 += dj * dj;
  }
  const double n = static_cast<double>(x.size());
  return std::pow(2.0 * std::numbers::pi * t, -0.5 * n) *
         std::exp(-d2 / (2.0 * t));
}

DiscretePath sample_brownian(std::span<const double> x, const TimeGrid& grid,
                             RandomnessSpec rng) {
  require_point(x, "sample_brownian");
  const int n = static_cast<int>(x.size());
  const int N = grid.steps;
  DiscretePath path;
  path.grid = grid;
  path.space_dim = n;
  path.kind = PathKind::brownian;
  path.start.assign(x.begin(), x.end());
  path.positions.resize(static_cast<size_t>(N + 1) * n);

  NormalStream stream(rng);
  const double sdt = std::sqrt(grid.dt());
  double* pos = path.positions.data();
  for (int j = 0; j < n; ++j) pos[j] = x[j];
  for (int k = 0; k < N; ++k) {
    const double* prev = pos + static_cast<size_t>(k) * n;
    double* next = pos + static_cast<size_t>(k + 1) * n;
    for (int j = 0; j < n; ++j) next[j] = prev[j] + sdt * stream.next();
  }
  return path;
}

DiscretePath sample_bridge(std::span<const double> x,
                           std::span<const double> y, const TimeGrid& grid,
                           RandomnessSpec rng) {
  require_point(y, "sample_bridge");
  if (x.size() != y.size())
    throw ValidationError("sample_bridge: endpoint dimension mismatch");
  if (grid.t_start != 0.0)
    throw ValidationError("sample_bridge: grid must start at 0");
  DiscretePath path = sample_brownian(x, grid, rng);
  path.kind = PathKind::bridge;
  path.end.assign(y.begin(), y.end());

  const int n = path.space_dim;
  const int N = grid.steps;
  double* pos = path.positions.data();
  const double* wN = pos + static_cast<size_t>(N) * n;
  std::vector<double> slack(n);
  for (int j = 0; j < n; ++j) slack[j] = wN[j] - y[j];
  for (int k = 1; k < N; ++k) {
    const double r = static_cast<double>(k) / N;  // t_k / t on a uniform grid
    double* p = pos + static_cast<size_t>(k) * n;
    for (int j = 0; j < n; ++j) p[j] -= r * slack[j];
  }
  double* last = pos + static_cast<size_t>(N) * n;
  for (int j = 0; j < n; ++j) last[j] = y[j];  // pinned exactly
  return path;
}

DiscretePath reverse(const DiscretePath& path) {
  DiscretePath out;
  out.grid = path.grid;
  out.space_dim = path.space_dim;
  const int n = path.space_dim;
  const int N = path.grid.steps;
  out.positions.resize(path.positions.size());
  for (int k = 0; k <= N; ++k) {
    const double* src =
        path.positions.data() + static_cast<size_t>(N - k) * n;
    double* dst = out.positions.data() + static_cast<size_t>(k) * n;
    for (int j = 0; j < n; ++j) dst[j] = src[j];
  }
  if (path.kind == PathKind::bridge) {
    out.kind = PathKind::bridge;
    out.start = path.end;
    out.end = path.start;
  } else {
    out.kind = PathKind::brownian;
    out.start.assign(out.positions.begin(), out.positions.begin() + n);
  }
  return out;
}

DiscretePath coarsen(const DiscretePath& path, int factor) {
  if (factor < 1 || path.grid.steps % factor != 0)
    throw ValidationError("coarsen: factor must divide steps");
  DiscretePath out;
  out.grid = TimeGrid(path.grid.t_start, path.grid.t_end,
                      path.grid.steps / factor);
  out.space_dim = path.space_dim;
  out.kind = path.kind;
  out.start = path.start;
  out.end = path.end;
  const int n = path.space_dim;
  out.positions.resize(static_cast<size_t>(out.grid.steps + 1) * n);
  for (int k = 0; k <= out.grid.steps; ++k) {
    const double* src =
        path.positions.data() + static_cast<size_t>(k) * factor * n;
    double* dst = out.positions.data() + static_cast<size_t>(k) * n;
    for (int j = 0; j < n; ++j) dst[j] = src[j];
  }
  return out;
}

void dump_path(const DiscretePath& path, std::ostream& os) {
  char buf[32];
  for (int k = 0; k <= path.grid.steps; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", path.grid.node(k));
    os << buf;
    for (double v : path.position(k)) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace fkmc
