#include "fkmc/fields.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <sstream>

#include "fkmc/errors.hpp"
#include "fkmc/parallel.hpp"
#include "fkmc/paths.hpp"

namespace fkmc {

namespace {

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void require_point(std::span<const double> x, int n, const char* op) {
  if (static_cast<int>(x.size()) != n)
    throw ValidationError(std::string(op) + ": point dimension mismatch");
  for (double v : x)
    if (!std::isfinite(v))
      throw ValidationError(std::string(op) + ": non-finite coordinate");
}

/// Skew defect check: Frobenius bounds first, exact operator norm only in the
/// inconclusive band (never hit by the shipped presets).
bool skew_within(const Matrix& m, double tol) {
  double fro = 0.0;
  const int d = m.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) fro += std::norm(m(i, j) + std::conj(m(j, i)));
  fro = std::sqrt(fro);
  if (fro <= tol) return true;
  if (fro > tol * std::sqrt(static_cast<double>(d))) return false;
  return skew_defect(m) <= tol;
}

bool hermitian_within(const Matrix& m, double tol) {
  double fro = 0.0;
  const int d = m.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) fro += std::norm(m(i, j) - std::conj(m(j, i)));
  fro = std::sqrt(fro);
  if (fro <= tol) return true;
  if (fro > tol * std::sqrt(static_cast<double>(d))) return false;
  return hermitian_defect(m) <= tol;
}

Matrix i_sigma1(double c) {  // c * i*sigma_x
  Matrix m(2);
  m(0, 1) = cxd(0.0, c);
  m(1, 0) = cxd(0.0, c);
  return m;
}
Matrix i_sigma2(double c) {  // c * i*sigma_y
  Matrix m(2);
  m(0, 1) = cxd(c, 0.0);
  m(1, 0) = cxd(-c, 0.0);
  return m;
}
Matrix i_sigma3(double c) {  // c * i*sigma_z
  Matrix m(2);
  m(0, 0) = cxd(0.0, c);
  m(1, 1) = cxd(0.0, -c);
  return m;
}

}  // namespace

void GaugeField::evaluate_into(std::span<const double> x,
                               std::span<Matrix> out) const {
  require_point(x, space_dim, "evaluate_gauge");
  components(x, out);
  for (int j = 0; j < space_dim; ++j) {
    if (!out[j].all_finite())
      throw ValidationError("gauge field: non-finite component evaluation");
    if (!skew_within(out[j], tolerance))
      throw ValidationError(
          "gauge field: component not skew-Hermitian within tolerance");
  }
}

std::vector<Matrix> evaluate_gauge(const GaugeField& field,
                                   std::span<const double> x) {
  std::vector<Matrix> out(field.space_dim, Matrix(field.fiber_dim));
  field.evaluate_into(x, out);
  return out;
}

Matrix evaluate_divergence(const GaugeField& field,
                           std::span<const double> x) {
  require_point(x, field.space_dim, "evaluate_divergence");
  if (field.mode == DerivativeMode::none)
    throw UnsupportedError("evaluate_divergence: field has no derivative mode");
  Matrix out(field.fiber_dim);
  if (field.mode == DerivativeMode::analytic) {
    field.analytic_divergence(x, out);
    return out;
  }
  const double h = field.fd_step * (1.0 + norm2(x));
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  std::vector<Matrix> plus(field.space_dim, Matrix(field.fiber_dim));
  std::vector<Matrix> minus(field.space_dim, Matrix(field.fiber_dim));
  for (int j = 0; j < field.space_dim; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    field.evaluate_into(xp, plus);
    field.evaluate_into(xm, minus);
    out.add_scaled(plus[j], cxd(0.5 / h, 0.0));
    out.add_scaled(minus[j], cxd(-0.5 / h, 0.0));
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return out;
}

void Potential::evaluate_into(std::span<const double> x, Matrix& out) const {
  require_point(x, space_dim, "evaluate_potential");
  evaluator(x, out);
  if (!out.all_finite()) {
    if (policy == SingularPolicy::reject)
      throw SampleError("potential evaluation is non-finite at a sample point");
    out.set_identity();
    out *= cxd(clip_max_norm, 0.0);
    return;
  }
  if (policy == SingularPolicy::clip) {
    const double nrm = operator_norm(out);
    if (nrm > clip_max_norm) out *= cxd(clip_max_norm / nrm, 0.0);
  }
  if (!hermitian_within(out, tolerance))
    throw ValidationError("potential: evaluation not Hermitian within tolerance");
  if (nonneg_required) {
    const double lmin = hermitian_eig_range(out).first;
    if (lmin < -tolerance)
      throw DomainError("potential not nonnegative at a sample point");
  }
}

Matrix evaluate_potential(const Potential& pot, std::span<const double> x) {
  Matrix out(pot.fiber_dim);
  pot.evaluate_into(x, out);
  return out;
}

// ---- presets ----------------------------------------------------------

GaugeField make_zero_gauge(int space_dim, int fiber_dim) {
  GaugeField f;
  f.space_dim = space_dim;
  f.fiber_dim = fiber_dim;
  f.identically_zero = true;
  f.mode = DerivativeMode::analytic;
  f.components = [](std::span<const double>, std::span<Matrix> out) {
    for (auto& m : out) m.set_zero();
  };
  f.analytic_divergence = [](std::span<const double>, Matrix& out) {
    out.set_zero();
  };
  return f;
}

GaugeField make_constant_gauge(std::vector<Matrix> alphas) {
  if (alphas.empty()) throw ValidationError("constant gauge: no components");
  GaugeField f;
  f.space_dim = static_cast<int>(alphas.size());
  f.fiber_dim = alphas.front().dim();
  for (const auto& a : alphas) {
    if (a.dim() != f.fiber_dim)
      throw ValidationError("constant gauge: inconsistent fiber dimension");
    if (!a.all_finite() || !skew_within(a, kStructureTol))
      throw ValidationError("constant gauge: component not skew-Hermitian");
  }
  f.mode = DerivativeMode::analytic;
  f.components = [mats = std::move(alphas)](std::span<const double>,
                                            std::span<Matrix> out) {
    for (size_t j = 0; j < mats.size(); ++j) out[j] = mats[j];
  };
  f.analytic_divergence = [](std::span<const double>, Matrix& out) {
    out.set_zero();
  };
  return f;
}

GaugeField make_scalar_magnetic(std::vector<double> b) {
  std::vector<Matrix> mats;
  mats.reserve(b.size());
  for (double bj : b) {
    Matrix m(1);
    m(0, 0) = cxd(0.0, bj);
    mats.push_back(m);
  }
  return make_constant_gauge(std::move(mats));
}

GaugeField make_pauli_like(std::vector<double> b, int fiber_dim) {
  std::vector<Matrix> mats;
  mats.reserve(b.size());
  for (double bj : b) {
    Matrix m = Matrix::identity(fiber_dim);
    m *= cxd(0.0, bj);
    mats.push_back(m);
  }
  return make_constant_gauge(std::move(mats));
}

GaugeField make_su2_rotation(double amplitude, std::vector<double> wavevector) {
  const int n = static_cast<int>(wavevector.size());
  if (n < 1) throw ValidationError("su2_rotation: empty wavevector");
  GaugeField f;
  f.space_dim = n;
  f.fiber_dim = 2;
  f.mode = DerivativeMode::analytic;
  const double a = amplitude;
  auto k = std::move(wavevector);
  f.components = [a, k, n](std::span<const double> x, std::span<Matrix> out) {
    double th = 0.0;
    for (int j = 0; j < n; ++j) th += k[j] * x[j];
    for (int j = 0; j < n; ++j) {
      const double ph = th + j * std::numbers::pi / 3.0;
      out[j] = i_sigma1(a * std::sin(ph));
      out[j] += i_sigma2(a * std::cos(ph));
      out[j] += i_sigma3(0.5 * a);
    }
  };
  f.analytic_divergence = [a, k, n](std::span<const double> x, Matrix& out) {
    double th = 0.0;
    for (int j = 0; j < n; ++j) th += k[j] * x[j];
    out.set_zero();
    for (int j = 0; j < n; ++j) {
      const double ph = th + j * std::numbers::pi / 3.0;
      out += i_sigma1(a * k[j] * std::cos(ph));
      out += i_sigma2(-a * k[j] * std::sin(ph));
    }
  };
  return f;
}

Potential make_zero_potential(int space_dim, int fiber_dim) {
  Potential p;
  p.space_dim = space_dim;
  p.fiber_dim = fiber_dim;
  p.identically_zero = true;
  p.evaluator = [](std::span<const double>, Matrix& out) { out.set_zero(); };
  return p;
}

Potential make_constant_potential(int space_dim, Matrix v,
                                  bool nonneg_required) {
  if (!v.all_finite() || !hermitian_within(v, kStructureTol))
    throw ValidationError("constant potential: matrix not Hermitian");
  Potential p;
  p.space_dim = space_dim;
  p.fiber_dim = v.dim();
  p.nonneg_required = nonneg_required;
  bool zero = true;
  for (int i = 0; i < v.dim() && zero; ++i)
    for (int j = 0; j < v.dim(); ++j)
      if (v(i, j) != cxd(0.0)) {
        zero = false;
        break;
      }
  p.identically_zero = zero;
  p.evaluator = [m = std::move(v)](std::span<const double>, Matrix& out) {
    out = m;
  };
  return p;
}

Potential make_diagonal_polynomial_well(int space_dim,
                                        std::vector<double> weights,
                                        std::vector<double> offsets) {
  if (weights.empty() || weights.size() != offsets.size())
    throw ValidationError("diagonal well: weights/offsets size mismatch");
  Potential p;
  p.space_dim = space_dim;
  p.fiber_dim = static_cast<int>(weights.size());
  p.evaluator = [w = std::move(weights), c = std::move(offsets)](
                    std::span<const double> x, Matrix& out) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    out.set_zero();
    for (size_t j = 0; j < w.size(); ++j)
      out(static_cast<int>(j), static_cast<int>(j)) = w[j] * r2 + c[j];
  };
  return p;
}

Potential truncate_potential(const Potential& pot, double cap) {
  if (!(cap > 0.0)) throw ValidationError("truncate_potential: cap must be > 0");
  Potential out = pot;
  out.evaluator = [inner = pot, cap](std::span<const double> x, Matrix& v) {
    inner.evaluate_into(x, v);
    v = truncate_nonnegative(v, cap, inner.tolerance);
  };
  out.identically_zero = pot.identically_zero;
  return out;
}

// ---- tabulated fields --------------------------------------------------

TabulatedGrid TabulatedGrid::read(std::istream& is, int space_dim,
                                  int values_per_node) {
  TabulatedGrid g;
  g.values_per_node_ = values_per_node;
  struct Row {
    std::vector<double> coord;
    std::vector<cxd> vals;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Row r;
    r.coord.resize(space_dim);
    for (int j = 0; j < space_dim; ++j)
      if (!(ls >> r.coord[j]))
        throw ValidationError("tabulated field: bad coordinate line");
    r.vals.resize(values_per_node);
    for (int j = 0; j < values_per_node; ++j) {
      double re, im;
      if (!(ls >> re >> im))
        throw ValidationError("tabulated field: missing value pair");
      r.vals[j] = cxd(re, im);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("tabulated field: empty table");

  g.axes_.assign(space_dim, {});
  for (int a = 0; a < space_dim; ++a) {
    std::vector<double> coords;
    coords.reserve(rows.size());
    for (const auto& r : rows) coords.push_back(r.coord[a]);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    if (coords.size() < 2)
      throw ValidationError("tabulated field: axis needs at least two nodes");
    g.axes_[a] = std::move(coords);
  }
  std::size_t total = 1;
  g.strides_.assign(space_dim, 0);
  for (int a = space_dim - 1; a >= 0; --a) {
    g.strides_[a] = total;
    total *= g.axes_[a].size();
  }
  if (rows.size() != total)
    throw ValidationError("tabulated field: nodes do not fill a full lattice");
  g.values_.assign(total * values_per_node, cxd(0.0));
  std::vector<bool> seen(total, false);
  for (const auto& r : rows) {
    std::size_t idx = 0;
    for (int a = 0; a < space_dim; ++a) {
      const auto& ax = g.axes_[a];
      const auto it = std::lower_bound(ax.begin(), ax.end(), r.coord[a]);
      if (it == ax.end() || *it != r.coord[a])
        throw ValidationError("tabulated field: off-lattice node");
      idx += static_cast<std::size_t>(it - ax.begin()) * g.strides_[a];
    }
    if (seen[idx])
      throw ValidationError("tabulated field: duplicate lattice node");
    seen[idx] = true;
    std::copy(r.vals.begin(), r.vals.end(),
              g.values_.begin() + static_cast<std::ptrdiff_t>(
                                      idx * values_per_node));
  }
  return g;
}

void TabulatedGrid::interpolate(std::span<const double> x,
                                std::span<cxd> out) const {
  const int n = space_dim();
  std::vector<std::size_t> lo(n);
  std::vector<double> w(n);
  for (int a = 0; a < n; ++a) {
    const auto& ax = axes_[a];
    const double v = std::clamp(x[a], ax.front(), ax.back());
    auto it = std::upper_bound(ax.begin(), ax.end(), v);
    std::size_t hi = std::clamp<std::size_t>(
        static_cast<std::size_t>(it - ax.begin()), 1, ax.size() - 1);
    lo[a] = hi - 1;
    w[a] = (v - ax[lo[a]]) / (ax[hi] - ax[lo[a]]);
  }
  std::fill(out.begin(), out.end(), cxd(0.0));
  const unsigned corners = 1u << n;
  for (unsigned c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::size_t idx = 0;
    for (int a = 0; a < n; ++a) {
      const bool up = (c >> a) & 1u;
      weight *= up ? w[a] : (1.0 - w[a]);
      idx += (lo[a] + (up ? 1 : 0)) * strides_[a];
    }
    if (weight == 0.0) continue;
    const cxd* src = values_.data() + idx * values_per_node_;
    for (int j = 0; j < values_per_node_; ++j) out[j] += weight * src[j];
  }
}

GaugeField make_tabulated_gauge(std::shared_ptr<const TabulatedGrid> grid,
                                int fiber_dim) {
  const int n = grid->space_dim();
  const int d = fiber_dim;
  if (grid->values_per_node() != n * d * d)
    throw ValidationError("tabulated gauge: values per node must be n*d^2");
  GaugeField f;
  f.space_dim = n;
  f.fiber_dim = d;
  f.mode = DerivativeMode::finite_difference;
  f.components = [grid, n, d](std::span<const double> x,
                              std::span<Matrix> out) {
    std::vector<cxd> flat(static_cast<size_t>(n) * d * d);
    grid->interpolate(x, flat);
    for (int j = 0; j < n; ++j) {
      const cxd* src = flat.data() + static_cast<size_t>(j) * d * d;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out[j](r, c) = src[r * d + c];
    }
  };
  return f;
}

Potential make_tabulated_potential(std::shared_ptr<const TabulatedGrid> grid,
                                   int fiber_dim) {
  const int d = fiber_dim;
  if (grid->values_per_node() != d * d)
    throw ValidationError("tabulated potential: values per node must be d^2");
  Potential p;
  p.space_dim = grid->space_dim();
  p.fiber_dim = d;
  p.evaluator = [grid, d](std::span<const double> x, Matrix& out) {
    std::vector<cxd> flat(static_cast<size_t>(d) * d);
    grid->interpolate(x, flat);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out(r, c) = flat[r * d + c];
  };
  return p;
}

// ---- Kato-class diagnostic ----------------------------------------------

KatoResult kato_diagnostic(const Potential& pot,
                           std::span<const std::vector<double>> probes,
                           double t, std::int64_t n_paths, int steps,
                           std::uint64_t seed, int workers) {
  if (!(t > 0.0)) throw DomainError("kato_diagnostic: t must be positive");
  if (n_paths < 2) throw ValidationError("kato_diagnostic: n_paths >= 2");
  if (probes.empty()) throw ValidationError("kato_diagnostic: no probes");

  struct Acc {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t accepted = 0, rejected = 0;
  };

  KatoResult out;
  out.per_probe.reserve(probes.size());
  out.rejected_per_probe.reserve(probes.size());
  const TimeGrid grid(0.0, t, steps);
  const double dt = grid.dt();

  for (size_t p = 0; p < probes.size(); ++p) {
    const std::vector<double>& probe = probes[p];
    const std::uint64_t base = static_cast<std::uint64_t>(p) *
                               static_cast<std::uint64_t>(n_paths);
    Acc total = block_reduce<Acc>(
        n_paths, kReduceBlock, workers, [] { return Acc{}; },
        [&](Acc& acc, std::int64_t i) {
          DiscretePath path = sample_brownian(
              probe, grid, {seed, base + static_cast<std::uint64_t>(i)});
          double integral = 0.0;
          Matrix v(pot.fiber_dim);
          try {
            for (int k = 0; k < steps; ++k) {
              pot.evaluate_into(path.position(k), v);
              const auto [lmin, lmax] = hermitian_eig_range(v);
              integral += std::max(std::abs(lmin), std::abs(lmax)) * dt;
            }
          } catch (const SampleError&) {
            ++acc.rejected;
            return;
          }
          acc.sum += integral;
          acc.sumsq += integral * integral;
          ++acc.accepted;
        },
        [](Acc& a, Acc&& b) {
          a.sum += b.sum;
          a.sumsq += b.sumsq;
          a.accepted += b.accepted;
          a.rejected += b.rejected;
        });

    if (total.accepted == 0)
      throw NumericError(
          "kato_diagnostic: all paths rejected by the singular policy");
    const double mean = total.sum / total.accepted;
    double se = 0.0;
    if (total.accepted > 1) {
      const double var =
          (total.sumsq - total.accepted * mean * mean) / (total.accepted - 1);
      se = std::sqrt(std::max(var, 0.0) / total.accepted);
    }
    out.per_probe.emplace_back(mean, se);
    out.rejected_per_probe.push_back(total.rejected);
    out.sup_estimate = std::max(out.sup_estimate, mean);
  }
  return out;
}

}  // namespace fkmc
