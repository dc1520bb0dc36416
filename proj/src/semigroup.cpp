#include "fkmc/semigroup.hpp"

#include <cmath>

#include "fkmc/errors.hpp"
#include "fkmc/linalg.hpp"
#include "fkmc/parallel.hpp"
#include "fkmc/paths.hpp"

namespace fkmc {

namespace {

void require_semigroup_args(const GaugeField& gauge, const Potential& pot,
                            const McRunParams& params) {
  if (!(params.t > 0.0)) throw DomainError("semigroup: t must be positive");
  if (params.steps < 1) throw ValidationError("semigroup: steps must be >= 1");
  if (params.n_paths < 1)
    throw ValidationError("semigroup: n_paths must be >= 1");
  if (gauge.fiber_dim != pot.fiber_dim || gauge.space_dim != pot.space_dim)
    throw ValidationError("semigroup: field dimension mismatch");
  if (!pot.nonneg_required)
    throw DomainError(
        "semigroup operations require the nonnegative-potential contract");
}

double vec_norm(std::span<const cxd> v) {
  double s = 0.0;
  for (const cxd& z : v) s += std::norm(z);
  return std::sqrt(s);
}

struct VecAcc {
  std::vector<cxd> sum;
  std::vector<double> sumsq_re, sumsq_im;
  double fnorm_sum = 0.0;
  double max_norm = 0.0;
  explicit VecAcc(int d)
      : sum(d, cxd(0.0)), sumsq_re(d, 0.0), sumsq_im(d, 0.0) {}
};

void merge_vec(VecAcc& a, VecAcc&& b) {
  for (size_t i = 0; i < a.sum.size(); ++i) {
    a.sum[i] += b.sum[i];
    a.sumsq_re[i] += b.sumsq_re[i];
    a.sumsq_im[i] += b.sumsq_im[i];
  }
  a.fnorm_sum += b.fnorm_sum;
  a.max_norm = std::max(a.max_norm, b.max_norm);
}

struct VectorRun {
  McEstimate estimate;
  double mean_f_norm = 0.0;
};

VectorRun run_vector_ensemble(const VectorField& f, std::span<const double> x,
                              const GaugeField& gauge, const Potential& pot,
                              const McRunParams& params) {
  require_semigroup_args(gauge, pot, params);
  if (f.space_dim != gauge.space_dim || f.fiber_dim != gauge.fiber_dim)
    throw ValidationError("semigroup: vector field dimension mismatch");
  const int d = gauge.fiber_dim;
  const TimeGrid grid(0.0, params.t, params.steps);
  std::vector<double> probe(x.begin(), x.end());

  VecAcc total = block_reduce<VecAcc>(
      params.n_paths, kReduceBlock, params.workers,
      [d] { return VecAcc(d); },
      [&](VecAcc& acc, std::int64_t i) {
        const RandomnessSpec spec{
            params.seed,
            params.path_index_base + static_cast<std::uint64_t>(i)};
        DiscretePath path = sample_brownian(probe, grid, spec);
        TransportResult tr;
        try {
          tr = transport(path, 0, params.steps, gauge, pot, params.scheme);
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " (path " +
                                 std::to_string(i) + ")",
                             e.step, i);
        }
        std::vector<cxd> fv(d), sample(d);
        f.eval(path.position(params.steps), fv);
        for (const cxd& z : fv)
          if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw ValidationError("vector field: non-finite evaluation");
        tr.matrix.apply(fv, sample);
        acc.fnorm_sum += vec_norm(fv);
        acc.max_norm = std::max(acc.max_norm, vec_norm(sample));
        for (int j = 0; j < d; ++j) {
          acc.sum[j] += sample[j];
          acc.sumsq_re[j] += sample[j].real() * sample[j].real();
          acc.sumsq_im[j] += sample[j].imag() * sample[j].imag();
        }
      },
      merge_vec);

  const auto n = params.n_paths;
  VectorRun out;
  out.estimate.value.resize(d);
  out.estimate.std_error_re.resize(d);
  out.estimate.std_error_im.resize(d);
  for (int j = 0; j < d; ++j) {
    const cxd mean = total.sum[j] / static_cast<double>(n);
    out.estimate.value[j] = mean;
    auto se = [n](double sumsq, double m) {
      if (n < 2) return 0.0;
      const double var = (sumsq - n * m * m) / (n - 1);
      return std::sqrt(std::max(var, 0.0) / n);
    };
    out.estimate.std_error_re[j] = se(total.sumsq_re[j], mean.real());
    out.estimate.std_error_im[j] = se(total.sumsq_im[j], mean.imag());
  }
  out.estimate.max_sample_norm = total.max_norm;
  out.estimate.n_paths = n;
  out.estimate.seed = params.seed;
  out.estimate.scheme = params.scheme;
  out.mean_f_norm = total.fnorm_sum / static_cast<double>(n);
  return out;
}

struct MatAcc {
  Matrix sum;
  std::vector<double> sumsq_re, sumsq_im;  // d*d each
  double max_norm = 0.0;
  explicit MatAcc(int d)
      : sum(d),
        sumsq_re(static_cast<size_t>(d) * d, 0.0),
        sumsq_im(static_cast<size_t>(d) * d, 0.0) {}
};

void merge_mat(MatAcc& a, MatAcc&& b) {
  a.sum += b.sum;
  for (size_t i = 0; i < a.sumsq_re.size(); ++i) {
    a.sumsq_re[i] += b.sumsq_re[i];
    a.sumsq_im[i] += b.sumsq_im[i];
  }
  a.max_norm = std::max(a.max_norm, b.max_norm);
}

void accumulate_matrix(MatAcc& acc, const Matrix& m) {
  const int d = m.dim();
  acc.sum += m;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const size_t idx = static_cast<size_t>(i) * d + j;
      acc.sumsq_re[idx] += m(i, j).real() * m(i, j).real();
      acc.sumsq_im[idx] += m(i, j).imag() * m(i, j).imag();
    }
}

KernelEstimate finalize_kernel(const MatAcc& acc, double prefactor,
                               const McRunParams& params) {
  const int d = acc.sum.dim();
  const auto n = params.n_paths;
  KernelEstimate out;
  out.prefactor = prefactor;
  out.bridge_mean = acc.sum;
  out.bridge_mean *= cxd(1.0 / static_cast<double>(n), 0.0);
  out.matrix = out.bridge_mean;
  out.matrix *= cxd(prefactor, 0.0);
  out.std_error = Matrix(d);
  auto se = [n](double sumsq, double m) {
    if (n < 2) return 0.0;
    const double var = (sumsq - n * m * m) / (n - 1);
    return std::sqrt(std::max(var, 0.0) / n);
  };
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const size_t idx = static_cast<size_t>(i) * d + j;
      const cxd mean = out.bridge_mean(i, j);
      out.std_error(i, j) =
          prefactor * cxd(se(acc.sumsq_re[idx], mean.real()),
                          se(acc.sumsq_im[idx], mean.imag()));
    }
  out.max_sample_norm = acc.max_norm;
  out.n_paths = n;
  out.seed = params.seed;
  out.scheme = params.scheme;
  return out;
}

}  // namespace

VectorField make_gaussian_bump(std::vector<double> center, double width,
                               std::vector<cxd> direction) {
  if (!(width > 0.0)) throw ValidationError("gaussian_bump: width must be > 0");
  if (center.empty() || direction.empty())
    throw ValidationError("gaussian_bump: empty center or direction");
  VectorField f;
  f.space_dim = static_cast<int>(center.size());
  f.fiber_dim = static_cast<int>(direction.size());
  double dn = 0.0;
  for (const cxd& z : direction) dn += std::norm(z);
  f.sup_norm_hint = std::sqrt(dn);
  f.eval = [c = std::move(center), w2 = 2.0 * width * width,
            dir = std::move(direction)](std::span<const double> x,
                                        std::span<cxd> out) {
    double r2 = 0.0;
    for (size_t j = 0; j < c.size(); ++j)
      r2 += (x[j] - c[j]) * (x[j] - c[j]);
    const double g = std::exp(-r2 / w2);
    for (size_t j = 0; j < dir.size(); ++j) out[j] = g * dir[j];
  };
  return f;
}

VectorField make_coordinate_indicator(int space_dim, int fiber_dim,
                                      int component) {
  if (component < 0 || component >= fiber_dim)
    throw ValidationError("coordinate_indicator: component out of range");
  VectorField f;
  f.space_dim = space_dim;
  f.fiber_dim = fiber_dim;
  f.sup_norm_hint = 1.0;
  f.eval = [component](std::span<const double>, std::span<cxd> out) {
    std::fill(out.begin(), out.end(), cxd(0.0));
    out[component] = 1.0;
  };
  return f;
}

VectorField make_tabulated_vector_field(
    std::shared_ptr<const TabulatedGrid> grid, int fiber_dim) {
  if (grid->values_per_node() != fiber_dim)
    throw ValidationError("tabulated vector field: values per node must be d");
  VectorField f;
  f.space_dim = grid->space_dim();
  f.fiber_dim = fiber_dim;
  f.eval = [grid](std::span<const double> x, std::span<cxd> out) {
    grid->interpolate(x, out);
  };
  return f;
}

McEstimate apply_semigroup(const VectorField& f, std::span<const double> x,
                           const GaugeField& gauge, const Potential& pot,
                           const McRunParams& params) {
  return run_vector_ensemble(f, x, gauge, pot, params).estimate;
}

DominationCheck semigroup_domination_check(const VectorField& f,
                                           std::span<const double> x,
                                           const GaugeField& gauge,
                                           const Potential& pot,
                                           const McRunParams& params) {
  VectorRun run = run_vector_ensemble(f, x, gauge, pot, params);
  DominationCheck out;
  out.lhs = vec_norm(run.estimate.value);
  out.rhs = run.mean_f_norm;
  return out;
}

KernelEstimate kernel(std::span<const double> x, std::span<const double> y,
                      const GaugeField& gauge, const Potential& pot,
                      const McRunParams& params) {
  require_semigroup_args(gauge, pot, params);
  const int d = gauge.fiber_dim;
  const TimeGrid grid(0.0, params.t, params.steps);
  std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());

  MatAcc total = block_reduce<MatAcc>(
      params.n_paths, kReduceBlock, params.workers,
      [d] { return MatAcc(d); },
      [&](MatAcc& acc, std::int64_t i) {
        const RandomnessSpec spec{
            params.seed,
            params.path_index_base + static_cast<std::uint64_t>(i)};
        DiscretePath path = sample_bridge(xs, ys, grid, spec);
        TransportResult tr =
            transport(path, 0, params.steps, gauge, pot, params.scheme);
        accumulate_matrix(acc, tr.matrix);
        acc.max_norm = std::max(acc.max_norm, tr.diagnostics.norm);
      },
      merge_mat);

  return finalize_kernel(total, heat_kernel(xs, ys, params.t), params);
}

std::pair<KernelEstimate, KernelEstimate> kernel_symmetric_pair(
    std::span<const double> x, std::span<const double> y,
    const GaugeField& gauge, const Potential& pot, const McRunParams& params) {
  require_semigroup_args(gauge, pot, params);
  const int d = gauge.fiber_dim;
  const TimeGrid grid(0.0, params.t, params.steps);
  std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());

  struct PairAcc {
    MatAcc fwd, rev;
    explicit PairAcc(int dd) : fwd(dd), rev(dd) {}
  };
  PairAcc total = block_reduce<PairAcc>(
      params.n_paths, kReduceBlock, params.workers,
      [d] { return PairAcc(d); },
      [&](PairAcc& acc, std::int64_t i) {
        const RandomnessSpec spec{
            params.seed,
            params.path_index_base + static_cast<std::uint64_t>(i)};
        DiscretePath path = sample_bridge(xs, ys, grid, spec);
        TransportResult fwd =
            transport(path, 0, params.steps, gauge, pot, params.scheme);
        accumulate_matrix(acc.fwd, fwd.matrix);
        acc.fwd.max_norm = std::max(acc.fwd.max_norm, fwd.diagnostics.norm);
        // The reversed path is a y->x bridge sample under the same stream.
        TransportResult rev = transport(reverse(path), 0, params.steps, gauge,
                                        pot, params.scheme);
        accumulate_matrix(acc.rev, rev.matrix);
        acc.rev.max_norm = std::max(acc.rev.max_norm, rev.diagnostics.norm);
      },
      [](PairAcc& a, PairAcc&& b) {
        merge_mat(a.fwd, std::move(b.fwd));
        merge_mat(a.rev, std::move(b.rev));
      });

  const double p = heat_kernel(xs, ys, params.t);
  return {finalize_kernel(total.fwd, p, params),
          finalize_kernel(total.rev, p, params)};
}

KernelConsistency kernel_consistency(const VectorField& f,
                                     std::span<const double> x,
                                     std::span<const double> box_lo,
                                     std::span<const double> box_hi,
                                     int nodes_per_axis,
                                     const GaugeField& gauge,
                                     const Potential& pot,
                                     const McRunParams& params) {
  require_semigroup_args(gauge, pot, params);
  const int n = gauge.space_dim;
  const int d = gauge.fiber_dim;
  if (static_cast<int>(box_lo.size()) != n ||
      static_cast<int>(box_hi.size()) != n)
    throw ValidationError("kernel_consistency: box dimension mismatch");
  if (nodes_per_axis < 1)
    throw ValidationError("kernel_consistency: nodes_per_axis must be >= 1");

  std::int64_t total_nodes = 1;
  double cell = 1.0;
  std::vector<double> h(n);
  for (int a = 0; a < n; ++a) {
    if (!(box_hi[a] > box_lo[a]))
      throw ValidationError("kernel_consistency: empty box");
    h[a] = (box_hi[a] - box_lo[a]) / nodes_per_axis;
    cell *= h[a];
    total_nodes *= nodes_per_axis;
  }

  KernelConsistency out;
  out.cell_volume = cell;
  out.quadrature_nodes = total_nodes;
  out.via_kernel.assign(d, cxd(0.0));

  std::vector<double> yq(n);
  std::vector<cxd> fy(d), contrib(d);
  for (std::int64_t q = 0; q < total_nodes; ++q) {
    std::int64_t rem = q;
    for (int a = n - 1; a >= 0; --a) {
      const std::int64_t idx = rem % nodes_per_axis;
      rem /= nodes_per_axis;
      yq[a] = box_lo[a] + (idx + 0.5) * h[a];  // cell midpoints
    }
    McRunParams node_params = params;
    node_params.path_index_base =
        params.path_index_base +
        static_cast<std::uint64_t>(q) * static_cast<std::uint64_t>(
                                            params.n_paths);
    KernelEstimate k = kernel(x, yq, gauge, pot, node_params);
    f.eval(yq, fy);
    k.matrix.apply(fy, contrib);
    for (int j = 0; j < d; ++j) out.via_kernel[j] += contrib[j] * cell;
  }

  McRunParams direct_params = params;
  direct_params.path_index_base =
      params.path_index_base +
      static_cast<std::uint64_t>(total_nodes) *
          static_cast<std::uint64_t>(params.n_paths);
  out.direct = apply_semigroup(f, x, gauge, pot, direct_params);
  return out;
}

TraceEstimate trace_estimate(std::span<const double> box_lo,
                             std::span<const double> box_hi, double resolution,
                             const GaugeField& gauge, const Potential& pot,
                             const McRunParams& params) {
  require_semigroup_args(gauge, pot, params);
  const int n = gauge.space_dim;
  if (static_cast<int>(box_lo.size()) != n ||
      static_cast<int>(box_hi.size()) != n)
    throw ValidationError("trace_estimate: box dimension mismatch");
  if (!(resolution > 0.0))
    throw ValidationError("trace_estimate: resolution must be > 0");

  std::vector<std::int64_t> counts(n);
  std::int64_t total_nodes = 1;
  for (int a = 0; a < n; ++a) {
    if (!(box_hi[a] > box_lo[a]))
      throw ValidationError("trace_estimate: empty box");
    counts[a] = static_cast<std::int64_t>(
                    std::floor((box_hi[a] - box_lo[a]) / resolution + 1e-9)) +
                1;
    total_nodes *= counts[a];
  }
  const double cell = std::pow(resolution, n);

  TraceEstimate out;
  out.nodes = total_nodes;
  out.cell_volume = cell;

  std::vector<double> xq(n);
  for (std::int64_t q = 0; q < total_nodes; ++q) {
    std::int64_t rem = q;
    for (int a = n - 1; a >= 0; --a) {
      const std::int64_t idx = rem % counts[a];
      rem /= counts[a];
      xq[a] = box_lo[a] + static_cast<double>(idx) * resolution;
    }
    McRunParams node_params = params;
    node_params.path_index_base =
        params.path_index_base +
        static_cast<std::uint64_t>(q) * static_cast<std::uint64_t>(
                                            params.n_paths);
    KernelEstimate k = kernel(xq, xq, gauge, pot, node_params);
    double tr = 0.0, var = 0.0;
    for (int j = 0; j < k.matrix.dim(); ++j) {
      tr += k.matrix(j, j).real();
      var += k.std_error(j, j).real() * k.std_error(j, j).real();
    }
    out.value += tr * cell;
    out.std_error += var * cell * cell;
  }
  out.std_error = std::sqrt(out.std_error);
  return out;
}

std::vector<std::pair<double, double>> small_time_statistic(
    std::span<const std::vector<double>> probes, std::span<const double> ts,
    const GaugeField& gauge, const Potential& pot, const McRunParams& params) {
  if (probes.empty())
    throw ValidationError("small_time_statistic: no probes");
  struct ScalarAcc {
    double sum = 0.0, sumsq = 0.0;
  };
  const int d = gauge.fiber_dim;
  std::vector<std::pair<double, double>> out;
  out.reserve(ts.size());
  for (double t : ts) {
    McRunParams p = params;
    p.t = t;
    require_semigroup_args(gauge, pot, p);
    const TimeGrid grid(0.0, t, p.steps);
    double best_mean = -1.0, best_se = 0.0;
    for (size_t pi = 0; pi < probes.size(); ++pi) {
      const std::uint64_t base =
          p.path_index_base +
          static_cast<std::uint64_t>(pi) * static_cast<std::uint64_t>(
                                               p.n_paths);
      ScalarAcc acc = block_reduce<ScalarAcc>(
          p.n_paths, kReduceBlock, p.workers, [] { return ScalarAcc{}; },
          [&](ScalarAcc& a, std::int64_t i) {
            DiscretePath path = sample_brownian(
                probes[pi], grid,
                {p.seed, base + static_cast<std::uint64_t>(i)});
            TransportResult tr =
                transport(path, 0, p.steps, gauge, pot, p.scheme);
            const double dev =
                operator_norm(tr.matrix - Matrix::identity(d));
            a.sum += dev;
            a.sumsq += dev * dev;
          },
          [](ScalarAcc& a, ScalarAcc&& b) {
            a.sum += b.sum;
            a.sumsq += b.sumsq;
          });
      const double mean = acc.sum / static_cast<double>(p.n_paths);
      const double var =
          (acc.sumsq - p.n_paths * mean * mean) / (p.n_paths - 1);
      const double se = std::sqrt(std::max(var, 0.0) / p.n_paths);
      if (mean > best_mean) {
        best_mean = mean;
        best_se = se;
      }
    }
    out.emplace_back(best_mean, best_se);
  }
  return out;
}

}  // namespace fkmc
