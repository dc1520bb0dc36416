#include "fkmc/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include "fkmc/errors.hpp"
#include "fkmc/linalg.hpp"
#include "fkmc/matrix_ode.hpp"
#include "fkmc/reference.hpp"

namespace fkmc {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

fs::path resolve_output(const std::string& configured) {
  fs::path p(configured);
  if (const char* dir = std::getenv("FKMC_OUTPUT_DIR")) {
    if (*dir) p = fs::path(dir) / p.filename();
  }
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write output file: " + p.string());
  os << text;
}

ordered_json complex_json(const cxd& z) {
  return ordered_json::array({z.real(), z.imag()});
}

ordered_json cvec_json(std::span<const cxd> v) {
  ordered_json out = ordered_json::array();
  for (const cxd& z : v) out.push_back(complex_json(z));
  return out;
}

ordered_json matrix_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.dim(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < m.dim(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json base_record(const RunConfig& cfg) {
  ordered_json rec;
  rec["schema_version"] = 1;
  rec["command"] = command_name(cfg.command);
  rec["space_dim"] = cfg.space_dim;
  rec["fiber_dim"] = cfg.fiber_dim;
  if (cfg.command != Command::kato) {
    rec["time"] = cfg.time;
    rec["scheme"] = scheme_name(cfg.scheme.tag);
  }
  rec["steps"] = cfg.steps;
  rec["n_paths"] = cfg.n_paths;
  rec["seed"] = cfg.seed;
  return rec;
}

McRunParams params_of(const RunConfig& cfg) {
  McRunParams p;
  p.t = cfg.time;
  p.steps = cfg.steps;
  p.n_paths = cfg.n_paths;
  p.seed = cfg.seed;
  p.scheme = cfg.scheme;
  p.workers = cfg.workers;
  return p;
}

double combined_sigma(const McEstimate& e) {
  double s = 0.0;
  for (size_t i = 0; i < e.std_error_re.size(); ++i)
    s += e.std_error_re[i] * e.std_error_re[i] +
         e.std_error_im[i] * e.std_error_im[i];
  return std::sqrt(s);
}

double combined_sigma(const KernelEstimate& k) {
  double s = 0.0;
  for (int i = 0; i < k.std_error.dim(); ++i)
    for (int j = 0; j < k.std_error.dim(); ++j)
      s += std::norm(k.std_error(i, j));
  return std::sqrt(s);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_semigroup_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto& blk = *cfg.semigroup;
  log << "[fkmc] semigroup: " << cfg.n_paths << " paths, " << cfg.steps
      << " steps\n";
  McEstimate est =
      apply_semigroup(blk.f, blk.x, cfg.gauge, cfg.potential, params_of(cfg));
  ordered_json rec = base_record(cfg);
  rec["x"] = blk.x;
  rec["value"] = cvec_json(est.value);
  ordered_json se = ordered_json::array();
  for (size_t i = 0; i < est.std_error_re.size(); ++i)
    se.push_back(
        ordered_json::array({est.std_error_re[i], est.std_error_im[i]}));
  rec["std_error"] = se;
  rec["max_sample_norm"] = est.max_sample_norm;
  if (blk.domination) {
    DominationCheck dc = semigroup_domination_check(blk.f, blk.x, cfg.gauge,
                                                    cfg.potential,
                                                    params_of(cfg));
    rec["domination"] = {{"lhs", dc.lhs}, {"rhs", dc.rhs}};
  }
  const fs::path out = resolve_output(cfg.output);
  write_text(out, rec.dump(2) + "\n");
  log << "[fkmc] wrote " << out.string() << "\n";
  return 0;
}

ordered_json kernel_json(const KernelEstimate& k) {
  ordered_json rec;
  rec["prefactor"] = k.prefactor;
  rec["matrix"] = matrix_json(k.matrix);
  rec["bridge_mean"] = matrix_json(k.bridge_mean);
  rec["std_error"] = matrix_json(k.std_error);
  rec["max_sample_norm"] = k.max_sample_norm;
  return rec;
}

int run_kernel_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto& blk = *cfg.kernel;
  log << "[fkmc] kernel: bridge ensemble of " << cfg.n_paths << " paths\n";
  ordered_json rec = base_record(cfg);
  rec["x"] = blk.x;
  rec["y"] = blk.y;
  if (blk.symmetric_pair) {
    auto [kxy, kyx] = kernel_symmetric_pair(blk.x, blk.y, cfg.gauge,
                                            cfg.potential, params_of(cfg));
    rec["estimate"] = kernel_json(kxy);
    rec["reverse_estimate"] = kernel_json(kyx);
    rec["hermitian_defect"] =
        operator_norm(kxy.matrix.adjoint() - kyx.matrix);
  } else {
    KernelEstimate k =
        kernel(blk.x, blk.y, cfg.gauge, cfg.potential, params_of(cfg));
    rec["estimate"] = kernel_json(k);
  }
  const fs::path out = resolve_output(cfg.output);
  write_text(out, rec.dump(2) + "\n");
  log << "[fkmc] wrote " << out.string() << "\n";
  return 0;
}

int run_heatmap_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto& blk = *cfg.heatmap;
  const int d = cfg.fiber_dim;
  log << "[fkmc] heatmap: " << blk.x_grid.count << " x " << blk.y_grid.count
      << " kernel grid\n";
  std::string text;
  text += "# fkmc heatmap schema_version=1 command=heatmap\n";
  text += "# columns: x y";
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      text += " re(K" + std::to_string(r) + std::to_string(c) + ") im(K" +
              std::to_string(r) + std::to_string(c) + ")";
    }
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      text += " se_re(K" + std::to_string(r) + std::to_string(c) + ") se_im(K" +
              std::to_string(r) + std::to_string(c) + ")";
  text += "\n";

  McRunParams params = params_of(cfg);
  std::int64_t pair_index = 0;
  for (int i = 0; i < blk.x_grid.count; ++i) {
    const double xv =
        blk.x_grid.count == 1
            ? blk.x_grid.min
            : blk.x_grid.min + (blk.x_grid.max - blk.x_grid.min) * i /
                                   (blk.x_grid.count - 1);
    for (int j = 0; j < blk.y_grid.count; ++j) {
      const double yv =
          blk.y_grid.count == 1
              ? blk.y_grid.min
              : blk.y_grid.min + (blk.y_grid.max - blk.y_grid.min) * j /
                                     (blk.y_grid.count - 1);
      params.path_index_base =
          static_cast<std::uint64_t>(pair_index++) *
          static_cast<std::uint64_t>(cfg.n_paths);
      KernelEstimate k = kernel({&xv, 1}, {&yv, 1}, cfg.gauge, cfg.potential,
                                params);
      text += fmt(xv) + " " + fmt(yv);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          text += " " + fmt(k.matrix(r, c).real()) + " " +
                  fmt(k.matrix(r, c).imag());
        }
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          text += " " + fmt(k.std_error(r, c).real()) + " " +
                  fmt(k.std_error(r, c).imag());
        }
      text += "\n";
    }
  }
  const fs::path out = resolve_output(cfg.output);
  write_text(out, text);
  log << "[fkmc] wrote " << out.string() << "\n";
  return 0;
}

int run_trace_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto& blk = *cfg.trace;
  log << "[fkmc] trace: lattice quadrature of the kernel diagonal\n";
  TraceEstimate tr = trace_estimate(blk.box_lo, blk.box_hi, blk.resolution,
                                    cfg.gauge, cfg.potential, params_of(cfg));
  ordered_json rec = base_record(cfg);
  rec["box_lo"] = blk.box_lo;
  rec["box_hi"] = blk.box_hi;
  rec["resolution"] = blk.resolution;
  rec["nodes"] = tr.nodes;
  rec["cell_volume"] = tr.cell_volume;
  rec["value"] = tr.value;
  rec["std_error"] = tr.std_error;
  rec["caveat"] =
      "box-truncated quadrature; the full-space trace may be infinite";
  const fs::path out = resolve_output(cfg.output);
  write_text(out, rec.dump(2) + "\n");
  log << "[fkmc] wrote " << out.string() << "\n";
  return 0;
}

int run_kato_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto& blk = *cfg.kato;
  log << "[fkmc] kato: " << blk.probes.size() << " probes, "
      << blk.times.size() << " times\n";
  ordered_json rec = base_record(cfg);
  ordered_json probes = ordered_json::array();
  for (const auto& p : blk.probes) probes.push_back(p);
  rec["probes"] = probes;
  ordered_json by_time = ordered_json::array();
  for (double t : blk.times) {
    KatoResult r = kato_diagnostic(cfg.potential, blk.probes, t, cfg.n_paths,
                                   cfg.steps, cfg.seed, cfg.workers);
    ordered_json entry;
    entry["t"] = t;
    entry["sup_estimate"] = r.sup_estimate;
    ordered_json per = ordered_json::array();
    for (size_t i = 0; i < r.per_probe.size(); ++i) {
      per.push_back({{"mean", r.per_probe[i].first},
                     {"std_error", r.per_probe[i].second},
                     {"rejected", r.rejected_per_probe[i]}});
    }
    entry["per_probe"] = per;
    by_time.push_back(std::move(entry));
  }
  rec["by_time"] = by_time;
  const fs::path out = resolve_output(cfg.output);
  write_text(out, rec.dump(2) + "\n");
  log << "[fkmc] wrote " << out.string() << "\n";
  return 0;
}

int run_validate_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto& blk = *cfg.validate;
  log << "[fkmc] validate: assembling the reference operator\n";
  Box box{blk.box_lo, blk.box_hi};
  DiscreteOperator op = assemble(box, blk.mesh, cfg.gauge, cfg.potential);
  SpectralFactorization fac = factorize(op);
  log << "[fkmc] validate: mesh h=" << op.h
      << ", min eigenvalue=" << fac.min_eigenvalue() << "\n";
  std::vector<cxd> fvec = sample_vector_field(op, blk.f);
  std::vector<cxd> ref = expm_apply(fac, fvec, cfg.time);

  ordered_json rec = base_record(cfg);
  rec["mesh_h"] = op.h;
  rec["min_eigenvalue"] = fac.min_eigenvalue();
  double mass_max = 0.0;
  for (const auto& x : blk.x_probes)
    mass_max = std::max(mass_max, external_mass_bound(box, x, cfg.time));
  rec["external_mass_max"] = mass_max;
  ordered_json rows = ordered_json::array();
  bool all_pass = true;
  const int d = cfg.fiber_dim;

  for (const auto& x : blk.x_probes) {
    McEstimate mc =
        apply_semigroup(blk.f, x, cfg.gauge, cfg.potential, params_of(cfg));
    const std::int64_t node = op.coord_node(x);
    double err2 = 0.0, refn2 = 0.0;
    for (int l = 0; l < d; ++l) {
      const cxd rv = ref[static_cast<size_t>(node * d + l)];
      err2 += std::norm(mc.value[static_cast<size_t>(l)] - rv);
      refn2 += std::norm(rv);
    }
    const double err = std::sqrt(err2);
    const double refn = std::sqrt(refn2);
    const double tol = std::max(blk.sigma * combined_sigma(mc),
                                blk.semigroup_rel_floor * refn);
    const bool pass = err <= tol;
    all_pass = all_pass && pass;
    ordered_json row;
    row["kind"] = "semigroup";
    row["x"] = x;
    row["error"] = err;
    row["reference_norm"] = refn;
    row["tolerance"] = tol;
    row["relative_error"] = refn > 0 ? err / refn : 0.0;
    row["pass"] = pass;
    rows.push_back(row);
    log << "[fkmc] semigroup probe x=" << x[0] << ": err " << err << " tol "
        << tol << (pass ? " PASS" : " FAIL") << "\n";
  }

  McRunParams kparams = params_of(cfg);
  if (blk.kernel_paths > 0) kparams.n_paths = blk.kernel_paths;
  std::uint64_t base = 1'000'000'000ull;  // keep streams off the semigroup runs
  for (const auto& [x, y] : blk.kernel_pairs) {
    kparams.path_index_base = base;
    base += static_cast<std::uint64_t>(kparams.n_paths);
    KernelEstimate mc = kernel(x, y, cfg.gauge, cfg.potential, kparams);
    const std::int64_t xn = op.coord_node(x);
    const std::int64_t yn = op.coord_node(y);
    std::vector<cxd> col = kernel_column(op, fac, yn, cfg.time);
    Matrix kref(d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        kref(r, c) = col[static_cast<size_t>(c) * op.dim() +
                         static_cast<size_t>(xn * d + r)];
    const double err = operator_norm(mc.matrix - kref);
    const double refn = operator_norm(kref);
    const double tol = std::max(blk.sigma * combined_sigma(mc),
                                blk.kernel_rel_floor * refn);
    const bool pass = err <= tol;
    all_pass = all_pass && pass;
    ordered_json row;
    row["kind"] = "kernel";
    row["x"] = x;
    row["y"] = y;
    row["error"] = err;
    row["reference_norm"] = refn;
    row["tolerance"] = tol;
    row["relative_error"] = refn > 0 ? err / refn : 0.0;
    row["pass"] = pass;
    rows.push_back(row);
    log << "[fkmc] kernel pair (" << x[0] << "," << y[0] << "): err " << err
        << " tol " << tol << (pass ? " PASS" : " FAIL") << "\n";
  }

  rec["rows"] = rows;
  rec["all_pass"] = all_pass;
  const fs::path out = resolve_output(cfg.output);
  write_text(out, rec.dump(2) + "\n");
  log << "[fkmc] wrote " << out.string() << "\n";
  return all_pass ? 0 : 4;
}

}  // namespace

int run_selftest(std::uint64_t seed, int workers, std::ostream& log) {
  bool all = true;
  auto report = [&](const char* name, bool ok, double detail) {
    all = all && ok;
    log << (ok ? "[ ok ] " : "[FAIL] ") << name << " (" << detail << ")\n";
  };
  std::mt19937_64 gen(seed ^ 0x5eedf00dULL);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  {
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 200; ++trial) {
      const int d = 1 + static_cast<int>(gen() % 4);
      Matrix g(d);
      std::normal_distribution<double> nd;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = cxd(nd(gen), nd(gen));
      Matrix s(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          s(i, j) = 0.5 * (g(i, j) - std::conj(g(j, i)));
      const double defect = unitarity_defect(matrix_exp(s));
      const double bound = 16.0 * d * eps * (1.0 + operator_norm(s));
      worst = std::max(worst, defect / bound);
      ok = ok && defect <= bound;
    }
    report("matrix_exp unitarity on skew-Hermitian input", ok, worst);
  }
  {
    const double x[1] = {0.4}, y[1] = {-0.9};
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      DiscretePath b = sample_bridge({x, 1}, {y, 1}, TimeGrid(0.0, 1.0, 32),
                                     {seed, (std::uint64_t)i});
      ok = ok && b.position(0)[0] == x[0] && b.position(32)[0] == y[0];
      DiscretePath r = reverse(b);
      ok = ok && reverse(r).positions == b.positions;
    }
    report("bridge endpoints pinned, reversal is an involution", ok, 0.0);
  }
  {
    Matrix a(2);
    a(0, 0) = cxd(0.0, 0.3);
    a(1, 1) = cxd(0.0, -0.3);
    a(0, 1) = cxd(0.5, 0.8);
    a(1, 0) = cxd(-0.5, 0.8);
    auto gauge = make_constant_gauge({a});
    auto pot = make_diagonal_polynomial_well(1, {1.0, 0.5}, {0.0, 0.25});
    auto zero_pot = make_zero_potential(1, 2);
    const int N = 128;
    double worst_mult = 0.0, worst_unit = 0.0, worst_norm = 0.0,
           worst_rev = 0.0;
    Scheme scheme{SchemeTag::exp_midpoint, 1e-10};
    for (int i = 0; i < 50; ++i) {
      const double x0[1] = {0.1};
      DiscretePath p =
          sample_brownian({x0, 1}, TimeGrid(0.0, 1.0, N), {seed + 1, (std::uint64_t)i});
      const int split = 1 + static_cast<int>(gen() % (N - 1));
      Matrix whole = transport(p, 0, N, gauge, pot, scheme).matrix;
      Matrix lr = transport(p, 0, split, gauge, pot, scheme).matrix *
                  transport(p, split, N, gauge, pot, scheme).matrix;
      worst_mult = std::max(worst_mult, operator_norm(whole - lr));
      auto free_run = transport(p, 0, N, gauge, zero_pot, scheme);
      worst_unit =
          std::max(worst_unit, *free_run.diagnostics.unitarity_defect);
      worst_norm = std::max(
          worst_norm, transport(p, 0, N, gauge, pot, scheme).diagnostics.norm);
      worst_rev =
          std::max(worst_rev, adjoint_reversal_check(p, gauge, pot, scheme));
    }
    report("transport multiplicativity", worst_mult <= 1e-11 * N, worst_mult);
    report("transport unitarity (V=0)", worst_unit <= 16.0 * 2 * eps * N,
           worst_unit);
    report("transport contraction (V>=0)",
           worst_norm <= 1.0 + 64.0 * 2 * eps * N, worst_norm);
    report("adjoint-reversal identity", worst_rev <= 1e-10, worst_rev);
  }
  {
    std::normal_distribution<double> nd;
    bool ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int d = 2 + static_cast<int>(gen() % 3);
      Matrix h1(d), h2(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          h1(i, j) = cxd(nd(gen), nd(gen));
          h2(i, j) = cxd(nd(gen), nd(gen));
        }
      auto herm = [](const Matrix& g) {
        Matrix out(g.dim());
        for (int i = 0; i < g.dim(); ++i)
          for (int j = 0; j < g.dim(); ++j)
            out(i, j) = 0.5 * (g(i, j) + std::conj(g(j, i)));
        return out;
      };
      Matrix f1 = herm(h1), f2 = herm(h2);
      MatrixOdeProblem p{0.0, 0.7, d, [&](double s, Matrix& out) {
                           out = f1;
                           out.add_scaled(f2, cxd(std::sin(s), 0.0));
                         }};
      auto c = [&](double s) {
        Matrix m = f1;
        m.add_scaled(f2, cxd(std::sin(s), 0.0));
        return hermitian_eig_range(m).second;
      };
      auto nb = bound_check_a(p, c, 64);
      ok = ok && nb.lhs <= nb.rhs * (1.0 + 1e-8);
      worst = std::max(worst, nb.lhs / nb.rhs);
      auto db = bound_check_b([&](double s, Matrix& m) { p.rhs(s, m); },
                              [&](double, Matrix& m) { m = f2; }, d, 0.0, 0.7,
                              64);
      ok = ok && db.diff <= db.bound * (1.0 + 1e-8);
    }
    report("matrix-ODE Gronwall bounds", ok, worst);
  }
  {
    auto gauge = make_su2_rotation(0.8, {1.0});
    auto pot = make_diagonal_polynomial_well(1, {1.0, 0.5}, {0.0, 0.25});
    auto f = make_gaussian_bump({0.0}, 1.0, {cxd(1.0, 0.0), cxd(0.0, 1.0)});
    const double x[1] = {0.1};
    McRunParams p1;
    p1.t = 0.5;
    p1.steps = 32;
    p1.n_paths = 1024;
    p1.seed = seed;
    p1.scheme = Scheme{SchemeTag::exp_midpoint, 1e-10};
    p1.workers = 1;
    McRunParams p2 = p1;
    p2.workers = std::max(2, workers);
    auto a = apply_semigroup(f, {x, 1}, gauge, pot, p1);
    auto b = apply_semigroup(f, {x, 1}, gauge, pot, p2);
    report("worker-count independence of estimates", a.value == b.value, 0.0);
  }
  log << (all ? "[fkmc] selftest passed\n" : "[fkmc] selftest FAILED\n");
  return all ? 0 : 4;
}

int run_command(const RunConfig& cfg, std::ostream& log) {
  try {
    switch (cfg.command) {
      case Command::semigroup:
        return run_semigroup_cmd(cfg, log);
      case Command::kernel:
        return run_kernel_cmd(cfg, log);
      case Command::heatmap:
        return run_heatmap_cmd(cfg, log);
      case Command::trace:
        return run_trace_cmd(cfg, log);
      case Command::kato:
        return run_kato_cmd(cfg, log);
      case Command::validate:
        return run_validate_cmd(cfg, log);
      case Command::selftest:
        return run_selftest(cfg.seed, cfg.workers, log);
    }
  } catch (const ConfigError& e) {
    log << "[fkmc] config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    log << "[fkmc] numeric error: " << e.what();
    if (e.step >= 0) log << " [step " << e.step << "]";
    if (e.path >= 0) log << " [path " << e.path << "]";
    log << "\n";
    return 3;
  } catch (const ValidationError& e) {
    log << "[fkmc] invalid input: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    log << "[fkmc] domain error: " << e.what() << "\n";
    return 2;
  } catch (const SampleError& e) {
    log << "[fkmc] sample rejected: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace fkmc
