#include "fkmc/transport.hpp"

#include <cmath>
#include <string>

#include "fkmc/errors.hpp"
#include "fkmc/linalg.hpp"

namespace fkmc {

namespace {

struct StepContext {
  std::vector<double> mid, dx;
  std::vector<Matrix> alpha;
  Matrix vmat;

  StepContext(int n, int d)
      : mid(n), dx(n), alpha(static_cast<size_t>(n), Matrix(d)), vmat(d) {}

  void load(const DiscretePath& path, int k, const GaugeField& gauge) {
    const int n = path.space_dim;
    const double* a = path.positions.data() + static_cast<size_t>(k) * n;
    for (int j = 0; j < n; ++j) {
      mid[j] = 0.5 * (a[j] + a[n + j]);
      dx[j] = a[n + j] - a[j];
    }
    gauge.evaluate_into(mid, alpha);
  }
};

void validate_args(const DiscretePath& path, int start, int end,
                   const GaugeField& gauge, const Potential& pot) {
  if (gauge.space_dim != path.space_dim || pot.space_dim != path.space_dim)
    throw ValidationError("transport: space dimension mismatch");
  if (gauge.fiber_dim != pot.fiber_dim)
    throw ValidationError("transport: fiber dimension mismatch");
  if (start < 0 || end > path.grid.steps || start > end)
    throw ValidationError("transport: invalid segment indices");
}

double potential_norm(const Matrix& v) {
  const auto [lmin, lmax] = hermitian_eig_range(v);
  return std::max(std::abs(lmin), std::abs(lmax));
}

/// exponent += sum_j alpha_j dx^j
void add_gauge_exponent(const StepContext& ctx, Matrix& exponent) {
  for (size_t j = 0; j < ctx.alpha.size(); ++j)
    exponent.add_scaled(ctx.alpha[j], cxd(ctx.dx[j], 0.0));
}

void check_finite(const Matrix& m, const char* what, int k) {
  if (!m.all_finite()) throw NumericError(std::string(what), k);
}

}  // namespace

const char* scheme_name(SchemeTag tag) {
  switch (tag) {
    case SchemeTag::exp_midpoint:
      return "exp_midpoint";
    case SchemeTag::product_integral:
      return "product_integral";
    case SchemeTag::interaction_picture:
      return "interaction_picture";
  }
  return "?";
}

SchemeTag parse_scheme(const std::string& name) {
  if (name == "exp_midpoint") return SchemeTag::exp_midpoint;
  if (name == "product_integral") return SchemeTag::product_integral;
  if (name == "interaction_picture") return SchemeTag::interaction_picture;
  throw ConfigError("unknown scheme: " + name);
}

BIncrement b_increment(const DiscretePath& path, int k, const GaugeField& gauge,
                       const Potential& pot) {
  validate_args(path, k, k + 1, gauge, pot);
  const int d = gauge.fiber_dim;
  const double dt = path.grid.dt();
  StepContext ctx(path.space_dim, d);
  ctx.load(path, k, gauge);
  BIncrement out{Matrix(d), k};
  add_gauge_exponent(ctx, out.matrix);
  if (!pot.identically_zero) {
    pot.evaluate_into(ctx.mid, ctx.vmat);
    out.matrix.add_scaled(ctx.vmat, cxd(-dt, 0.0));
  }
  if (!gauge.identically_zero) {
    Matrix sq(d);
    for (const Matrix& a : ctx.alpha) {
      Matrix::mul(a, a, sq);
      out.matrix.add_scaled(sq, cxd(0.5 * dt, 0.0));
    }
  }
  return out;
}

TransportResult transport(const DiscretePath& path, int start, int end,
                          const GaugeField& gauge, const Potential& pot,
                          Scheme scheme) {
  validate_args(path, start, end, gauge, pot);
  const int d = gauge.fiber_dim;
  const double dt = path.grid.dt();
  TransportResult out;
  out.scheme = scheme;
  out.start = start;
  out.end = end;

  StepContext ctx(path.space_dim, d);
  Matrix acc = Matrix::identity(d);
  Matrix exponent(d), factor(d), tmp(d);
  double acc_v = 0.0;

  switch (scheme.tag) {
    case SchemeTag::exp_midpoint: {
      for (int k = start; k < end; ++k) {
        ctx.load(path, k, gauge);
        exponent.set_zero();
        add_gauge_exponent(ctx, exponent);
        if (!pot.identically_zero) {
          pot.evaluate_into(ctx.mid, ctx.vmat);
          acc_v += potential_norm(ctx.vmat) * dt;
          exponent.add_scaled(ctx.vmat, cxd(-dt, 0.0));
        }
        matrix_exp_into(exponent, factor);
        Matrix::mul(acc, factor, tmp);
        std::swap(acc, tmp);
        check_finite(acc, "transport: non-finite product (exp_midpoint)", k);
      }
      break;
    }
    case SchemeTag::product_integral: {
      Matrix sq(d);
      for (int k = start; k < end; ++k) {
        ctx.load(path, k, gauge);
        factor.set_zero();
        add_gauge_exponent(ctx, factor);
        if (!pot.identically_zero) {
          pot.evaluate_into(ctx.mid, ctx.vmat);
          acc_v += potential_norm(ctx.vmat) * dt;
          factor.add_scaled(ctx.vmat, cxd(-dt, 0.0));
        }
        if (!gauge.identically_zero) {
          for (const Matrix& a : ctx.alpha) {
            Matrix::mul(a, a, sq);
            factor.add_scaled(sq, cxd(0.5 * dt, 0.0));
          }
        }
        // |dB| >= 1 leaves the contraction regime; surface it, do not hide it.
        if (factor.frobenius_norm() >= 1.0 && operator_norm(factor) >= 1.0)
          throw NumericError(
              "product_integral: increment norm >= 1 at step " +
                  std::to_string(k),
              k);
        for (int i = 0; i < d; ++i) factor(i, i) += 1.0;
        Matrix::mul(acc, factor, tmp);
        std::swap(acc, tmp);
        check_finite(acc, "transport: non-finite product (product_integral)",
                     k);
      }
      break;
    }
    case SchemeTag::interaction_picture: {
      Matrix u = Matrix::identity(d);
      Matrix umid(d), uadj(d), ehalf(d), fmat(d), atil = Matrix::identity(d);
      for (int k = start; k < end; ++k) {
        ctx.load(path, k, gauge);
        exponent.set_zero();
        add_gauge_exponent(ctx, exponent);
        exponent *= cxd(0.5, 0.0);
        matrix_exp_into(exponent, ehalf);
        Matrix::mul(u, ehalf, umid);
        if (!pot.identically_zero) {
          pot.evaluate_into(ctx.mid, ctx.vmat);
          acc_v += potential_norm(ctx.vmat) * dt;
          umid.adjoint_into(uadj);
          Matrix::mul(ctx.vmat, uadj, tmp);
          Matrix::mul(umid, tmp, fmat);
          fmat *= cxd(-dt, 0.0);
          matrix_exp_into(fmat, factor);
          Matrix::mul(atil, factor, tmp);
          std::swap(atil, tmp);
          check_finite(atil, "transport: non-finite interaction factor", k);
        }
        Matrix::mul(umid, ehalf, u);
        check_finite(u, "transport: non-finite gauge transport", k);
      }
      out.diagnostics.interaction_factor_norm = operator_norm(atil);
      Matrix::mul(atil, u, acc);
      break;
    }
  }

  out.matrix = std::move(acc);
  out.diagnostics.norm = operator_norm(out.matrix);
  out.diagnostics.accumulated_v_integral = acc_v;
  if (pot.identically_zero)
    out.diagnostics.unitarity_defect = unitarity_defect(out.matrix);
  return out;
}

TransportResult transport_inverse(const DiscretePath& path, int start, int end,
                                  const GaugeField& gauge, const Potential& pot,
                                  Scheme scheme) {
  validate_args(path, start, end, gauge, pot);
  const int d = gauge.fiber_dim;
  const double dt = path.grid.dt();
  TransportResult out;
  out.scheme = scheme;
  out.start = start;
  out.end = end;

  StepContext ctx(path.space_dim, d);
  Matrix acc = Matrix::identity(d);
  Matrix exponent(d), factor(d), tmp(d);
  double acc_v = 0.0;

  switch (scheme.tag) {
    case SchemeTag::exp_midpoint: {
      for (int k = end - 1; k >= start; --k) {
        ctx.load(path, k, gauge);
        exponent.set_zero();
        add_gauge_exponent(ctx, exponent);
        if (!pot.identically_zero) {
          pot.evaluate_into(ctx.mid, ctx.vmat);
          acc_v += potential_norm(ctx.vmat) * dt;
          exponent.add_scaled(ctx.vmat, cxd(-dt, 0.0));
        }
        exponent *= cxd(-1.0, 0.0);
        matrix_exp_into(exponent, factor);
        Matrix::mul(acc, factor, tmp);
        std::swap(acc, tmp);
        check_finite(acc, "transport_inverse: non-finite product", k);
      }
      break;
    }
    case SchemeTag::product_integral: {
      Matrix sq(d);
      for (int k = end - 1; k >= start; --k) {
        ctx.load(path, k, gauge);
        factor.set_zero();
        add_gauge_exponent(ctx, factor);
        if (!pot.identically_zero) {
          pot.evaluate_into(ctx.mid, ctx.vmat);
          acc_v += potential_norm(ctx.vmat) * dt;
          factor.add_scaled(ctx.vmat, cxd(-dt, 0.0));
        }
        if (!gauge.identically_zero) {
          for (const Matrix& a : ctx.alpha) {
            Matrix::mul(a, a, sq);
            factor.add_scaled(sq, cxd(0.5 * dt, 0.0));
          }
        }
        for (int i = 0; i < d; ++i) factor(i, i) += 1.0;
        Matrix inv;
        try {
          inv = lu_inverse(factor);
        } catch (const NumericError&) {
          throw NumericError(
              "transport_inverse: singular product-integral factor at step " +
                  std::to_string(k),
              k);
        }
        Matrix::mul(acc, inv, tmp);
        std::swap(acc, tmp);
        check_finite(acc, "transport_inverse: non-finite product", k);
      }
      break;
    }
    case SchemeTag::interaction_picture: {
      Matrix u = Matrix::identity(d);
      Matrix umid(d), uadj(d), ehalf(d), fmat(d);
      Matrix ainv = Matrix::identity(d);
      for (int k = start; k < end; ++k) {
        ctx.load(path, k, gauge);
        exponent.set_zero();
        add_gauge_exponent(ctx, exponent);
        exponent *= cxd(0.5, 0.0);
        matrix_exp_into(exponent, ehalf);
        Matrix::mul(u, ehalf, umid);
        if (!pot.identically_zero) {
          pot.evaluate_into(ctx.mid, ctx.vmat);
          acc_v += potential_norm(ctx.vmat) * dt;
          umid.adjoint_into(uadj);
          Matrix::mul(ctx.vmat, uadj, tmp);
          Matrix::mul(umid, tmp, fmat);
          fmat *= cxd(dt, 0.0);  // inverse factor
          matrix_exp_into(fmat, factor);
          Matrix::mul(factor, ainv, tmp);
          std::swap(ainv, tmp);
          check_finite(ainv, "transport_inverse: non-finite factor", k);
        }
        Matrix::mul(umid, ehalf, u);
      }
      u.adjoint_into(uadj);
      Matrix::mul(uadj, ainv, acc);
      break;
    }
  }

  out.matrix = std::move(acc);
  out.diagnostics.norm = operator_norm(out.matrix);
  out.diagnostics.accumulated_v_integral = acc_v;
  if (pot.identically_zero)
    out.diagnostics.unitarity_defect = unitarity_defect(out.matrix);
  return out;
}

double adjoint_reversal_check(const DiscretePath& path, const GaugeField& gauge,
                              const Potential& pot, Scheme scheme) {
  if (scheme.tag == SchemeTag::interaction_picture)
    throw ValidationError(
        "adjoint_reversal_check: exp_midpoint or product_integral only");
  const int n = path.grid.steps;
  TransportResult fwd = transport(path, 0, n, gauge, pot, scheme);
  TransportResult rev = transport(reverse(path), 0, n, gauge, pot, scheme);
  return operator_norm(rev.matrix.adjoint() - fwd.matrix);
}

}  // namespace fkmc
