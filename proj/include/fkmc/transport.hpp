#pragma once

#include <optional>

#include "fkmc/fields.hpp"
#include "fkmc/matrix.hpp"
#include "fkmc/paths.hpp"

namespace fkmc {

enum class SchemeTag { exp_midpoint, product_integral, interaction_picture };

struct Scheme {
  SchemeTag tag = SchemeTag::exp_midpoint;
  double tolerance = 1e-10;
};

const char* scheme_name(SchemeTag tag);
SchemeTag parse_scheme(const std::string& name);

struct TransportDiagnostics {
  double norm = 0.0;
  /// |A^H A - 1| of the result; populated only when V is identically zero.
  std::optional<double> unitarity_defect;
  /// Sum of |V(x_mid)| dt over the segment.
  double accumulated_v_integral = 0.0;
  /// |A~| of the interaction-picture factor (interaction_picture only).
  std::optional<double> interaction_factor_norm;
};

struct TransportResult {
  Matrix matrix;
  Scheme scheme;
  int start = 0;
  int end = 0;
  TransportDiagnostics diagnostics;
};

struct BIncrement {
  Matrix matrix;
  int step = 0;
};

/// Ito-form driver increment over step k with midpoint field evaluation:
///   dB_k = sum_j alpha_j(x_mid) dX^j - V(x_mid) dt + (1/2) sum_l alpha_l(x_mid)^2 dt.
BIncrement b_increment(const DiscretePath& path, int k, const GaugeField& gauge,
                       const Potential& pot);

/// Ordered transport over steps [start, end).
///  - exp_midpoint: left fold of exp(sum_j alpha_j(x_mid) dX^j - V(x_mid) dt);
///  - product_integral: left fold of (1 + dB_k);
///  - interaction_picture: A = A~ U with U the V=0 exp_midpoint transport and
///    A~' = -A~ (U V U^{-1}) integrated by the exponential midpoint rule with
///    U taken at step midpoints by half-step transport.
TransportResult transport(const DiscretePath& path, int start, int end,
                          const GaugeField& gauge, const Potential& pot,
                          Scheme scheme);

/// Ordered product of inverted step factors in reversed order.
TransportResult transport_inverse(const DiscretePath& path, int start, int end,
                                  const GaugeField& gauge, const Potential& pot,
                                  Scheme scheme);

/// |transport(reverse(path))^H - transport(path)| over the full path; the
/// midpoint construction makes the identity exact up to roundoff.
double adjoint_reversal_check(const DiscretePath& path, const GaugeField& gauge,
                              const Potential& pot, Scheme scheme);

}  // namespace fkmc
