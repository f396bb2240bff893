#pragma once

// Polynomial symbol of the damped wave operator and its transpose:
//   forward  P(tau, xi) = -tau^2 + xi.xi + i tau (xi.xi)
//   backward P(tau, xi) = -tau^2 + xi.xi - i tau (xi.xi)
// with the bilinear dot (no conjugation), valid at complex arguments.
// Provides the aggregated derivative weight Ptilde^2, the gauge-shifted lower
// bound >= 4 rho^6, and the characteristic roots in the time covariable.

#include <wvlt/grid.hpp>

#include <array>
#include <limits>
#include <utility>

namespace wvlt {

enum class Sense { forward, backward };

struct SymbolSpec {
  Sense kind = Sense::forward;
};

/// Complex covariable (tau, xi1, xi2).
using Zeta = std::array<cplx, 3>;

inline Zeta operator+(const Zeta& a, const Zeta& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

/// Linear-phase gauge e^{i phi}: the forward shift is zeta0 = (-i rho^2, i rho omega)
/// so that phi = -i rho^2 t + i rho (x.omega) gives weight e^{rho^2 t - rho x.omega};
/// the backward sense flips the time component.
struct GaugeShift {
  double rho;
  Vec2 direction;
  Sense sense;

  GaugeShift(double rho_, Vec2 dir, Sense s) : rho(rho_), direction(dir), sense(s) {
    if (!(rho > 0.0)) throw std::invalid_argument("GaugeShift: rho must be positive");
    if (std::abs(norm(dir) - 1.0) > 1e-12)
      throw std::invalid_argument("GaugeShift: direction must be a unit vector");
  }

  Zeta zeta0() const {
    const cplx i(0.0, 1.0);
    const double s = (sense == Sense::forward) ? -1.0 : 1.0;
    return {s * i * rho * rho, i * rho * direction.x, i * rho * direction.y};
  }
};

/// log of the gauge weight e^{i phi}: rho^2 t - rho (x.omega) forward,
/// -rho^2 t - rho (x.omega) backward. The phase has purely imaginary
/// coefficients, so the weight is a real exponential.
inline double gauge_log_weight(const GaugeShift& s, double t, Vec2 x) {
  const double sgn = (s.sense == Sense::forward) ? 1.0 : -1.0;
  return sgn * s.rho * s.rho * t - s.rho * dot(x, s.direction);
}

inline cplx eval_symbol(SymbolSpec spec, const Zeta& z) {
  const cplx i(0.0, 1.0);
  const double s = (spec.kind == Sense::forward) ? 1.0 : -1.0;
  const cplx S = z[1] * z[1] + z[2] * z[2];
  return -z[0] * z[0] + S + s * i * z[0] * S;
}

/// All nonzero partial derivatives of P at z, the symbol itself included.
/// The symbol is a fixed cubic, so the list is closed-form:
///   P, P_tau, P_xik, P_tautau, P_tauxik, P_xikxik, P_tauxikxik.
inline std::array<cplx, 11> symbol_derivatives(SymbolSpec spec, const Zeta& z) {
  const cplx i(0.0, 1.0);
  const double sg = (spec.kind == Sense::forward) ? 1.0 : -1.0;
  const cplx tau = z[0], x1 = z[1], x2 = z[2];
  const cplx S = x1 * x1 + x2 * x2;
  const cplx one_it = 1.0 + sg * i * tau;
  return {
      -tau * tau + S + sg * i * tau * S,  // P
      -2.0 * tau + sg * i * S,            // P_tau
      2.0 * x1 * one_it,                  // P_xi1
      2.0 * x2 * one_it,                  // P_xi2
      cplx(-2.0, 0.0),                    // P_tautau
      sg * 2.0 * i * x1,                  // P_tauxi1
      sg * 2.0 * i * x2,                  // P_tauxi2
      2.0 * one_it,                       // P_xi1xi1
      2.0 * one_it,                       // P_xi2xi2
      sg * 2.0 * i,                       // P_tauxi1xi1
      sg * 2.0 * i,                       // P_tauxi2xi2
  };
}

/// Hormander weight: sum over all multi-indices of |d^alpha P(z)|^2.
inline double ptilde_sq(SymbolSpec spec, const Zeta& z) {
  double acc = 0.0;
  for (const cplx& d : symbol_derivatives(spec, z)) acc += std::norm(d);
  return acc;
}

struct BoundCheck {
  double lhs = 0.0;  // Ptilde^2 at center + zeta0
  double rhs = 0.0;  // 4 rho^6
  bool ok = false;
};

/// The gauge-shifted weight dominates 4 rho^6 at every real covariable. The
/// xi-gradient term alone gives 4(|xi|^2 + rho^2)((1 + rho^2)^2 + tau^2).
inline BoundCheck shifted_bound_check(SymbolSpec spec, const GaugeShift& shift,
                                      const std::array<double, 3>& center) {
  Zeta z{cplx(center[0]), cplx(center[1]), cplx(center[2])};
  BoundCheck r;
  r.lhs = ptilde_sq(spec, z + shift.zeta0());
  const double r2 = shift.rho * shift.rho;
  r.rhs = 4.0 * r2 * r2 * r2;
  r.ok = r.lhs >= r.rhs - 1e-9 * r.rhs;
  return r;
}

namespace detail {

/// Roots in tau of P(tau, xi) = 0 for fixed complex xi:
///   forward  tau = (i R +- sqrt(-R^2 + 4R)) / 2,   R = xi.xi
///   backward tau = (-i R +- sqrt(-R^2 + 4R)) / 2.
inline std::array<cplx, 2> tau_roots(SymbolSpec spec, cplx R) {
  const cplx i(0.0, 1.0);
  const double sg = (spec.kind == Sense::forward) ? 1.0 : -1.0;
  const cplx disc = std::sqrt(-R * R + 4.0 * R);
  return {0.5 * (sg * i * R + disc), 0.5 * (sg * i * R - disc)};
}

}  // namespace detail

/// Solutions sigma of P(center + zeta0 + sigma N) = 0 with the half-space
/// normal N = (1,0,0) (forward) or (-1,0,0) (backward); the symbol is
/// quadratic in tau so there are exactly two. Returned unordered.
inline std::array<cplx, 2> sigma_roots(SymbolSpec spec, const GaugeShift& shift,
                                       const std::array<double, 3>& center) {
  if (spec.kind != shift.sense)
    throw std::invalid_argument("sigma_roots: symbol sense and shift sense disagree");
  const Zeta z0 = shift.zeta0();
  const cplx x1 = center[1] + z0[1], x2 = center[2] + z0[2];
  const cplx R = x1 * x1 + x2 * x2;
  const std::array<cplx, 2> taus = detail::tau_roots(spec, R);
  const cplx tau_shift = center[0] + z0[0];
  // tau-argument of the symbol is tau_shift + sigma (forward) or - sigma (backward)
  const double sn = (spec.kind == Sense::forward) ? 1.0 : -1.0;
  return {sn * (taus[0] - tau_shift), sn * (taus[1] - tau_shift)};
}

/// Residual of a root: |P(center + zeta0 + sigma N)|.
inline double sigma_residual(SymbolSpec spec, const GaugeShift& shift,
                             const std::array<double, 3>& center, cplx sigma) {
  const double sn = (spec.kind == Sense::forward) ? 1.0 : -1.0;
  Zeta z{cplx(center[0]), cplx(center[1]), cplx(center[2])};
  z = z + shift.zeta0();
  z[0] += sn * sigma;
  return std::abs(eval_symbol(spec, z));
}

struct LatticeScan {
  long samples = 0;
  long violations = 0;
  double min_ratio = 0.0;  // min over lattice of lhs / rhs
};

/// Shifted lower bound on the uniform cube lattice |tau|, |xi_k| <= extent.
inline LatticeScan shifted_bound_lattice(SymbolSpec spec, const GaugeShift& shift,
                                         double extent = 20.0, int points = 41) {
  if (points < 2) throw std::invalid_argument("shifted_bound_lattice: points < 2");
  LatticeScan out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  const double step = 2.0 * extent / (points - 1);
  for (int it = 0; it < points; ++it)
    for (int i1 = 0; i1 < points; ++i1)
      for (int i2 = 0; i2 < points; ++i2) {
        const std::array<double, 3> c{-extent + it * step, -extent + i1 * step,
                                      -extent + i2 * step};
        const BoundCheck b = shifted_bound_check(spec, shift, c);
        ++out.samples;
        if (!b.ok) ++out.violations;
        out.min_ratio = std::min(out.min_ratio, b.lhs / b.rhs);
      }
  return out;
}

struct RootScanRow {
  double rho = 0.0;
  double r = 0.0;
  double angle = 0.0;
  double im_plus = 0.0;   // larger imaginary part of the pair
  double im_minus = 0.0;  // smaller imaginary part
  double residual = 0.0;  // worse of the two root residuals
};

struct RootScan {
  std::vector<RootScanRow> rows;
  double min_im = 0.0;         // min over rows of im_minus
  double min_im_r1 = 0.0;      // same restricted to r = r_min rows
  double min_of_max_im = 0.0;  // min over rows of im_plus (condition-(b) surrogate)
};

/// Characteristic-root scan over centers (0, r theta), r log-spaced in
/// [r_min, r_max], theta on a uniform angle grid, for each rho in the ladder.
/// The gauge direction is fixed at (1,0); rotating theta covers all relative
/// angles.
inline RootScan root_scan(SymbolSpec spec, const std::vector<double>& rhos, double r_min = 1.0,
                          double r_max = 50.0, int n_r = 33, int n_angles = 64) {
  if (!(r_min > 0.0) || r_max < r_min) throw std::invalid_argument("root_scan: bad r range");
  if (n_r < 2 || n_angles < 1) throw std::invalid_argument("root_scan: bad sample counts");
  RootScan out;
  out.min_im = out.min_im_r1 = out.min_of_max_im = std::numeric_limits<double>::infinity();
  out.rows.reserve(rhos.size() * n_r * n_angles);
  const double lr0 = std::log(r_min), lr1 = std::log(r_max);
  for (double rho : rhos) {
    const GaugeShift shift(rho, Vec2{1.0, 0.0}, spec.kind);
    for (int ir = 0; ir < n_r; ++ir) {
      const double r = std::exp(lr0 + (lr1 - lr0) * ir / (n_r - 1));
      for (int ia = 0; ia < n_angles; ++ia) {
        const double ang = 2.0 * M_PI * ia / n_angles;
        const std::array<double, 3> c{0.0, r * std::cos(ang), r * std::sin(ang)};
        const std::array<cplx, 2> sig = sigma_roots(spec, shift, c);
        RootScanRow row;
        row.rho = rho;
        row.r = r;
        row.angle = ang;
        row.im_plus = std::max(sig[0].imag(), sig[1].imag());
        row.im_minus = std::min(sig[0].imag(), sig[1].imag());
        row.residual = std::max(sigma_residual(spec, shift, c, sig[0]),
                                sigma_residual(spec, shift, c, sig[1]));
        out.min_im = std::min(out.min_im, row.im_minus);
        if (ir == 0) out.min_im_r1 = std::min(out.min_im_r1, row.im_minus);
        out.min_of_max_im = std::min(out.min_of_max_im, row.im_plus);
        out.rows.push_back(row);
      }
    }
  }
  return out;
}

}  // namespace wvlt
