#pragma once

// Simulated boundary measurements: the full data maps (g0, g1, h) ->
// (Neumann trace, final slices), their second-order mixed linearization U2,
// and the boundary-pairing functionals that the recovery pipelines equate to
// interior integrals. Every record carries a gauge tag naming the exponential
// frame its values live in; pairings verify that the paired frames cancel
// identically before touching numbers, since pairing mismatched frames is a
// silent catastrophic error otherwise.

#include <wvlt/ops.hpp>
#include <wvlt/probe.hpp>
#include <wvlt/solver.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

namespace wvlt {

enum class MeasurementKind { lateral_dtn, all_boundary };
enum class MeasurementMode { linear, nonlinear };

/// Simulation setup shared by every measurement: the medium, the
/// discretization, and which data the instrument reports. lateral_dtn models
/// the Dirichlet-to-Neumann map with zero initial data; all_boundary
/// additionally reports the final slices and admits nonzero initial data.
struct Scenario {
  Phantom phantom;
  SpatialGrid grid;
  TimeAxis axis;
  SolverConfig cfg;
  MeasurementKind kind;

  Scenario(Phantom ph, SolverConfig c, MeasurementKind k)
      : phantom(std::move(ph)),
        grid(phantom.q.grid),
        axis(phantom.q.time),
        cfg(c),
        kind(k) {
    if (!(phantom.beta.grid == grid) || !(phantom.beta.time == axis))
      throw std::invalid_argument("Scenario: phantom q and beta shapes differ");
  }
};

/// Input tuple (g0, g1, h) of one measurement, zero by default.
struct MeasurementInput {
  Field g0;
  Field g1;
  BoundaryTimeTrace dirichlet;

  MeasurementInput(const SpatialGrid& g, const TimeAxis& t) : g0(g), g1(g), dirichlet(g, t) {}
};

/// Input tuple together with the gauge frame its values live in
/// (nullopt = physical frame).
struct GaugedInput {
  MeasurementInput data;
  std::optional<GaugeShift> gauge;
};

/// One measurement: the input data, the Neumann trace, the final slices when
/// the scenario reports them, and the gauge tag of the frame every value is
/// expressed in.
struct MeasurementRecord {
  Field g0;
  Field g1;
  BoundaryTimeTrace dirichlet;
  BoundaryTimeTrace neumann;
  std::optional<Field> final_u;
  std::optional<Field> final_ut;
  std::optional<GaugeShift> gauge;
};

/// Boundary values of a field over time in the canonical enumeration.
inline BoundaryTimeTrace dirichlet_trace(const SpaceTimeField& u) {
  BoundaryTimeTrace tr(u.grid, u.time);
  for (int k = 0; k <= u.time.n_t; ++k) {
    const cplx* f = u.slice(k);
    for (size_t b = 0; b < tr.num_bnodes(); ++b) tr.at(k, b) = f[tr.nodes[b]];
  }
  return tr;
}

namespace detail {

inline bool same_gauge(const std::optional<GaugeShift>& a, const std::optional<GaugeShift>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->sense == b->sense && a->rho == b->rho && a->direction.x == b->direction.x &&
         a->direction.y == b->direction.y;
}

/// Time derivative of a boundary trace: central interior, one-sided
/// second-order stencils at the endpoints.
inline BoundaryTimeTrace trace_dt(const BoundaryTimeTrace& h) {
  BoundaryTimeTrace out(h.grid, h.time);
  const int nt = h.time.n_t;
  const double i2dt = 1.0 / (2.0 * h.time.dt);
  const size_t nb = h.num_bnodes();
  for (size_t b = 0; b < nb; ++b) {
    out.at(0, b) = i2dt * (-3.0 * h.at(0, b) + 4.0 * h.at(1, b) - h.at(2, b));
    out.at(nt, b) = i2dt * (3.0 * h.at(nt, b) - 4.0 * h.at(nt - 1, b) + h.at(nt - 2, b));
  }
  for (int k = 1; k < nt; ++k)
    for (size_t b = 0; b < nb; ++b) out.at(k, b) = i2dt * (h.at(k + 1, b) - h.at(k - 1, b));
  return out;
}

/// Last-slice time derivative of a field, one-sided second order.
inline Field final_dt(const SpaceTimeField& u) {
  Field out(u.grid);
  const int nt = u.time.n_t;
  const double i2dt = 1.0 / (2.0 * u.time.dt);
  for (int i = 0; i < u.grid.num_nodes(); ++i)
    out.v[i] = i2dt * (3.0 * u.at_lin(nt, i) - 4.0 * u.at_lin(nt - 1, i) + u.at_lin(nt - 2, i));
  return out;
}

inline void require_input_shape(const Scenario& s, const MeasurementInput& in) {
  if (!(in.g0.grid == s.grid) || !(in.g1.grid == s.grid) || !(in.dirichlet.grid == s.grid) ||
      !(in.dirichlet.time == s.axis))
    throw std::invalid_argument("measurement: input shape does not match the scenario");
}

/// Shape, zero-initial-data (lateral scenarios) and compatibility checks
/// shared by the measurement entry points. Gauged inputs are checked to
/// depth 1 only: the depth-2 recursion uses the physical-frame equation and
/// does not apply to gauged data. The recursion runs with the coefficient of
/// the equation actually solved, so linearized measurements of a nonlinear
/// medium use the zero Westervelt coefficient.
inline void require_measurable(const Scenario& s, const MeasurementInput& in, bool gauged,
                               bool with_beta, double compat_tol) {
  require_input_shape(s, in);
  if (s.kind == MeasurementKind::lateral_dtn &&
      (max_abs(in.g0) > 0.0 || max_abs(in.g1) > 0.0))
    throw std::invalid_argument("measurement: lateral scenario requires zero initial data");
  const int depth = gauged ? 1 : 2;
  const SpaceTimeField zero_beta(s.grid, s.axis);
  const CompatibilitySequence seq = compatibility_sequence(
      in.g0, in.g1, in.dirichlet, s.phantom.q, with_beta ? s.phantom.beta : zero_beta, depth);
  double hmax = 0.0;
  for (const cplx& z : in.dirichlet.v) hmax = std::max(hmax, std::abs(z));
  const double budget = compat_tol * (1.0 + hmax);
  for (double m : seq.boundary_mismatch)
    if (!(m <= budget))
      throw std::invalid_argument("measurement: data fails the compatibility check");
}

/// Combined frame of a product of two forward gauge weights: rates add and
/// shift vectors add, which is again a gauge frame only when the combined
/// shift length squares to the combined rate.
inline std::optional<GaugeShift> combine_gauges(const std::optional<GaugeShift>& a,
                                                const std::optional<GaugeShift>& b) {
  if (a.has_value() != b.has_value())
    throw std::invalid_argument("linearize_second: inputs mix physical and gauged frames");
  if (!a) return {};
  if (a->sense != Sense::forward || b->sense != Sense::forward)
    throw std::invalid_argument("linearize_second: input gauges must be forward-sense");
  const Vec2 shift = a->rho * a->direction + b->rho * b->direction;
  const double rate = a->rho * a->rho + b->rho * b->rho;
  const double len = norm(shift);
  if (std::abs(len * len - rate) > 1e-9 * std::max(1.0, rate))
    throw std::invalid_argument("linearize_second: product weight is not a gauge frame");
  return GaugeShift(len, (1.0 / len) * shift, Sense::forward);
}

/// Quadratic source 2 beta [u1 d_t^2 u2 + u2 d_t^2 u1 + 2 d_t u1 d_t u2]
/// written with the marching scheme's own time stencils, so the direct route
/// reproduces the stencil route's limit to the order of the scheme. A leg
/// solved in a gauge frame of rate r carries one-level weights e^{+-r dt}:
/// the exact conjugation of the central differences by the frame weight. The
/// end levels stay zero; the march never reads them and the true source
/// vanishes at t = 0 for zero-data legs.
inline SpaceTimeField mixed_source(const SpaceTimeField& u1, const SpaceTimeField& u2,
                                   const SpaceTimeField& beta, double r1, double r2) {
  const SpatialGrid& g = u1.grid;
  const TimeAxis& ta = u1.time;
  const double dt = ta.dt;
  const double e1p = std::exp(r1 * dt), e1m = std::exp(-r1 * dt);
  const double e2p = std::exp(r2 * dt), e2m = std::exp(-r2 * dt);
  SpaceTimeField src(g, ta);
  for (int k = 1; k < ta.n_t; ++k) {
    const cplx *a0 = u1.slice(k), *ap = u1.slice(k + 1), *am = u1.slice(k - 1);
    const cplx *b0 = u2.slice(k), *bp = u2.slice(k + 1), *bm = u2.slice(k - 1);
    const cplx* be = beta.slice(k);
    cplx* s = src.slice(k);
    for (int i = 0; i < g.num_nodes(); ++i) {
      const cplx d2a = (e1p * ap[i] - 2.0 * a0[i] + e1m * am[i]) / (dt * dt);
      const cplx d2b = (e2p * bp[i] - 2.0 * b0[i] + e2m * bm[i]) / (dt * dt);
      const cplx d1a = (e1p * ap[i] - e1m * am[i]) / (2.0 * dt);
      const cplx d1b = (e2p * bp[i] - e2m * bm[i]) / (2.0 * dt);
      s[i] = 2.0 * be[i] * (a0[i] * d2b + b0[i] * d2a + 2.0 * d1a * d1b);
    }
  }
  return src;
}

}  // namespace detail

/// Runs one simulated measurement. Linear mode solves the linearized model,
/// optionally in a forward gauge frame; nonlinear mode runs the full model in
/// the physical frame. compat_tol bounds the compatibility mismatches
/// relative to 1 + max |h|; discrete Cauchy data of a smooth compatible
/// solution passes at O(dt^2).
inline MeasurementRecord apply_measurement(const Scenario& s, const MeasurementInput& in,
                                           MeasurementMode mode,
                                           const std::optional<GaugeShift>& gauge = {},
                                           double compat_tol = 1e-2,
                                           SolveReport* report = nullptr) {
  if (gauge && gauge->sense != Sense::forward)
    throw std::invalid_argument("apply_measurement: gauge must be forward-sense");
  if (mode == MeasurementMode::nonlinear && gauge)
    throw std::invalid_argument("apply_measurement: nonlinear mode runs in the physical frame");
  detail::require_measurable(s, in, gauge.has_value(), mode == MeasurementMode::nonlinear,
                             compat_tol);

  LinearProblemSpec lin{s.phantom.q,  SpaceTimeField(s.grid, s.axis),
                        in.dirichlet, in.g0,
                        in.g1,        TimeDirection::forward,
                        gauge};
  SpaceTimeField u = (mode == MeasurementMode::linear)
                         ? solve_linear(lin, s.cfg, report)
                         : solve_nonlinear({std::move(lin), s.phantom.beta}, s.cfg, report);
  MeasurementRecord rec{in.g0, in.g1, in.dirichlet, neumann_trace(u), {}, {}, gauge};
  if (s.kind == MeasurementKind::all_boundary) {
    rec.final_u = u.slice_field(u.time.n_t);
    rec.final_ut = detail::final_dt(u);
  }
  return rec;
}

enum class SecondOrderMethod { direct, stencil };

/// Second-order mixed linearization U2 of the measurement map at zero in the
/// directions h1, h2. The direct method solves the two linearized problems
/// (each in its own frame), forms the quadratic source in the combined frame,
/// and solves once more with zero data; the stencil method takes the mixed
/// second difference of four nonlinear solves at steps eps1, eps2 in the
/// physical frame. u2_out, when set, receives the U2 field itself.
inline MeasurementRecord linearize_second(const Scenario& s, const GaugedInput& h1,
                                          const GaugedInput& h2, SecondOrderMethod method,
                                          double eps1 = 1e-3, double eps2 = 1e-3,
                                          double compat_tol = 1e-2,
                                          SolveReport* report = nullptr,
                                          SpaceTimeField* u2_out = nullptr) {
  detail::require_measurable(s, h1.data, h1.gauge.has_value(), false, compat_tol);
  detail::require_measurable(s, h2.data, h2.gauge.has_value(), false, compat_tol);

  std::optional<GaugeShift> tag;
  SpaceTimeField u2(s.grid, s.axis);
  if (method == SecondOrderMethod::direct) {
    tag = detail::combine_gauges(h1.gauge, h2.gauge);
    auto lin_solve = [&](const GaugedInput& h) {
      LinearProblemSpec lp{s.phantom.q,      SpaceTimeField(s.grid, s.axis),
                           h.data.dirichlet, h.data.g0,
                           h.data.g1,        TimeDirection::forward,
                           h.gauge};
      return solve_linear(lp, s.cfg, report);
    };
    SpaceTimeField ua = lin_solve(h1);
    SpaceTimeField ub = lin_solve(h2);
    // The mixed second derivative of the squared solution is twice the
    // product of the first-order solutions; the spatial parts of the two
    // frame weights multiply to the combined frame exactly, leaving only the
    // per-leg rates in the time stencils.
    const double r1 = h1.gauge ? h1.gauge->rho * h1.gauge->rho : 0.0;
    const double r2 = h2.gauge ? h2.gauge->rho * h2.gauge->rho : 0.0;
    SpaceTimeField src = detail::mixed_source(ua, ub, s.phantom.beta, r1, r2);
    LinearProblemSpec lp{s.phantom.q,
                         std::move(src),
                         BoundaryTimeTrace(s.grid, s.axis),
                         Field(s.grid),
                         Field(s.grid),
                         TimeDirection::forward,
                         tag};
    u2 = solve_linear(lp, s.cfg, report);
  } else {
    if (h1.gauge || h2.gauge)
      throw std::invalid_argument("linearize_second: stencil method runs in the physical frame");
    if (!(eps1 > 0.0) || !(eps2 > 0.0))
      throw std::invalid_argument("linearize_second: stencil steps must be positive");
    auto corner = [&](double c1, double c2) {
      MeasurementInput in(s.grid, s.axis);
      for (size_t i = 0; i < in.g0.v.size(); ++i) {
        in.g0.v[i] = c1 * h1.data.g0.v[i] + c2 * h2.data.g0.v[i];
        in.g1.v[i] = c1 * h1.data.g1.v[i] + c2 * h2.data.g1.v[i];
      }
      for (size_t i = 0; i < in.dirichlet.v.size(); ++i)
        in.dirichlet.v[i] = c1 * h1.data.dirichlet.v[i] + c2 * h2.data.dirichlet.v[i];
      NonlinearProblemSpec nl{{s.phantom.q, SpaceTimeField(s.grid, s.axis), in.dirichlet, in.g0,
                               in.g1, TimeDirection::forward, {}},
                              s.phantom.beta};
      return solve_nonlinear(nl, s.cfg, report);
    };
    SpaceTimeField u11 = corner(eps1, eps2);
    SpaceTimeField u10 = corner(eps1, 0.0);
    SpaceTimeField u01 = corner(0.0, eps2);
    SpaceTimeField u00 = corner(0.0, 0.0);
    const double iee = 1.0 / (eps1 * eps2);
    for (size_t i = 0; i < u2.v.size(); ++i)
      u2.v[i] = iee * (u11.v[i] - u10.v[i] - u01.v[i] + u00.v[i]);
  }

  MeasurementRecord rec{Field(s.grid), Field(s.grid), BoundaryTimeTrace(s.grid, s.axis),
                        neumann_trace(u2), {},          {},
                        tag};
  if (s.kind == MeasurementKind::all_boundary) {
    rec.final_u = u2.slice_field(u2.time.n_t);
    rec.final_ut = detail::final_dt(u2);
  }
  if (u2_out) *u2_out = std::move(u2);
  return rec;
}

/// a - b for records sharing shapes and the same gauge tag.
inline MeasurementRecord record_difference(const MeasurementRecord& a,
                                           const MeasurementRecord& b) {
  if (!detail::same_gauge(a.gauge, b.gauge))
    throw std::invalid_argument("record_difference: gauge tags differ");
  if (!(a.neumann.grid == b.neumann.grid) || !(a.neumann.time == b.neumann.time))
    throw std::invalid_argument("record_difference: record shapes differ");
  if (a.final_u.has_value() != b.final_u.has_value())
    throw std::invalid_argument("record_difference: final data presence differs");
  MeasurementRecord out = a;
  for (size_t i = 0; i < out.g0.v.size(); ++i) {
    out.g0.v[i] -= b.g0.v[i];
    out.g1.v[i] -= b.g1.v[i];
  }
  for (size_t i = 0; i < out.dirichlet.v.size(); ++i) {
    out.dirichlet.v[i] -= b.dirichlet.v[i];
    out.neumann.v[i] -= b.neumann.v[i];
  }
  if (out.final_u)
    for (size_t i = 0; i < out.final_u->v.size(); ++i) {
      out.final_u->v[i] -= b.final_u->v[i];
      out.final_ut->v[i] -= b.final_ut->v[i];
    }
  return out;
}

/// Boundary data of a backward probe used as the test function of a pairing:
/// gauged boundary values, the gauge tag, and final slices when the pairing
/// includes final-data terms.
struct ProbeTraceData {
  BoundaryTimeTrace trace;
  std::optional<GaugeShift> gauge;
  std::optional<Field> final_u;
  std::optional<Field> final_ut;
};

/// Pairing-side data of an assembled probe. The probe's remainder has an
/// exactly zero boundary trace and zero slices outside the bump's time
/// support, so the trace data is that of the gauged amplitude total; the
/// field the identities pair against is the solve driven by this trace.
inline ProbeTraceData probe_trace_data(const CgoProbe& p, bool with_finals) {
  ProbeTraceData out{dirichlet_trace(p.gauged_total),
                     GaugeShift(p.rho, p.ray.direction, p.sense),
                     {},
                     {}};
  if (with_finals) {
    out.final_u = p.gauged_total.slice_field(p.gauged_total.time.n_t);
    out.final_ut = detail::final_dt(p.gauged_total);
  }
  return out;
}

enum class PairingKind { q_identity, beta_identity };

/// Pairs a difference record against a backward probe: the lateral boundary
/// functional
///   -sum over boundary x time of [(1 + rate) dnu + d_t dnu] * w
/// plus, when the record carries final slices, the final-data terms
///   integral of [(d_t U + rate U) w - U (d_t w + Lap w - 2 rho_w (dir_w . grad) w)]
/// all written in the cancelling gauge frames (rate terms drop out in the
/// physical frame). The record must be forward-tagged, the probe
/// backward-tagged, with rates equal and shift vectors opposite so the
/// exponential prefactors cancel identically; both identities share this one
/// functional and the kind names which one the caller instantiates.
inline cplx boundary_pairing(PairingKind kind, const MeasurementRecord& diff,
                             const ProbeTraceData& w) {
  (void)kind;
  const SpatialGrid& g = diff.neumann.grid;
  const TimeAxis& ta = diff.neumann.time;
  if (!(w.trace.grid == g) || !(w.trace.time == ta))
    throw std::invalid_argument("boundary_pairing: trace shapes differ");
  if (diff.gauge.has_value() != w.gauge.has_value())
    throw std::invalid_argument("boundary_pairing: gauge tags differ");
  double rate = 0.0, rho_w = 0.0;
  Vec2 dir_w{0.0, 0.0};
  if (diff.gauge) {
    if (diff.gauge->sense != Sense::forward || w.gauge->sense != Sense::backward)
      throw std::invalid_argument("boundary_pairing: need a forward record and a backward probe");
    rate = diff.gauge->rho * diff.gauge->rho;
    rho_w = w.gauge->rho;
    dir_w = w.gauge->direction;
    const double rate_w = rho_w * rho_w;
    const Vec2 shift_sum =
        diff.gauge->rho * diff.gauge->direction + rho_w * dir_w;
    if (std::abs(rate - rate_w) > 1e-9 * std::max(1.0, rate) ||
        norm(shift_sum) > 1e-9 * std::max(1.0, diff.gauge->rho))
      throw std::invalid_argument("boundary_pairing: gauge weights do not cancel");
  }
  if (diff.final_u && !(w.final_u && w.final_ut && diff.final_ut))
    throw std::invalid_argument("boundary_pairing: missing final data for all-boundary pairing");

  // Each canonical boundary node carries line weight h: edge-interior nodes
  // directly, corners as two half-edge ends.
  const BoundaryTimeTrace dtn = detail::trace_dt(diff.neumann);
  cplx acc = 0.0;
  for (int k = 0; k <= ta.n_t; ++k) {
    const double wt = quad_weight_t(ta, k) * g.h;
    for (size_t b = 0; b < diff.neumann.num_bnodes(); ++b)
      acc += wt * ((1.0 + rate) * diff.neumann.at(k, b) + dtn.at(k, b)) * w.trace.at(k, b);
  }
  cplx value = -acc;

  if (diff.final_u) {
    const Field lap_w = laplacian_field(*w.final_u, true);
    const Field adv_w = grad_dot_field(*w.final_u, dir_w);
    cplx fin = 0.0;
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        const int i = g.idx(ix, iy);
        const cplx du = diff.final_ut->v[i] + rate * diff.final_u->v[i];
        const cplx dw = w.final_ut->v[i] + lap_w.v[i] - 2.0 * rho_w * adv_w.v[i];
        fin += quad_weight(g, ix, iy) * (du * w.final_u->v[i] - diff.final_u->v[i] * dw);
      }
    value += fin;
  }
  return value;
}

}  // namespace wvlt
