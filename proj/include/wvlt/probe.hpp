#pragma once

// Geometric-optics probes concentrated in a tube around a boundary-anchored
// ray. A probe of order N carries amplitudes a_0..a_N built by transporting
// source terms along the ray, the gauged total A = sum_j rho^-j a_j, and the
// residual F_N with (P_o + q) A = rho^(2-N) F_N up to discretization error,
// where P_o is the gauge-shifted operator for the probe's sense. The backward
// sense transports against the time orientation: its first-order time
// derivatives enter with a flipped sign and the zeroth-order block uses the
// transposed operator.

#include <wvlt/bump.hpp>
#include <wvlt/ops.hpp>
#include <wvlt/solver.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace wvlt {

/// Ray entering the unit square: anchor on the boundary, unit direction
/// pointing inward, transversal = the counterclockwise normal completing the
/// frame. The tube coordinate of a point x is tau = transversal . (x - anchor),
/// the ray parameter s = direction . (x - anchor).
struct RaySpec {
  Vec2 anchor;
  Vec2 direction;
  Vec2 transversal;

  RaySpec(Vec2 y0, Vec2 om) : anchor(y0), direction(om), transversal(perp(om)) {
    constexpr double tol = 1e-12;
    if (std::abs(norm(om) - 1.0) > tol)
      throw std::invalid_argument("RaySpec: direction must be a unit vector");
    auto inside = [&](double v) { return v >= -tol && v <= 1.0 + tol; };
    bool on_edge = std::abs(y0.x) <= tol || std::abs(y0.x - 1.0) <= tol ||
                   std::abs(y0.y) <= tol || std::abs(y0.y - 1.0) <= tol;
    if (!inside(y0.x) || !inside(y0.y) || !on_edge)
      throw std::invalid_argument("RaySpec: anchor must lie on the boundary of the unit square");
    // Inward means the ray immediately enters the open square from every edge
    // the anchor touches (corners constrain both components).
    bool inward = true;
    if (std::abs(y0.x) <= tol) inward = inward && om.x > 0.0;
    if (std::abs(y0.x - 1.0) <= tol) inward = inward && om.x < 0.0;
    if (std::abs(y0.y) <= tol) inward = inward && om.y > 0.0;
    if (std::abs(y0.y - 1.0) <= tol) inward = inward && om.y < 0.0;
    if (!inward) throw std::invalid_argument("RaySpec: direction must point into the square");
  }

  double s_of(Vec2 x) const { return dot(x - anchor, direction); }
  double tau_of(Vec2 x) const { return dot(x - anchor, transversal); }
};

namespace detail {

/// First-order time derivatives flip sign in the backward (transposed) frame.
inline double time_sign(Sense s) { return s == Sense::forward ? 1.0 : -1.0; }

/// Travel length from x along -om before leaving the closed unit square.
inline double back_reach(Vec2 x, Vec2 om) {
  double u = std::numeric_limits<double>::infinity();
  if (om.x > 0.0) u = std::min(u, x.x / om.x);
  if (om.x < 0.0) u = std::min(u, (x.x - 1.0) / om.x);
  if (om.y > 0.0) u = std::min(u, x.y / om.y);
  if (om.y < 0.0) u = std::min(u, (x.y - 1.0) / om.y);
  return std::max(0.0, u);
}

/// Precomputed bilinear interpolation at one sample point: base cell index
/// plus fractional offsets.
struct InterpPoint {
  int base = 0;
  double fx = 0.0, fy = 0.0;
};

inline InterpPoint interp_point(const SpatialGrid& g, Vec2 p) {
  constexpr double guard = 1e-9;
  if (p.x < -guard || p.x > 1.0 + guard || p.y < -guard || p.y > 1.0 + guard)
    throw std::logic_error("transport sample left the computational box");
  double gx = std::clamp(p.x, 0.0, 1.0) / g.h;
  double gy = std::clamp(p.y, 0.0, 1.0) / g.h;
  int ix = std::min(static_cast<int>(gx), g.n - 2);
  int iy = std::min(static_cast<int>(gy), g.n - 2);
  InterpPoint ip;
  ip.base = g.idx(ix, iy);
  ip.fx = std::clamp(gx - ix, 0.0, 1.0);
  ip.fy = std::clamp(gy - iy, 0.0, 1.0);
  return ip;
}

inline cplx interp_eval(const SpatialGrid& g, const InterpPoint& ip, const cplx* f) {
  const double ax = 1.0 - ip.fx, ay = 1.0 - ip.fy;
  return ay * (ax * f[ip.base] + ip.fx * f[ip.base + 1]) +
         ip.fy * (ax * f[ip.base + g.n] + ip.fx * f[ip.base + g.n + 1]);
}

/// T1 = sgn*d_t - Lap - 1 applied slice-wise with boundary-filled Laplacian.
inline SpaceTimeField op_t1(const SpaceTimeField& u, double tsgn) {
  SpaceTimeField out = differential_apply(DiffKind::dt, u);
  SpaceTimeField lap = laplacian_extended(u);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = tsgn * out.v[i] - lap.v[i] - u.v[i];
  return out;
}

/// T2 = 2 (om.grad + sgn * d_t om.grad).
inline SpaceTimeField op_t2(const SpaceTimeField& u, Vec2 om, double tsgn) {
  SpaceTimeField grad = differential_apply(DiffKind::grad_dot, u, om);
  SpaceTimeField dtg = differential_apply(DiffKind::dt, grad);
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    grad.v[i] = 2.0 * (grad.v[i] + tsgn * dtg.v[i]);
  return grad;
}

/// Zeroth-order block (P + q) resp. its transpose: d_t^2 - Lap - sgn*d_t Lap + q.
inline SpaceTimeField op_pq(const SpaceTimeField& u, const SpaceTimeField& q, double tsgn) {
  SpaceTimeField out = differential_apply(DiffKind::dt2, u);
  SpaceTimeField lap = laplacian_extended(u);
  SpaceTimeField dtlap = differential_apply(DiffKind::dt, lap);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    out.v[i] += -lap.v[i] - tsgn * dtlap.v[i] + q.v[i] * u.v[i];
  return out;
}

inline void axpy(cplx alpha, const SpaceTimeField& x, SpaceTimeField& y) {
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += alpha * x.v[i];
}

/// Zero a field outside the closed tube-times-window support. The continuous
/// amplitudes vanish there identically; forcing exact zeros keeps discrete
/// supports sharp while perturbing values by at most the stencil spill of a
/// smooth cutoff, which is below any power of h.
inline void apply_probe_mask(SpaceTimeField& f, const RaySpec& ray, const BumpSpec& bump) {
  const SpatialGrid& g = f.grid;
  std::vector<char> in_tube(g.num_nodes());
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      in_tube[g.idx(ix, iy)] = std::abs(ray.tau_of(g.node(ix, iy))) <= bump.eps ? 1 : 0;
  for (int k = 0; k <= f.time.n_t; ++k) {
    cplx* sl = f.slice(k);
    if (!bump.time_active(f.time.t(k))) {
      std::fill(sl, sl + g.num_nodes(), cplx(0.0));
      continue;
    }
    for (int i = 0; i < g.num_nodes(); ++i)
      if (!in_tube[i]) sl[i] = 0.0;
  }
}

/// -1/2 times the line integral of rhs along the ray, from the entry
/// hyperplane {s = 0} (clipped to the square) to each node, composite
/// trapezoid at spacing <= h/2 with bilinear sampling. Nodes outside the
/// tube or outside the time window are left at exact zero.
inline SpaceTimeField integrate_minus_half(const SpaceTimeField& rhs, const RaySpec& ray,
                                           const BumpSpec& bump) {
  const SpatialGrid& g = rhs.grid;
  const TimeAxis& ta = rhs.time;
  SpaceTimeField out(g, ta);
  std::vector<int> active;
  for (int k = 0; k <= ta.n_t; ++k)
    if (bump.time_active(ta.t(k))) active.push_back(k);
  const double cap = g.h / 2.0;
  std::vector<InterpPoint> pts;
  std::vector<double> wts;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      const Vec2 x = g.node(ix, iy);
      if (std::abs(ray.tau_of(x)) > bump.eps) continue;
      const double s = ray.s_of(x);
      const double lo = s - back_reach(x, ray.direction);
      const double hi = s + back_reach(x, -1.0 * ray.direction);
      const double start = std::clamp(0.0, lo, hi);
      const double len = std::abs(s - start);
      if (len == 0.0) continue;
      const double sign = s >= start ? 1.0 : -1.0;
      const int m = std::max(1, static_cast<int>(std::ceil(len / cap)));
      const double ds = len / m;
      pts.clear();
      wts.clear();
      const double s_lo = std::min(start, s);
      for (int i = 0; i <= m; ++i) {
        const double sp = s_lo + i * ds;
        pts.push_back(interp_point(g, x + (sp - s) * ray.direction));
        wts.push_back((i == 0 || i == m) ? 0.5 * ds : ds);
      }
      const int node = g.idx(ix, iy);
      for (int k : active) {
        const cplx* src = rhs.slice(k);
        cplx acc = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
          acc += wts[i] * interp_eval(g, pts[i], src);
        out.slice(k)[node] = -0.5 * sign * acc;
      }
    }
  return out;
}

}  // namespace detail

/// Leading amplitude a_0(t, x) = phi(t) chi(tau): constant along the ray,
/// plateau profiles across the tube and in time.
inline SpaceTimeField amplitude_a0(const RaySpec& ray, const BumpSpec& bump, const SpatialGrid& g,
                                   const TimeAxis& ta) {
  bump.require_inside(ta.T);
  SpaceTimeField a(g, ta);
  std::vector<double> chi(g.num_nodes());
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      chi[g.idx(ix, iy)] = bump.chi(ray.tau_of(g.node(ix, iy)));
  for (int k = 0; k <= ta.n_t; ++k) {
    const double ph = bump.phi(ta.t(k));
    if (ph == 0.0) continue;
    cplx* sl = a.slice(k);
    for (int i = 0; i < g.num_nodes(); ++i) sl[i] = ph * chi[i];
  }
  return a;
}

/// Next transport amplitude a_j from the chain a_0..a_{j-1}: line integral of
/// -1/2 (T1 a_{j-1} + T2 a_{j-2}) from the entry hyperplane, vanishing there.
/// Orders above 2 would also need the zeroth-order block of a_{j-3} and are
/// not supported.
inline SpaceTimeField transport_step(int j, const std::vector<SpaceTimeField>& chain,
                                     const RaySpec& ray, const BumpSpec& bump, Sense sense) {
  if (j < 1 || j > 2) throw std::invalid_argument("transport_step: order must be 1 or 2");
  if (static_cast<int>(chain.size()) < j)
    throw std::invalid_argument("transport_step: chain must hold amplitudes 0..j-1");
  const double tsgn = detail::time_sign(sense);
  SpaceTimeField rhs = detail::op_t1(chain[j - 1], tsgn);
  if (j >= 2) detail::axpy(1.0, detail::op_t2(chain[j - 2], ray.direction, tsgn), rhs);
  SpaceTimeField a = detail::integrate_minus_half(rhs, ray, bump);
  detail::apply_probe_mask(a, ray, bump);
  return a;
}

/// Probe of order N: amplitudes, gauged total A = sum_j rho^-j a_j, and the
/// residual F_N = X + rho^-1 Y + rho^-2 Z with
///   X = T1 a_N + T2 a_{N-1} + (P+q) a_{N-2}
///   Y = T2 a_N + (P+q) a_{N-1}
///   Z = (P+q) a_N
/// (absent indices dropped), so that (P_o + q) A = rho^(2-N) F_N up to
/// discretization error. Backward probes use the transposed operator blocks.
struct CgoProbe {
  Sense sense;
  double rho;
  RaySpec ray;
  BumpSpec bump;
  int order;
  std::vector<SpaceTimeField> amplitudes;
  SpaceTimeField gauged_total;
  SpaceTimeField residual;
  double residual_norm = 0.0;
};

inline CgoProbe assemble_probe(Sense sense, double rho, const RaySpec& ray, int order,
                               const BumpSpec& bump, const SpaceTimeField& q) {
  if (!(rho > 0.0)) throw std::invalid_argument("assemble_probe: rho must be positive");
  if (order < 0 || order > 2)
    throw std::invalid_argument("assemble_probe: supported orders are 0, 1, 2");
  bump.require_inside(q.time.T);
  const double tsgn = detail::time_sign(sense);
  std::vector<SpaceTimeField> a;
  a.push_back(amplitude_a0(ray, bump, q.grid, q.time));
  for (int j = 1; j <= order; ++j) a.push_back(transport_step(j, a, ray, bump, sense));

  const int N = order;
  SpaceTimeField F = detail::op_t1(a[N], tsgn);
  if (N >= 1) detail::axpy(1.0, detail::op_t2(a[N - 1], ray.direction, tsgn), F);
  if (N >= 2) detail::axpy(1.0, detail::op_pq(a[N - 2], q, tsgn), F);
  {
    SpaceTimeField Y = detail::op_t2(a[N], ray.direction, tsgn);
    if (N >= 1) detail::axpy(1.0, detail::op_pq(a[N - 1], q, tsgn), Y);
    detail::axpy(1.0 / rho, Y, F);
  }
  detail::axpy(1.0 / (rho * rho), detail::op_pq(a[N], q, tsgn), F);
  detail::apply_probe_mask(F, ray, bump);

  SpaceTimeField A = a[0];
  for (int j = 1; j <= N; ++j) detail::axpy(std::pow(rho, -j), a[j], A);

  CgoProbe p{sense, rho, ray, bump, N, std::move(a), std::move(A), std::move(F)};
  p.residual_norm = norm_l2(p.residual);
  return p;
}

/// Defect of the gauged identity on the grid: max over interior nodes and
/// interior time levels of |(P_o + q) A - rho^(2-N) F_N|, with P_o applied
/// through the same pentadiagonal stencils the solver assembles. Decays at
/// the discretization rate when amplitudes, residual and operator agree.
inline double probe_consistency_defect(const CgoProbe& p, const SpaceTimeField& q) {
  const SpatialGrid& g = p.gauged_total.grid;
  const TimeAxis& ta = p.gauged_total.time;
  if (q.grid.n != g.n || q.time.n_t != ta.n_t)
    throw std::invalid_argument("probe_consistency_defect: phantom shape mismatch");
  const double tsgn = detail::time_sign(p.sense);
  const detail::Penta B = detail::damping_coeffs(g, p.rho, p.ray.direction);
  const detail::Penta A = detail::stiffness_coeffs(g, p.rho, p.ray.direction);
  const SpaceTimeField& u = p.gauged_total;
  SpaceTimeField ut = differential_apply(DiffKind::dt, u);
  SpaceTimeField utt = differential_apply(DiffKind::dt2, u);
  const double scale = std::pow(p.rho, 2 - p.order);
  double defect = 0.0;
  for (int k = 1; k < ta.n_t; ++k) {
    const cplx* us = u.slice(k);
    const cplx* uts = ut.slice(k);
    const cplx* F = p.residual.slice(k);
    const cplx* qs = q.slice(k);
    const cplx* utts = utt.slice(k);
    for (int iy = 1; iy < g.n - 1; ++iy)
      for (int ix = 1; ix < g.n - 1; ++ix) {
        const int i = g.idx(ix, iy);
        const cplx val = utts[i] + tsgn * detail::apply_penta_at(g, B, uts, ix, iy) +
                         detail::apply_penta_at(g, A, us, ix, iy) + qs[i] * us[i];
        defect = std::max(defect, std::abs(val - scale * F[i]));
      }
  }
  return defect;
}

struct RemainderRecord {
  SpaceTimeField field;
  double l2_norm = 0.0;
};

/// Correction closing the probe exactly: solves (P_o + q) r = -rho^(2-N) F_N
/// in the probe's gauge with zero data on the probe's starting face (initial
/// for forward, final for backward) and zero Dirichlet values.
inline RemainderRecord remainder_measure(const CgoProbe& p, const SpaceTimeField& q,
                                         const SolverConfig& cfg = {}) {
  const SpatialGrid& g = p.residual.grid;
  const TimeAxis& ta = p.residual.time;
  LinearProblemSpec spec{q,
                         p.residual,
                         BoundaryTimeTrace(g, ta),
                         Field(g),
                         Field(g),
                         p.sense == Sense::forward ? TimeDirection::forward
                                                   : TimeDirection::backward_final_data,
                         GaugeShift(p.rho, p.ray.direction, p.sense)};
  const double scale = -std::pow(p.rho, 2 - p.order);
  for (auto& v : spec.forcing.v) v *= scale;
  RemainderRecord rec{solve_linear(spec, cfg), 0.0};
  rec.l2_norm = norm_l2(rec.field);
  return rec;
}

}  // namespace wvlt
