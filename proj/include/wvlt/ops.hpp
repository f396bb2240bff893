#pragma once

// Second-order stencil operators, boundary traces and trapezoid quadrature on
// SpaceTimeField. Pure functions: inputs are untouched, results are returned.

#include <wvlt/grid.hpp>

namespace wvlt {

enum class DiffKind {
  laplacian,     // 5-point interior Laplacian; boundary rows zero (not valid there)
  grad_dot,      // omega . grad, central interior, one-sided second order at edges
  dt,            // time derivative, central interior, one-sided at t=0 and t=T
  dt2,           // second time derivative, central interior, one-sided at ends
  dt_laplacian,  // dt of the (interior) Laplacian
};

namespace detail {

/// 5-point Laplacian of one slice into `out`. Boundary handling:
/// fill_boundary=false leaves boundary rows at zero; fill_boundary=true uses
/// second-order one-sided normal stencils (f'' at edge via 4 nodes inward)
/// combined with the available tangential stencil.
inline void laplacian_slice(const SpatialGrid& g, const cplx* f, cplx* out, bool fill_boundary) {
  const int n = g.n;
  const double ih2 = 1.0 / (g.h * g.h);
  for (int iy = 1; iy < n - 1; ++iy)
    for (int ix = 1; ix < n - 1; ++ix)
      out[g.idx(ix, iy)] = ih2 * (f[g.idx(ix - 1, iy)] + f[g.idx(ix + 1, iy)] +
                                  f[g.idx(ix, iy - 1)] + f[g.idx(ix, iy + 1)] -
                                  4.0 * f[g.idx(ix, iy)]);
  if (!fill_boundary) {
    for (int ix = 0; ix < n; ++ix) {
      out[g.idx(ix, 0)] = 0.0;
      out[g.idx(ix, n - 1)] = 0.0;
    }
    for (int iy = 0; iy < n; ++iy) {
      out[g.idx(0, iy)] = 0.0;
      out[g.idx(n - 1, iy)] = 0.0;
    }
    return;
  }
  // One-sided second derivative along the normal direction:
  // f''(0) = (2 f0 - 5 f1 + 4 f2 - f3)/h^2 + O(h^2), stepping inward.
  auto d2_onesided = [&](int ix, int iy, int sx, int sy) {
    return ih2 * (2.0 * f[g.idx(ix, iy)] - 5.0 * f[g.idx(ix + sx, iy + sy)] +
                  4.0 * f[g.idx(ix + 2 * sx, iy + 2 * sy)] - f[g.idx(ix + 3 * sx, iy + 3 * sy)]);
  };
  auto d2_central = [&](int ix, int iy, int sx, int sy) {
    return ih2 * (f[g.idx(ix - sx, iy - sy)] - 2.0 * f[g.idx(ix, iy)] + f[g.idx(ix + sx, iy + sy)]);
  };
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      if (!g.on_boundary(ix, iy)) continue;
      cplx dxx = (ix == 0)     ? d2_onesided(ix, iy, +1, 0)
                 : (ix == n - 1) ? d2_onesided(ix, iy, -1, 0)
                                 : d2_central(ix, iy, 1, 0);
      cplx dyy = (iy == 0)     ? d2_onesided(ix, iy, 0, +1)
                 : (iy == n - 1) ? d2_onesided(ix, iy, 0, -1)
                                 : d2_central(ix, iy, 0, 1);
      out[g.idx(ix, iy)] = dxx + dyy;
    }
}

inline void grad_dot_slice(const SpatialGrid& g, const cplx* f, cplx* out, Vec2 omega) {
  const int n = g.n;
  const double i2h = 1.0 / (2.0 * g.h);
  auto d1 = [&](int ix, int iy, int sx, int sy) -> cplx {
    // central where possible, else one-sided: f'(0) = (-3 f0 + 4 f1 - f2)/(2h)
    int edge = (sx != 0) ? ix : iy;
    int last = n - 1;
    if (edge == 0)
      return i2h * (-3.0 * f[g.idx(ix, iy)] + 4.0 * f[g.idx(ix + sx, iy + sy)] -
                    f[g.idx(ix + 2 * sx, iy + 2 * sy)]);
    if (edge == last)
      return i2h * (3.0 * f[g.idx(ix, iy)] - 4.0 * f[g.idx(ix - sx, iy - sy)] +
                    f[g.idx(ix - 2 * sx, iy - 2 * sy)]);
    return i2h * (f[g.idx(ix + sx, iy + sy)] - f[g.idx(ix - sx, iy - sy)]);
  };
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      out[g.idx(ix, iy)] = omega.x * d1(ix, iy, 1, 0) + omega.y * d1(ix, iy, 0, 1);
}

}  // namespace detail

/// Apply a stencil operator to every slice (spatial kinds) or across slices
/// (time kinds). For laplacian and dt_laplacian the boundary rows of the
/// result are zero and carry no meaning; consumers needing boundary values
/// use laplacian_extended below.
inline SpaceTimeField differential_apply(DiffKind kind, const SpaceTimeField& u, Vec2 omega = {}) {
  const SpatialGrid& g = u.grid;
  const TimeAxis& ta = u.time;
  const int nn = g.num_nodes();
  SpaceTimeField out(g, ta);
  switch (kind) {
    case DiffKind::laplacian:
      for (int k = 0; k <= ta.n_t; ++k)
        detail::laplacian_slice(g, u.slice(k), out.slice(k), false);
      break;
    case DiffKind::grad_dot:
      if (std::abs(norm(omega) - 1.0) > 1e-12)
        throw std::invalid_argument("differential_apply: grad_dot needs a unit direction");
      for (int k = 0; k <= ta.n_t; ++k)
        detail::grad_dot_slice(g, u.slice(k), out.slice(k), omega);
      break;
    case DiffKind::dt: {
      const double i2dt = 1.0 / (2.0 * ta.dt);
      for (int i = 0; i < nn; ++i) {
        out.v[out.slice_offset(0) + i] =
            i2dt * (-3.0 * u.at_lin(0, i) + 4.0 * u.at_lin(1, i) - u.at_lin(2, i));
        out.v[out.slice_offset(ta.n_t) + i] =
            i2dt * (3.0 * u.at_lin(ta.n_t, i) - 4.0 * u.at_lin(ta.n_t - 1, i) + u.at_lin(ta.n_t - 2, i));
      }
      for (int k = 1; k < ta.n_t; ++k)
        for (int i = 0; i < nn; ++i)
          out.v[out.slice_offset(k) + i] = i2dt * (u.at_lin(k + 1, i) - u.at_lin(k - 1, i));
      break;
    }
    case DiffKind::dt2: {
      const double idt2 = 1.0 / (ta.dt * ta.dt);
      for (int i = 0; i < nn; ++i) {
        out.v[out.slice_offset(0) + i] =
            idt2 * (2.0 * u.at_lin(0, i) - 5.0 * u.at_lin(1, i) + 4.0 * u.at_lin(2, i) - u.at_lin(3, i));
        out.v[out.slice_offset(ta.n_t) + i] =
            idt2 * (2.0 * u.at_lin(ta.n_t, i) - 5.0 * u.at_lin(ta.n_t - 1, i) +
                    4.0 * u.at_lin(ta.n_t - 2, i) - u.at_lin(ta.n_t - 3, i));
      }
      for (int k = 1; k < ta.n_t; ++k)
        for (int i = 0; i < nn; ++i)
          out.v[out.slice_offset(k) + i] =
              idt2 * (u.at_lin(k + 1, i) - 2.0 * u.at_lin(k, i) + u.at_lin(k - 1, i));
      break;
    }
    case DiffKind::dt_laplacian: {
      SpaceTimeField lap = differential_apply(DiffKind::laplacian, u);
      return differential_apply(DiffKind::dt, lap);
    }
  }
  return out;
}

/// Laplacian with second-order one-sided completion on the boundary rows.
inline SpaceTimeField laplacian_extended(const SpaceTimeField& u) {
  SpaceTimeField out(u.grid, u.time);
  for (int k = 0; k <= u.time.n_t; ++k)
    detail::laplacian_slice(u.grid, u.slice(k), out.slice(k), true);
  return out;
}

/// Single-slice variants used by startup and compatibility computations.
inline Field laplacian_field(const Field& f, bool fill_boundary = false) {
  Field out(f.grid);
  detail::laplacian_slice(f.grid, f.v.data(), out.v.data(), fill_boundary);
  return out;
}

inline Field grad_dot_field(const Field& f, Vec2 omega) {
  Field out(f.grid);
  detail::grad_dot_slice(f.grid, f.v.data(), out.v.data(), omega);
  return out;
}

/// Outward normal derivative on the boundary: one-sided second-order stencil
/// along the inward grid line, sign-flipped to the outward normal,
/// (3 f_b - 4 f_{b-1} + f_{b-2})/(2h) with b-1, b-2 stepping inward.
/// Corner nodes average the two edge traces.
inline BoundaryTimeTrace neumann_trace(const SpaceTimeField& u) {
  const SpatialGrid& g = u.grid;
  const int n = g.n;
  BoundaryTimeTrace tr(g, u.time);
  const double i2h = 1.0 / (2.0 * g.h);
  for (int k = 0; k <= u.time.n_t; ++k) {
    const cplx* f = u.slice(k);
    auto edge_trace = [&](int ix, int iy, int sx, int sy) {
      // (sx,sy) steps inward from the boundary node
      return i2h * (3.0 * f[g.idx(ix, iy)] - 4.0 * f[g.idx(ix + sx, iy + sy)] +
                    f[g.idx(ix + 2 * sx, iy + 2 * sy)]);
    };
    for (size_t b = 0; b < tr.num_bnodes(); ++b) {
      const int lin = tr.nodes[b];
      const int ix = lin % n, iy = lin / n;
      cplx val = 0.0;
      int parts = 0;
      if (ix == 0) { val += edge_trace(ix, iy, +1, 0); ++parts; }
      if (ix == n - 1) { val += edge_trace(ix, iy, -1, 0); ++parts; }
      if (iy == 0) { val += edge_trace(ix, iy, 0, +1); ++parts; }
      if (iy == n - 1) { val += edge_trace(ix, iy, 0, -1); ++parts; }
      tr.at(k, b) = val / static_cast<double>(parts);
    }
  }
  return tr;
}

/// Trapezoid weight of a node: h^2 scaled by 1/2 per boundary edge membership
/// (1/4 at corners).
inline double quad_weight(const SpatialGrid& g, int ix, int iy) {
  double w = g.h * g.h;
  if (ix == 0 || ix == g.n - 1) w *= 0.5;
  if (iy == 0 || iy == g.n - 1) w *= 0.5;
  return w;
}

/// Trapezoid weight of a time slice.
inline double quad_weight_t(const TimeAxis& ta, int k) {
  return (k == 0 || k == ta.n_t) ? 0.5 * ta.dt : ta.dt;
}

/// Integral of one slice over the square (tensor trapezoid).
inline cplx integrate_space(const SpaceTimeField& u, int k) {
  const SpatialGrid& g = u.grid;
  const cplx* f = u.slice(k);
  cplx acc = 0.0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      acc += quad_weight(g, ix, iy) * f[g.idx(ix, iy)];
  return acc;
}

inline cplx integrate_space(const Field& f) {
  const SpatialGrid& g = f.grid;
  cplx acc = 0.0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      acc += quad_weight(g, ix, iy) * f.v[g.idx(ix, iy)];
  return acc;
}

/// Space-time integral (trapezoid in both).
inline cplx integrate(const SpaceTimeField& u) {
  cplx acc = 0.0;
  for (int k = 0; k <= u.time.n_t; ++k)
    acc += quad_weight_t(u.time, k) * integrate_space(u, k);
  return acc;
}

/// L2(t,x) norm via the same quadrature.
inline double norm_l2(const SpaceTimeField& u) {
  double acc = 0.0;
  for (int k = 0; k <= u.time.n_t; ++k) {
    const cplx* f = u.slice(k);
    const double wt = quad_weight_t(u.time, k);
    for (int iy = 0; iy < u.grid.n; ++iy)
      for (int ix = 0; ix < u.grid.n; ++ix)
        acc += wt * quad_weight(u.grid, ix, iy) * std::norm(f[u.grid.idx(ix, iy)]);
  }
  return std::sqrt(acc);
}

inline double norm_l2(const Field& f) {
  double acc = 0.0;
  for (int iy = 0; iy < f.grid.n; ++iy)
    for (int ix = 0; ix < f.grid.n; ++ix)
      acc += quad_weight(f.grid, ix, iy) * std::norm(f.v[f.grid.idx(ix, iy)]);
  return std::sqrt(acc);
}

inline double max_abs(const SpaceTimeField& u) {
  double m = 0.0;
  for (const cplx& z : u.v) m = std::max(m, std::abs(z));
  return m;
}

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (const cplx& z : f.v) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace wvlt
