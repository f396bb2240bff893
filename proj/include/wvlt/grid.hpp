#pragma once

// Uniform tensor grid on the closed unit square, time axis, and the complex
// field containers everything else operates on. All types are plain value
// types; operations elsewhere take them by const reference and return new
// values.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace wvlt {

using cplx = std::complex<double>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
/// Counterclockwise quarter turn; used for the transversal of a ray direction.
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// n x n nodes on [0,1]^2, spacing h = 1/(n-1). Node (ix,iy) sits at
/// (ix*h, iy*h); linear index iy*n + ix (x fastest).
struct SpatialGrid {
  int n = 0;
  double h = 0.0;

  explicit SpatialGrid(int n_) : n(n_) {
    if (n < 5) throw std::invalid_argument("SpatialGrid: need at least 5 nodes per side");
    h = 1.0 / (n - 1);
  }

  int num_nodes() const { return n * n; }
  int idx(int ix, int iy) const { return iy * n + ix; }
  double x(int ix) const { return ix * h; }
  double y(int iy) const { return iy * h; }
  Vec2 node(int ix, int iy) const { return {x(ix), y(iy)}; }

  bool on_boundary(int ix, int iy) const {
    return ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1;
  }
  bool is_corner(int ix, int iy) const {
    return (ix == 0 || ix == n - 1) && (iy == 0 || iy == n - 1);
  }

  /// Outward unit normal at a boundary node; corners carry the normalized sum
  /// of the two adjacent edge normals.
  Vec2 outward_normal(int ix, int iy) const {
    assert(on_boundary(ix, iy));
    Vec2 nu{0.0, 0.0};
    if (ix == 0) nu.x -= 1.0;
    if (ix == n - 1) nu.x += 1.0;
    if (iy == 0) nu.y -= 1.0;
    if (iy == n - 1) nu.y += 1.0;
    const double len = norm(nu);
    return {nu.x / len, nu.y / len};
  }

  /// Boundary nodes in canonical order: row-major scan of the grid restricted
  /// to the boundary. Size 4(n-1).
  std::vector<int> boundary_nodes() const {
    std::vector<int> b;
    b.reserve(4 * (n - 1));
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        if (on_boundary(ix, iy)) b.push_back(idx(ix, iy));
    return b;
  }

  bool operator==(const SpatialGrid& o) const { return n == o.n; }
};

/// n_t+1 slices over [0,T], dt = T/n_t.
struct TimeAxis {
  int n_t = 0;
  double T = 0.0;
  double dt = 0.0;

  TimeAxis(int n_t_, double T_) : n_t(n_t_), T(T_) {
    if (n_t < 8) throw std::invalid_argument("TimeAxis: need at least 8 steps");
    if (!(T > 0.0)) throw std::invalid_argument("TimeAxis: horizon must be positive");
    dt = T / n_t;
  }

  int num_slices() const { return n_t + 1; }
  double t(int k) const { return k * dt; }

  bool operator==(const TimeAxis& o) const { return n_t == o.n_t && T == o.T; }
};

/// One complex value per node of a spatial grid.
struct Field {
  SpatialGrid grid;
  std::vector<cplx> v;

  explicit Field(const SpatialGrid& g, cplx fill = {}) : grid(g), v(g.num_nodes(), fill) {}

  cplx& at(int ix, int iy) { return v[grid.idx(ix, iy)]; }
  cplx at(int ix, int iy) const { return v[grid.idx(ix, iy)]; }
};

/// Complex field on every time slice; slice-major storage (slice k occupies
/// v[k*n*n .. (k+1)*n*n)), row-major within a slice.
struct SpaceTimeField {
  SpatialGrid grid;
  TimeAxis time;
  std::vector<cplx> v;

  SpaceTimeField(const SpatialGrid& g, const TimeAxis& t, cplx fill = {})
      : grid(g), time(t), v(static_cast<size_t>(t.num_slices()) * g.num_nodes(), fill) {}

  size_t slice_offset(int k) const { return static_cast<size_t>(k) * grid.num_nodes(); }
  cplx* slice(int k) { return v.data() + slice_offset(k); }
  const cplx* slice(int k) const { return v.data() + slice_offset(k); }
  cplx& at(int k, int ix, int iy) { return v[slice_offset(k) + grid.idx(ix, iy)]; }
  cplx at(int k, int ix, int iy) const { return v[slice_offset(k) + grid.idx(ix, iy)]; }
  cplx at_lin(int k, int i) const { return v[slice_offset(k) + i]; }

  Field slice_field(int k) const {
    Field f(grid);
    std::copy(slice(k), slice(k) + grid.num_nodes(), f.v.begin());
    return f;
  }
};

/// Complex values on the boundary nodes (canonical order) for every slice.
struct BoundaryTimeTrace {
  SpatialGrid grid;
  TimeAxis time;
  std::vector<int> nodes;   // canonical boundary enumeration, grid linear indices
  std::vector<cplx> v;      // v[k*nodes.size() + b]

  BoundaryTimeTrace(const SpatialGrid& g, const TimeAxis& t)
      : grid(g), time(t), nodes(g.boundary_nodes()),
        v(static_cast<size_t>(t.num_slices()) * nodes.size(), cplx{}) {}

  size_t num_bnodes() const { return nodes.size(); }
  cplx& at(int k, size_t b) { return v[k * nodes.size() + b]; }
  cplx at(int k, size_t b) const { return v[k * nodes.size() + b]; }
};

/// Coefficient pair for the scattering medium. q and beta are real-valued
/// (stored complex for uniformity; imaginary parts must be zero).
/// beta_boundary_flat records that beta is constant near the spatial boundary
/// for every t, which the measurement compatibility checks rely on.
struct Phantom {
  SpaceTimeField q;
  SpaceTimeField beta;
  bool beta_boundary_flat = true;

  Phantom(const SpatialGrid& g, const TimeAxis& t)
      : q(g, t), beta(g, t) {}
};

}  // namespace wvlt
