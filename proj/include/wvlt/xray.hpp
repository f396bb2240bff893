#pragma once

// Parallel-beam X-ray transform of spatial fields, taken per time slice, and
// its filtered-backprojection inverse. Lines are parametrized by angle and
// signed offset from the domain center; integrals run over the chord inside
// the unit square with bilinear sampling at half-grid steps. The inverse
// ramp-filters each projection with a zero-padded FFT and backprojects.

#include <wvlt/grid.hpp>

#include <fftw3.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wvlt {

/// Line at angle theta in [0, pi) passing at signed distance offset from the
/// square's center, directed along (cos theta, sin theta).
struct LineSpec {
  double angle = 0.0;
  double offset = 0.0;

  Vec2 direction() const { return {std::cos(angle), std::sin(angle)}; }
  Vec2 anchor() const {
    const Vec2 p = perp(direction());
    return {0.5 + offset * p.x, 0.5 + offset * p.y};
  }
};

/// Stack of parallel-beam projections: values[t][angle][offset] for the
/// listed angles and offsets, one matrix per time index.
struct Sinogram {
  std::vector<double> angles;
  std::vector<double> offsets;
  int n_times = 1;
  std::vector<double> v;

  Sinogram(std::vector<double> ang, std::vector<double> off, int nt = 1)
      : angles(std::move(ang)), offsets(std::move(off)), n_times(nt) {
    if (angles.empty() || offsets.empty() || n_times < 1)
      throw std::invalid_argument("Sinogram: empty geometry");
    for (size_t a = 0; a < angles.size(); ++a) {
      if (angles[a] < 0.0 || angles[a] >= M_PI)
        throw std::invalid_argument("Sinogram: angles must lie in [0, pi)");
      if (a > 0 && !(angles[a] > angles[a - 1]))
        throw std::invalid_argument("Sinogram: angles must be strictly increasing");
    }
    const double circum = std::sqrt(2.0) / 2.0;
    const size_t m = offsets.size();
    for (size_t o = 0; o < m; ++o) {
      if (std::abs(offsets[o]) > circum + 1e-12)
        throw std::invalid_argument("Sinogram: offsets must stay within the circumradius");
      if (o > 0 && !(offsets[o] > offsets[o - 1]))
        throw std::invalid_argument("Sinogram: offsets must be strictly increasing");
      if (std::abs(offsets[o] + offsets[m - 1 - o]) > 1e-12)
        throw std::invalid_argument("Sinogram: offsets must be symmetric about 0");
    }
    v.assign(static_cast<size_t>(n_times) * angles.size() * offsets.size(), 0.0);
  }

  size_t num_angles() const { return angles.size(); }
  size_t num_offsets() const { return offsets.size(); }
  double& at(int t, size_t a, size_t o) {
    return v[(static_cast<size_t>(t) * angles.size() + a) * offsets.size() + o];
  }
  double at(int t, size_t a, size_t o) const {
    return v[(static_cast<size_t>(t) * angles.size() + a) * offsets.size() + o];
  }
};

namespace detail {

/// Parameter interval of the line segment anchor + u * dir inside the closed
/// unit square; empty when the line misses.
inline bool clip_chord(Vec2 anchor, Vec2 dir, double& u0, double& u1) {
  u0 = -1e300;
  u1 = 1e300;
  const double p[2] = {anchor.x, anchor.y};
  const double d[2] = {dir.x, dir.y};
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-14) {
      if (p[ax] < 0.0 || p[ax] > 1.0) return false;
      continue;
    }
    double a = (0.0 - p[ax]) / d[ax];
    double b = (1.0 - p[ax]) / d[ax];
    if (a > b) std::swap(a, b);
    u0 = std::max(u0, a);
    u1 = std::min(u1, b);
  }
  return u1 >= u0;
}

/// Bilinear sample of the real part; coordinates clamped to the square.
inline double sample_bilinear(const Field& f, double x, double y) {
  const SpatialGrid& g = f.grid;
  const double gx = std::min(std::max(x, 0.0), 1.0) / g.h;
  const double gy = std::min(std::max(y, 0.0), 1.0) / g.h;
  const int ix = std::min(static_cast<int>(gx), g.n - 2);
  const int iy = std::min(static_cast<int>(gy), g.n - 2);
  const double fx = gx - ix, fy = gy - iy;
  return (1 - fx) * (1 - fy) * f.at(ix, iy).real() + fx * (1 - fy) * f.at(ix + 1, iy).real() +
         (1 - fx) * fy * f.at(ix, iy + 1).real() + fx * fy * f.at(ix + 1, iy + 1).real();
}

inline void require_real(const Field& f, const char* who) {
  for (const cplx& z : f.v)
    if (std::abs(z.imag()) > 1e-12)
      throw std::invalid_argument(std::string(who) + ": field must be real-valued");
}

}  // namespace detail

/// Integral of f along the line's chord inside the square: composite
/// trapezoid at step h/2 on bilinear samples. A line missing the square
/// yields 0 and clears *hit.
inline double xray_forward(const Field& f, const LineSpec& line, bool* hit = nullptr) {
  detail::require_real(f, "xray_forward");
  double u0, u1;
  if (!detail::clip_chord(line.anchor(), line.direction(), u0, u1)) {
    if (hit) *hit = false;
    return 0.0;
  }
  if (hit) *hit = true;
  const double len = u1 - u0;
  if (len == 0.0) return 0.0;
  const int m = std::max(1, static_cast<int>(std::ceil(len / (f.grid.h / 2.0))));
  const double du = len / m;
  const Vec2 a = line.anchor(), d = line.direction();
  double acc = 0.0;
  for (int j = 0; j <= m; ++j) {
    const double u = u0 + j * du;
    const double w = (j == 0 || j == m) ? 0.5 : 1.0;
    acc += w * detail::sample_bilinear(f, a.x + u * d.x, a.y + u * d.y);
  }
  return acc * du;
}

/// Full sinogram of one time slice over the given geometry.
inline Sinogram xray_forward(const Field& f, const std::vector<double>& angles,
                             const std::vector<double>& offsets) {
  detail::require_real(f, "xray_forward");
  Sinogram s(angles, offsets, 1);
  for (size_t a = 0; a < s.num_angles(); ++a)
    for (size_t o = 0; o < s.num_offsets(); ++o)
      s.at(0, a, o) = xray_forward(f, LineSpec{s.angles[a], s.offsets[o]});
  return s;
}

/// Filtered backprojection of one time index of a sinogram onto a grid:
/// ramp-filters each angle's projection through a zero-padded (x2) FFT, then
/// backprojects with linear interpolation in the offset coordinate. Requires
/// at least 60 angles and one offset per grid line, uniformly spaced.
inline Field fbp_invert(const Sinogram& s, const SpatialGrid& g, int t_index = 0) {
  const size_t na = s.num_angles(), no = s.num_offsets();
  if (na < 60 || no < static_cast<size_t>(g.n))
    throw std::invalid_argument(
        "fbp_invert: needs >= 60 angles and >= " + std::to_string(g.n) + " offsets, got " +
        std::to_string(na) + " angles and " + std::to_string(no) + " offsets");
  if (t_index < 0 || t_index >= s.n_times)
    throw std::invalid_argument("fbp_invert: time index out of range");
  const double ds = s.offsets[1] - s.offsets[0];
  for (size_t o = 1; o < no; ++o)
    if (std::abs(s.offsets[o] - s.offsets[o - 1] - ds) > 1e-9 * ds)
      throw std::invalid_argument("fbp_invert: filtering requires uniformly spaced offsets");

  // ramp filter per angle on the doubled interval
  const int L = static_cast<int>(2 * no);
  std::vector<double> filtered(na * no);
  {
    fftw_complex* buf = fftw_alloc_complex(L);
    fftw_plan fwd = fftw_plan_dft_1d(L, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_plan bwd = fftw_plan_dft_1d(L, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    for (size_t a = 0; a < na; ++a) {
      for (int j = 0; j < L; ++j) {
        buf[j][0] = (j < static_cast<int>(no)) ? s.at(t_index, a, j) : 0.0;
        buf[j][1] = 0.0;
      }
      fftw_execute(fwd);
      for (int j = 0; j < L; ++j) {
        const double nu = std::min(j, L - j) / (L * ds);
        buf[j][0] *= nu;
        buf[j][1] *= nu;
      }
      fftw_execute(bwd);
      for (size_t o = 0; o < no; ++o) filtered[a * no + o] = buf[o][0] / L;
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf);
  }

  // angle weights: trapezoid on the pi-periodic circle
  std::vector<double> wa(na);
  for (size_t a = 0; a < na; ++a) {
    const double prev = (a == 0) ? s.angles[na - 1] - M_PI : s.angles[a - 1];
    const double next = (a + 1 == na) ? s.angles[0] + M_PI : s.angles[a + 1];
    wa[a] = 0.5 * (next - prev);
  }

  Field out(g);
  for (size_t a = 0; a < na; ++a) {
    const double st = std::sin(s.angles[a]), ct = std::cos(s.angles[a]);
    const double* fp = &filtered[a * no];
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        // offset coordinate of the node: (x - center) . perp(direction)
        const double sx = -(g.x(ix) - 0.5) * st + (g.y(iy) - 0.5) * ct;
        const double pos = (sx - s.offsets[0]) / ds;
        if (pos < 0.0 || pos > static_cast<double>(no - 1)) continue;
        const int o = std::min(static_cast<int>(pos), static_cast<int>(no) - 2);
        const double fr = pos - o;
        out.at(ix, iy) += wa[a] * ((1.0 - fr) * fp[o] + fr * fp[o + 1]);
      }
  }
  return out;
}

}  // namespace wvlt
