#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <wvlt/grid.hpp>

namespace wvlt {

/// Smooth compactly supported radial profile: cos^2(pi r / (2 radius)) for
/// r < radius, zero beyond. C^1 at the rim, C^inf inside.
inline double smooth_radial_bump(double r, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("smooth_radial_bump: radius must be positive");
  if (r >= radius) return 0.0;
  const double c = std::cos(0.5 * M_PI * r / radius);
  return c * c;
}

namespace detail {

/// Normalized elliptic radius of x for an ellipse with center c, semi-axes
/// (a, b) and rotation angle alpha.
inline double elliptic_radius(Vec2 x, Vec2 c, double a, double b, double alpha) {
  const double dx = x.x - c.x, dy = x.y - c.y;
  const double u = std::cos(alpha) * dx + std::sin(alpha) * dy;
  const double v = -std::sin(alpha) * dx + std::cos(alpha) * dy;
  return std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
}

inline double shepp_like(Vec2 x) {
  struct Ell {
    Vec2 c;
    double a, b, alpha, amp;
  };
  static const Ell ells[3] = {{{0.50, 0.52}, 0.30, 0.38, 0.0, 1.0},
                              {{0.42, 0.55}, 0.10, 0.16, 0.35, -0.5},
                              {{0.60, 0.42}, 0.08, 0.11, -0.30, 0.4}};
  double v = 0.0;
  for (const Ell& e : ells) {
    const double r = elliptic_radius(x, e.c, e.a, e.b, e.alpha);
    if (r < 1.0) {
      const double c = std::cos(0.5 * M_PI * r);
      v += e.amp * c * c;
    }
  }
  return v;
}

}  // namespace detail

/// Names accepted by make_named_phantom.
inline const std::vector<std::string>& phantom_names() {
  static const std::vector<std::string> names = {"zero", "bump_q", "bump_beta", "separable",
                                                 "shepp"};
  return names;
}

/// Builds one of the built-in phantoms on the given grid and time axis:
///  - zero:      both coefficients vanish
///  - bump_q:    time-independent smooth radial bump in the potential
///  - bump_beta: the same bump in the quadratic coefficient, zero potential
///  - separable: potential sin^2(pi t / T) times the radial bump
///  - shepp:     three smooth ellipses of mixed sign in the potential
inline Phantom make_named_phantom(const std::string& name, const SpatialGrid& g,
                                  const TimeAxis& ta) {
  Phantom ph(g, ta);
  auto fill = [&](bool into_beta, auto f) {
    SpaceTimeField& dst = into_beta ? ph.beta : ph.q;
    for (int k = 0; k <= ta.n_t; ++k)
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) dst.at(k, ix, iy) = f(ta.t(k), g.node(ix, iy));
  };
  auto bump = [](Vec2 x) {
    const double dx = x.x - 0.5, dy = x.y - 0.5;
    return smooth_radial_bump(std::sqrt(dx * dx + dy * dy), 0.35);
  };
  if (name == "zero") {
  } else if (name == "bump_q") {
    fill(false, [&](double, Vec2 x) { return bump(x); });
  } else if (name == "bump_beta") {
    fill(true, [&](double, Vec2 x) { return bump(x); });
  } else if (name == "separable") {
    fill(false, [&](double t, Vec2 x) {
      const double s = std::sin(M_PI * t / ta.T);
      return s * s * bump(x);
    });
  } else if (name == "shepp") {
    fill(false, [&](double, Vec2 x) { return detail::shepp_like(x); });
  } else {
    throw std::invalid_argument("make_named_phantom: unknown phantom '" + name + "'");
  }
  return ph;
}

}  // namespace wvlt
