#pragma once

// C-infinity plateau bumps used to localize probes in a spatial tube and a
// time window. The profile equals 1 on the inner half of its support and
// decays to an exact 0 outside, so discrete supports are exactly representable.

#include <cmath>
#include <stdexcept>

namespace wvlt {

/// exp(-1/u) for u > 0, 0 otherwise; smooth on the whole line.
inline double smooth_tail(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

/// Monotone smooth step: 0 for u <= 0, 1 for u >= 1.
inline double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = smooth_tail(u);
  return a / (a + smooth_tail(1.0 - u));
}

/// Even plateau bump: 1 on |s| <= width/2, 0 on |s| >= width, smooth between.
inline double plateau(double s, double width) {
  return smooth_step(2.0 - 2.0 * std::abs(s) / width);
}

/// Localization profile for a probe: a spatial cross-section chi supported in
/// [-eps, eps] across the tube and a time window phi supported in
/// [t_center - t_width, t_center + t_width]. Both are plateau bumps with
/// value 1 on the inner half of the support.
struct BumpSpec {
  double eps;
  double t_center;
  double t_width;

  BumpSpec(double eps_, double t_center_, double t_width_)
      : eps(eps_), t_center(t_center_), t_width(t_width_) {
    if (!(eps > 0.0) || eps > 0.25)
      throw std::invalid_argument("BumpSpec: eps must lie in (0, 1/4]");
    if (!(t_width > 0.0)) throw std::invalid_argument("BumpSpec: t_width must be positive");
  }

  double chi(double s) const { return plateau(s, eps); }
  double phi(double t) const { return plateau(t - t_center, t_width); }

  /// True iff t lies in the closed time support of phi.
  bool time_active(double t) const { return std::abs(t - t_center) <= t_width; }

  /// The time support [t_center - t_width, t_center + t_width] must sit
  /// strictly inside (0, horizon) so probes are compatible with zero data.
  void require_inside(double horizon) const {
    if (!(t_center - t_width > 0.0) || !(t_center + t_width < horizon))
      throw std::invalid_argument("BumpSpec: time support must lie strictly inside (0, T)");
  }
};

}  // namespace wvlt
