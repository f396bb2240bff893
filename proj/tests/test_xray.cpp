#include <wvlt/xray.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace {

using wvlt::Field;
using wvlt::LineSpec;
using wvlt::Sinogram;
using wvlt::SpatialGrid;
using wvlt::Vec2;
using wvlt::fbp_invert;
using wvlt::max_abs;
using wvlt::perp;
using wvlt::xray_forward;
using wvlt_test::loglog_slope;

constexpr double kPi = 3.14159265358979323846;

std::vector<double> symmetric_offsets(double smax, int m) {
  std::vector<double> o(m);
  for (int i = 0; i < m; ++i) o[i] = -smax + i * (2.0 * smax / (m - 1));
  return o;
}

std::vector<double> uniform_angles(int na) {
  std::vector<double> a(na);
  for (int i = 0; i < na; ++i) a[i] = i * kPi / na;
  return a;
}

/// Smooth compactly supported radial bump.
double bump(double x, double y, double cx, double cy, double R) {
  const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (R * R);
  return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
}

Field bump_field(const SpatialGrid& g, double cx, double cy, double R) {
  Field f(g);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) f.at(ix, iy) = bump(g.x(ix), g.y(iy), cx, cy, R);
  return f;
}

TEST(XrayForward, ConstantFieldCenterChord) {
  SpatialGrid g(65);
  Field ones(g);
  for (auto& z : ones.v) z = 1.0;
  bool hit = false;
  EXPECT_NEAR(xray_forward(ones, LineSpec{0.0, 0.0}, &hit), 1.0, 1e-14);
  EXPECT_TRUE(hit);
  // beyond the circumradius every line misses
  EXPECT_EQ(xray_forward(ones, LineSpec{kPi / 4, 0.71}, &hit), 0.0);
  EXPECT_FALSE(hit);
}

TEST(XrayForward, DiskChordLengths) {
  SpatialGrid g(129);
  Field disk(g);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      const double dx = g.x(ix) - 0.5, dy = g.y(iy) - 0.5;
      disk.at(ix, iy) = (dx * dx + dy * dy <= 0.0625) ? 1.0 : 0.0;
    }
  // chord of a radius-1/4 disk at distance d: 2 sqrt(1/16 - d^2)
  EXPECT_NEAR(xray_forward(disk, LineSpec{0.3, 0.0}), 0.5, 1e-2);
  EXPECT_NEAR(xray_forward(disk, LineSpec{1.1, 0.15}), 0.4, 1e-2);
  EXPECT_LE(std::abs(xray_forward(disk, LineSpec{2.0, 0.3})), 1e-12);
}

TEST(XrayForward, SmoothBumpQuadratureSecondOrder) {
  const double cx = 0.45, cy = 0.55, R = 0.3;
  const LineSpec line{0.4, 0.07};
  double u0, u1;
  ASSERT_TRUE(wvlt::detail::clip_chord(line.anchor(), line.direction(), u0, u1));
  const int M = 200000;
  const double du = (u1 - u0) / M;
  double ref = 0.0;
  for (int j = 0; j <= M; ++j) {
    const double u = u0 + j * du;
    const double w = (j == 0 || j == M) ? 0.5 : 1.0;
    ref += w * bump(line.anchor().x + u * std::cos(line.angle),
                    line.anchor().y + u * std::sin(line.angle), cx, cy, R);
  }
  ref *= du;

  std::vector<double> hs, errs;
  for (int n : {17, 33, 65, 129}) {
    SpatialGrid g(n);
    errs.push_back(std::abs(xray_forward(bump_field(g, cx, cy, R), line) - ref));
    hs.push_back(g.h);
  }
  EXPECT_GE(loglog_slope(hs, errs), 1.9);
  EXPECT_LE(errs.back(), 1.5e-4);
}

TEST(Xray, GeometryValidation) {
  EXPECT_THROW(Sinogram({0.5, 0.5}, {-0.1, 0.1}), std::invalid_argument);
  EXPECT_THROW(Sinogram({0.0, kPi}, {-0.1, 0.1}), std::invalid_argument);
  EXPECT_THROW(Sinogram({0.0, 1.0}, {-0.2, 0.1}), std::invalid_argument);
  EXPECT_THROW(Sinogram({0.0, 1.0}, {-0.8, 0.0, 0.8}), std::invalid_argument);

  SpatialGrid g(65);
  Sinogram few_angles(uniform_angles(59), symmetric_offsets(0.7, 70));
  EXPECT_THROW(fbp_invert(few_angles, g), std::invalid_argument);
  Sinogram few_offsets(uniform_angles(60), symmetric_offsets(0.7, 64));
  EXPECT_THROW(fbp_invert(few_offsets, g), std::invalid_argument);
  Sinogram ok(uniform_angles(60), symmetric_offsets(0.7, 65));
  EXPECT_THROW(fbp_invert(ok, g, 1), std::invalid_argument);
}

TEST(Fbp, ZeroSinogramAndLinearity) {
  SpatialGrid g(65);
  Sinogram z(uniform_angles(60), symmetric_offsets(0.7, 65));
  EXPECT_EQ(max_abs(fbp_invert(z, g)), 0.0);

  const auto ang = uniform_angles(60);
  const auto off = symmetric_offsets(0.7, 80);
  Field f1 = bump_field(g, 0.4, 0.5, 0.25), f2 = bump_field(g, 0.6, 0.55, 0.2);
  Sinogram s1 = xray_forward(f1, ang, off), s2 = xray_forward(f2, ang, off);
  Sinogram s12 = s1;
  for (size_t i = 0; i < s12.v.size(); ++i) s12.v[i] += s2.v[i];
  Field r1 = fbp_invert(s1, g), r2 = fbp_invert(s2, g), r12 = fbp_invert(s12, g);
  double d = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    d = std::max(d, std::abs(r12.v[i] - r1.v[i] - r2.v[i]));
  EXPECT_LE(d, 1e-10);
}

TEST(Fbp, ReconstructsSmoothBump) {
  const int n = 129;
  SpatialGrid g(n);
  Field f = bump_field(g, 0.45, 0.55, 0.3);
  Sinogram s =
      xray_forward(f, uniform_angles(180), symmetric_offsets(std::sqrt(2.0) / 2, 2 * n));
  Field r = fbp_invert(s, g);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) {
    num += std::norm(r.v[i] - f.v[i]);
    den += std::norm(f.v[i]);
  }
  const double rel = std::sqrt(num / den);
  EXPECT_LE(rel, 0.10);
  // regression band around the achieved accuracy
  EXPECT_LE(rel, 0.03);
}

TEST(Xray, RotationInvariantPhantomHasConstantSinogram) {
  SpatialGrid g(129);
  Field f = bump_field(g, 0.5, 0.5, 0.3);
  Sinogram s = xray_forward(f, uniform_angles(90), symmetric_offsets(0.7, 195));
  double dev = 0.0, mx = 0.0;
  for (size_t o = 0; o < s.num_offsets(); ++o) {
    double lo = 1e300, hi = -1e300;
    for (size_t a = 0; a < s.num_angles(); ++a) {
      lo = std::min(lo, s.at(0, a, o));
      hi = std::max(hi, s.at(0, a, o));
      mx = std::max(mx, std::abs(s.at(0, a, o)));
    }
    dev = std::max(dev, hi - lo);
  }
  EXPECT_LE(dev / mx, 1e-3);
}

TEST(Xray, ProjectionSpectrumMatchesFieldSliceSpectrum) {
  const int n = 65;
  SpatialGrid g(n);
  Field f = bump_field(g, 0.45, 0.55, 0.3);
  const auto off = symmetric_offsets(std::sqrt(2.0) / 2, 130);
  const double ds = off[1] - off[0];
  for (double th : {0.0, kPi / 4, 1.9}) {
    Sinogram s = xray_forward(f, std::vector<double>{th}, off);
    const Vec2 pp = perp(Vec2{std::cos(th), std::sin(th)});
    double worst = 0.0, peak = 0.0;
    for (int k = 0; k <= n / 4; ++k) {
      const double nu = k / (off.size() * ds);
      wvlt::cplx ph = 0.0;
      for (size_t o = 0; o < off.size(); ++o)
        ph += s.at(0, 0, o) * std::polar(1.0, -2 * kPi * nu * off[o]) * ds;
      wvlt::cplx fh = 0.0;
      for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
          const double sc = (g.x(ix) - 0.5) * pp.x + (g.y(iy) - 0.5) * pp.y;
          fh += f.at(ix, iy) * std::polar(1.0, -2 * kPi * nu * sc) * g.h * g.h;
        }
      worst = std::max(worst, std::abs(ph - fh));
      peak = std::max(peak, std::abs(fh));
    }
    // relative to the band's peak magnitude
    EXPECT_LE(worst / peak, 2e-2);
  }
}

TEST(Xray, EveryProjectionCarriesTheFieldMass) {
  SpatialGrid g(65);
  Field f = bump_field(g, 0.45, 0.55, 0.25);
  Sinogram s = xray_forward(f, uniform_angles(90), symmetric_offsets(0.7, 129));
  const double ds = s.offsets[1] - s.offsets[0];
  const double mass = wvlt::integrate_space(f).real();
  for (size_t a = 0; a < s.num_angles(); ++a) {
    double pm = 0.0;
    for (size_t o = 0; o < s.num_offsets(); ++o)
      pm += ds * s.at(0, a, o) * ((o == 0 || o + 1 == s.num_offsets()) ? 0.5 : 1.0);
    EXPECT_NEAR(pm / mass, 1.0, 1e-3);
  }
}

}  // namespace
