#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <wvlt/measurement.hpp>
#include <wvlt/phantoms.hpp>
#include <wvlt/xray.hpp>

namespace wvlt {

/// Quadrature values of the bump-family calibration constants: the squared
/// and cubed time-profile masses, the squared transversal mass, and the
/// three-tube transversal overlap integral chi(u) chi(v) chi((u+v)/sqrt2).
struct TubeConstants {
  double phi2 = 0.0;
  double phi3 = 0.0;
  double chi2 = 0.0;
  double blob = 0.0;
};

namespace detail {

template <class F>
double simpson(double a, double b, int panels, F f) {
  if (panels < 2 || panels % 2 != 0)
    throw std::invalid_argument("simpson: need an even positive panel count");
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

}  // namespace detail

inline TubeConstants tube_constants(const BumpSpec& b, int panels = 2000) {
  TubeConstants tc;
  const double t0 = b.t_center - b.t_width, t1 = b.t_center + b.t_width;
  tc.phi2 = detail::simpson(t0, t1, panels, [&](double t) {
    const double v = b.phi(t);
    return v * v;
  });
  tc.phi3 = detail::simpson(t0, t1, panels, [&](double t) {
    const double v = b.phi(t);
    return v * v * v;
  });
  tc.chi2 = detail::simpson(-b.eps, b.eps, panels, [&](double s) {
    const double v = b.chi(s);
    return v * v;
  });
  const int inner = std::max(2, (panels / 4) & ~1);
  tc.blob = detail::simpson(-b.eps, b.eps, panels, [&](double u) {
    return b.chi(u) * detail::simpson(-b.eps, b.eps, inner, [&](double v) {
             return b.chi(v) * b.chi((u + v) * std::sqrt(0.5));
           });
  });
  return tc;
}

/// Transversally weighted line integral of a static field: the chi^2-weighted
/// average of parallel line integrals across the probe tube.
inline double weighted_line_integral(const Field& f, const LineSpec& line, const BumpSpec& bump,
                                     int panels = 400) {
  const double num = detail::simpson(-bump.eps, bump.eps, panels, [&](double tau) {
    const double c = bump.chi(tau);
    return c * c * xray_forward(f, LineSpec{line.angle, line.offset + tau});
  });
  const double den = detail::simpson(-bump.eps, bump.eps, panels, [&](double tau) {
    const double c = bump.chi(tau);
    return c * c;
  });
  return num / den;
}

/// One interior sampling site for the quadratic coefficient: the point x0,
/// an orthonormal incoming pair (om1, om2), the derived dual direction
/// varpi = -(om1 + om2)/sqrt2, and the boundary anchors of all three rays.
struct BetaSite {
  Vec2 x0{};
  Vec2 om1{}, om2{}, varpi{};
  Vec2 y1{}, y2{}, y0{};
};

inline BetaSite make_beta_site(Vec2 x0, Vec2 om1, Vec2 om2) {
  auto len = [](Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); };
  if (std::abs(len(om1) - 1.0) > 1e-12 || std::abs(len(om2) - 1.0) > 1e-12)
    throw std::invalid_argument("make_beta_site: directions must be unit vectors");
  if (std::abs(om1.x * om2.x + om1.y * om2.y) > 1e-12)
    throw std::invalid_argument("make_beta_site: directions must be orthogonal");
  if (!(x0.x > 0.0 && x0.x < 1.0 && x0.y > 0.0 && x0.y < 1.0))
    throw std::invalid_argument("make_beta_site: point must be interior");
  BetaSite s;
  s.x0 = x0;
  s.om1 = om1;
  s.om2 = om2;
  Vec2 v{-(om1.x + om2.x), -(om1.y + om2.y)};
  const double vl = len(v);
  s.varpi = {v.x / vl, v.y / vl};
  s.y1 = x0 - detail::back_reach(x0, om1) * om1;
  s.y2 = x0 - detail::back_reach(x0, om2) * om2;
  s.y0 = x0 - detail::back_reach(x0, s.varpi) * s.varpi;
  return s;
}

/// Validates a site: unit dual direction, orthonormal pair, and the three
/// rays concurrent at x0 to within half a mesh width.
inline void check_beta_site(const BetaSite& s, double h) {
  auto len = [](Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); };
  if (std::abs(len(s.varpi) - 1.0) > 1e-9)
    throw std::invalid_argument("check_beta_site: dual direction is not unit");
  if (std::abs(s.om1.x * s.om2.x + s.om1.y * s.om2.y) > 1e-9)
    throw std::invalid_argument("check_beta_site: directions are not orthogonal");
  // intersection of the first two rays
  const double det = s.om1.x * (-s.om2.y) - (-s.om2.x) * s.om1.y;
  if (std::abs(det) < 1e-12) throw std::invalid_argument("check_beta_site: parallel rays");
  const double bx = s.y2.x - s.y1.x, by = s.y2.y - s.y1.y;
  const double t1 = (bx * (-s.om2.y) - (-s.om2.x) * by) / det;
  const Vec2 xi{s.y1.x + t1 * s.om1.x, s.y1.y + t1 * s.om1.y};
  auto miss = [&](Vec2 a) { return len({a.x - s.x0.x, a.y - s.x0.y}); };
  if (miss(xi) > 0.5 * h)
    throw std::invalid_argument("check_beta_site: rays do not meet at the site point");
  // the dual ray must pass through x0 as well
  const double tau0 =
      std::abs(-(s.x0.x - s.y0.x) * s.varpi.y + (s.x0.y - s.y0.y) * s.varpi.x);
  if (tau0 > 0.5 * h)
    throw std::invalid_argument("check_beta_site: dual ray misses the site point");
}

/// Measurement geometry for one recovery run: parallel-beam lines (angles x
/// signed offsets), probe time centers, and interior sites for the quadratic
/// coefficient.
struct GeometrySet {
  std::vector<double> angles;
  std::vector<double> offsets;
  std::vector<double> centers;
  std::vector<BetaSite> sites;
};

/// Uniform parallel-beam geometry: n_angles over [0, pi), n_offsets over
/// [-span, span].
inline GeometrySet make_parallel_geometry(int n_angles, int n_offsets, double span,
                                          std::vector<double> centers) {
  if (n_angles < 1 || n_offsets < 2)
    throw std::invalid_argument("make_parallel_geometry: need at least 1 angle and 2 offsets");
  if (!(span > 0.0) || span > std::sqrt(2.0) / 2.0)
    throw std::invalid_argument("make_parallel_geometry: span must lie in (0, sqrt2/2]");
  GeometrySet geo;
  for (int i = 0; i < n_angles; ++i) geo.angles.push_back(M_PI * i / n_angles);
  for (int j = 0; j < n_offsets; ++j)
    geo.offsets.push_back(-span + 2.0 * span * j / (n_offsets - 1));
  geo.centers = std::move(centers);
  return geo;
}

/// Axis-aligned site lattice: per_side x per_side points over [lo, hi]^2.
inline GeometrySet make_site_lattice(int per_side, double lo, double hi,
                                     std::vector<double> centers) {
  if (per_side < 1) throw std::invalid_argument("make_site_lattice: need at least one site");
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi))
    throw std::invalid_argument("make_site_lattice: lattice must be interior");
  GeometrySet geo;
  for (int iy = 0; iy < per_side; ++iy)
    for (int ix = 0; ix < per_side; ++ix) {
      const double fx = per_side == 1 ? 0.5 : static_cast<double>(ix) / (per_side - 1);
      const double fy = per_side == 1 ? 0.5 : static_cast<double>(iy) / (per_side - 1);
      geo.sites.push_back(
          make_beta_site({lo + (hi - lo) * fx, lo + (hi - lo) * fy}, {1.0, 0.0}, {0.0, 1.0}));
    }
  geo.centers = std::move(centers);
  return geo;
}

/// Tuning knobs shared by the recovery entry points. t_width falls back to
/// T/8 when left at zero. The calibrated path inverts the measured instrument
/// response assembled from reference-medium solves; the uncalibrated path
/// backprojects the raw line estimates directly.
struct RecoveryParams {
  double eps = 0.25;           ///< transversal half-width of line probes
  double eps_site = 0.1;       ///< transversal half-width of site probes
  double t_width = 0.0;        ///< probe time half-width, 0 selects T/8
  double compat_tol = 1e-2;    ///< compatibility budget for measurement inputs
  double tikhonov = 3e-2;      ///< gradient-penalty weight of the calibrated inversion
  int recon_n = 33;            ///< reconstruction grid nodes per side
  bool calibrated = true;      ///< invert the measured response vs plain backprojection
  bool time_independent = true;  ///< reuse one center's measurements for all centers
  int quad_panels = 2000;      ///< quadrature panels for calibration constants
};

/// Output of one recovery run at a single modulation rate: per-center slice
/// estimates (potential mode) or per-center, per-site values (quadratic
/// mode), plus relative errors once ground truth is attached.
struct RecoveryReport {
  double rho = 0.0;
  std::vector<double> centers;
  std::vector<Field> slices;
  std::vector<BetaSite> sites;
  std::vector<std::vector<double>> site_values;
  std::vector<double> slice_errors;
  std::vector<std::vector<double>> site_errors;
  bool has_truth = false;

  /// Relative L2 slice errors against per-center ground-truth fields; falls
  /// back to the absolute L2 norm when the truth slice vanishes.
  void attach_q_truth(const std::vector<Field>& truth) {
    if (slices.empty()) throw std::runtime_error("RecoveryReport: no slice estimates to compare");
    if (truth.size() != slices.size())
      throw std::invalid_argument("RecoveryReport: ground truth count mismatch");
    slice_errors.clear();
    for (size_t i = 0; i < slices.size(); ++i) {
      const Field& a = slices[i];
      const Field& b = truth[i];
      if (!(a.grid == b.grid))
        throw std::invalid_argument("RecoveryReport: ground truth grid mismatch");
      double num = 0.0, den = 0.0;
      for (int iy = 0; iy < a.grid.n; ++iy)
        for (int ix = 0; ix < a.grid.n; ++ix) {
          const double w = quad_weight(a.grid, ix, iy);
          num += w * std::norm(a.at(ix, iy) - b.at(ix, iy));
          den += w * std::norm(b.at(ix, iy));
        }
      slice_errors.push_back(den > 1e-24 ? std::sqrt(num / den) : std::sqrt(num));
    }
    has_truth = true;
  }

  /// Relative site errors against per-center, per-site ground-truth values;
  /// absolute where the truth vanishes.
  void attach_beta_truth(const std::vector<std::vector<double>>& truth) {
    if (site_values.empty())
      throw std::runtime_error("RecoveryReport: no site estimates to compare");
    if (truth.size() != site_values.size())
      throw std::invalid_argument("RecoveryReport: ground truth count mismatch");
    site_errors.clear();
    for (size_t c = 0; c < site_values.size(); ++c) {
      if (truth[c].size() != site_values[c].size())
        throw std::invalid_argument("RecoveryReport: ground truth site count mismatch");
      std::vector<double> row;
      for (size_t i = 0; i < site_values[c].size(); ++i) {
        const double d = std::abs(site_values[c][i] - truth[c][i]);
        row.push_back(std::abs(truth[c][i]) > 1e-12 ? d / std::abs(truth[c][i]) : d);
      }
      site_errors.push_back(std::move(row));
    }
    has_truth = true;
  }
};

namespace detail {

inline MeasurementRecord assemble_reference_record(const Scenario& ref,
                                                   const MeasurementInput& in,
                                                   const GaugeShift& fg,
                                                   const SpaceTimeField& uref) {
  MeasurementRecord rec{in.g0, in.g1, in.dirichlet, neumann_trace(uref), {}, {}, fg};
  if (ref.kind == MeasurementKind::all_boundary) {
    rec.final_u = uref.slice_field(uref.time.n_t);
    rec.final_ut = final_dt(uref);
  }
  return rec;
}

struct LineSample {
  double value = 0.0;
  double chord = 0.0;
  bool hit = false;
};

/// Runs the paired probe measurement for one line. When kernel_row is given,
/// also accumulates the instrument kernel on the reconstruction grid from the
/// two reference-medium solves the estimate is built on.
inline LineSample sample_line(const Scenario& s, const Scenario& ref, const SpaceTimeField& zq,
                              const LineSpec& line, const BumpSpec& bump, double rho,
                              double norm, double compat_tol, const SpatialGrid* recon,
                              double* kernel_row) {
  LineSample out;
  double u0 = 0.0, u1 = 0.0;
  if (!clip_chord(line.anchor(), line.direction(), u0, u1)) return out;
  if (u1 - u0 < 2.0 * s.grid.h) return out;
  const Vec2 dir = line.direction();
  const Vec2 mid = line.anchor() + 0.5 * (u0 + u1) * dir;
  // grazing chords run along an edge and carry no interior information
  if (std::min({mid.x, 1.0 - mid.x, mid.y, 1.0 - mid.y}) < 1e-12) return out;
  out.hit = true;
  out.chord = u1 - u0;

  const Vec2 entry = line.anchor() + u0 * dir;
  const Vec2 leave = line.anchor() + u1 * dir;
  const CgoProbe fp = assemble_probe(Sense::forward, rho, RaySpec(entry, dir), 0, bump, zq);
  const CgoProbe bp =
      assemble_probe(Sense::backward, rho, RaySpec(leave, -1.0 * dir), 0, bump, zq);
  const GaugeShift fg(rho, dir, Sense::forward);
  const GaugeShift bg(rho, -1.0 * dir, Sense::backward);

  MeasurementInput in(s.grid, s.axis);
  in.dirichlet = dirichlet_trace(fp.gauged_total);
  const MeasurementRecord rc = apply_measurement(s, in, MeasurementMode::linear, fg, compat_tol);
  const SpaceTimeField uref = solve_linear({ref.phantom.q, SpaceTimeField(s.grid, s.axis),
                                            in.dirichlet, Field(s.grid), Field(s.grid),
                                            TimeDirection::forward, fg});
  const MeasurementRecord rr = assemble_reference_record(ref, in, fg, uref);
  const MeasurementRecord diff = record_difference(rr, rc);
  const ProbeTraceData w = probe_trace_data(bp, false);
  out.value = boundary_pairing(PairingKind::q_identity, diff, w).real() / norm;

  if (kernel_row != nullptr) {
    const SpaceTimeField wref =
        solve_linear({ref.phantom.q, SpaceTimeField(s.grid, s.axis), w.trace, Field(s.grid),
                      Field(s.grid), TimeDirection::backward_final_data, bg});
    const int stride = (s.grid.n - 1) / (recon->n - 1);
    for (int iy = 0; iy < recon->n; ++iy)
      for (int ix = 0; ix < recon->n; ++ix) {
        double acc = 0.0;
        for (int k = 0; k <= s.axis.n_t; ++k)
          acc += quad_weight_t(s.axis, k) *
                 (uref.at(k, ix * stride, iy * stride) * wref.at(k, ix * stride, iy * stride))
                     .real();
        kernel_row[iy * recon->n + ix] = acc / norm;
      }
  }
  return out;
}

/// Gradient-penalized least squares against the measured instrument kernels:
/// minimizes |K q - est|^2 + lam * scale * |grad q|^2 on the reconstruction
/// grid, with the penalty weight scaled to the normal matrix.
inline Field kernel_solve(const std::vector<double>& est, const std::vector<double>& kernels,
                          size_t nl, const SpatialGrid& recon, double lam) {
  const int nr = recon.n;
  const int np = recon.num_nodes();
  std::vector<double> wq(np);
  for (int p = 0; p < np; ++p) wq[p] = quad_weight(recon, p % nr, p / nr);

  Eigen::MatrixXd A(nl, np);
  for (size_t l = 0; l < nl; ++l)
    for (int p = 0; p < np; ++p) A(l, p) = wq[p] * kernels[l * np + p];
  const Eigen::VectorXd b =
      Eigen::Map<const Eigen::VectorXd>(est.data(), static_cast<Eigen::Index>(nl));
  Eigen::MatrixXd M = A.transpose() * A;
  const Eigen::VectorXd rhs = A.transpose() * b;

  Eigen::MatrixXd LtL = Eigen::MatrixXd::Zero(np, np);
  auto couple = [&](int p, int pn) {
    LtL(p, p) += 1.0;
    LtL(pn, pn) += 1.0;
    LtL(p, pn) -= 1.0;
    LtL(pn, p) -= 1.0;
  };
  for (int iy = 0; iy < nr; ++iy)
    for (int ix = 0; ix < nr; ++ix) {
      if (ix + 1 < nr) couple(iy * nr + ix, iy * nr + ix + 1);
      if (iy + 1 < nr) couple(iy * nr + ix, (iy + 1) * nr + ix);
    }
  M += (lam * M.trace() / LtL.trace()) * LtL;

  const Eigen::VectorXd x = M.ldlt().solve(rhs);
  Field out(recon);
  for (int p = 0; p < np; ++p) out.v[p] = x[p];
  return out;
}

inline double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need at least two samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::runtime_error("fit_loglog_slope: nonpositive sample");
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(xs.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

/// Probe-pair estimate of the transversally weighted line integral of the
/// potential at one time center. Exactly zero when the scenario's potential
/// matches the reference medium.
inline double extract_line_integral_q(const Scenario& s, const LineSpec& line, double t_center,
                                      double rho, const RecoveryParams& p = {}) {
  const double tw = p.t_width > 0.0 ? p.t_width : s.axis.T / 8.0;
  const BumpSpec bump(p.eps, t_center, tw);
  bump.require_inside(s.axis.T);
  const TubeConstants tc = tube_constants(bump, p.quad_panels);
  const double norm = tc.phi2 * tc.chi2;
  if (norm < 1e-12)
    throw std::runtime_error("extract_line_integral_q: degenerate bump normalization");
  const Phantom zero_ph(s.grid, s.axis);
  const Scenario ref(zero_ph, s.cfg, s.kind);
  const SpaceTimeField zq(s.grid, s.axis);
  return detail::sample_line(s, ref, zq, line, bump, rho, norm, p.compat_tol, nullptr, nullptr)
      .value;
}

/// Recovers the potential on the reconstruction grid from boundary probe
/// measurements over the given parallel-beam geometry. The calibrated path
/// solves the measured linear response for the coefficient; the uncalibrated
/// path filters and backprojects the raw line estimates. Returns an empty
/// report for an empty geometry.
inline RecoveryReport recover_q(const Scenario& s, const GeometrySet& geo, double rho,
                                const RecoveryParams& p = {}) {
  RecoveryReport rep;
  rep.rho = rho;
  rep.centers = geo.centers;
  if (geo.angles.empty() || geo.offsets.empty() || geo.centers.empty()) return rep;

  const double tw = p.t_width > 0.0 ? p.t_width : s.axis.T / 8.0;
  for (double c : geo.centers) BumpSpec(p.eps, c, tw).require_inside(s.axis.T);
  const TubeConstants tc = tube_constants(BumpSpec(p.eps, geo.centers[0], tw), p.quad_panels);
  const double norm = tc.phi2 * tc.chi2;
  if (norm < 1e-12) throw std::runtime_error("recover_q: degenerate bump normalization");

  const SpatialGrid recon(p.recon_n);
  if (p.calibrated && (s.grid.n - 1) % (recon.n - 1) != 0)
    throw std::invalid_argument(
        "recover_q: reconstruction grid must subsample the solver grid");

  const Phantom zero_ph(s.grid, s.axis);
  const Scenario ref(zero_ph, s.cfg, s.kind);
  const SpaceTimeField zq(s.grid, s.axis);

  const size_t na = geo.angles.size(), no = geo.offsets.size();
  const size_t np = static_cast<size_t>(recon.num_nodes());
  const size_t nc = geo.centers.size();
  const size_t ncu = p.time_independent ? 1 : nc;

  Sinogram sino(geo.angles, geo.offsets, static_cast<int>(nc));
  std::vector<double> kernels;
  if (p.calibrated) kernels.assign(ncu * na * no * np, 0.0);

  for (size_t ci = 0; ci < ncu; ++ci) {
    const BumpSpec bump(p.eps, geo.centers[ci], tw);
    for (size_t a = 0; a < na; ++a)
      for (size_t o = 0; o < no; ++o) {
        double* krow =
            p.calibrated ? &kernels[((ci * na + a) * no + o) * np] : nullptr;
        const detail::LineSample ls =
            detail::sample_line(s, ref, zq, LineSpec{geo.angles[a], geo.offsets[o]}, bump, rho,
                                norm, p.compat_tol, p.calibrated ? &recon : nullptr, krow);
        if (p.time_independent)
          for (size_t c = 0; c < nc; ++c) sino.at(static_cast<int>(c), a, o) = ls.value;
        else
          sino.at(static_cast<int>(ci), a, o) = ls.value;
      }
  }

  for (size_t c = 0; c < nc; ++c) {
    if (p.time_independent && c > 0) {
      rep.slices.push_back(rep.slices.front());
      continue;
    }
    if (p.calibrated) {
      std::vector<double> est(na * no);
      for (size_t a = 0; a < na; ++a)
        for (size_t o = 0; o < no; ++o)
          est[a * no + o] = sino.at(static_cast<int>(c), a, o);
      const size_t ci = p.time_independent ? 0 : c;
      std::vector<double> block(kernels.begin() + static_cast<std::ptrdiff_t>(ci * na * no * np),
                                kernels.begin() +
                                    static_cast<std::ptrdiff_t>((ci + 1) * na * no * np));
      rep.slices.push_back(detail::kernel_solve(est, block, na * no, recon, p.tikhonov));
    } else {
      rep.slices.push_back(fbp_invert(sino, recon, static_cast<int>(c)));
    }
  }
  return rep;
}

/// Optional diagnostics of one site estimate: the raw boundary pairing, the
/// mass of the computable site kernel it is normalized by, and the
/// closed-form large-rho normalization for comparison.
struct SiteDiagnostics {
  double pairing = 0.0;
  double kernel_mass = 0.0;
  double asymptotic_mass = 0.0;
};

/// Second-order probe estimate of the quadratic coefficient at one site and
/// time center. The three probe legs run at rate rho along om1, om2 and at
/// the combined rate along varpi; the boundary pairing of the second-order
/// response is normalized by the mass of the computable site kernel.
/// q_background, when given, supplies the potential used in the model solves
/// and must match the scenario's shapes; the reference medium is used
/// otherwise.
inline double extract_point_beta(const Scenario& s, const BetaSite& site, double t_center,
                                 double rho, const RecoveryParams& p = {},
                                 const SpaceTimeField* q_background = nullptr,
                                 SiteDiagnostics* diag = nullptr) {
  check_beta_site(site, s.grid.h);
  const double clearance = p.eps_site * std::sqrt(2.0);
  if (std::min({site.x0.x, 1.0 - site.x0.x, site.x0.y, 1.0 - site.x0.y}) < clearance)
    throw std::invalid_argument(
        "extract_point_beta: site too close to the boundary for the probe width");
  const double tw = p.t_width > 0.0 ? p.t_width : s.axis.T / 8.0;
  const BumpSpec bump(p.eps_site, t_center, tw);
  bump.require_inside(s.axis.T);

  const SpaceTimeField zq(s.grid, s.axis);
  const SpaceTimeField& qb = q_background != nullptr ? *q_background : zq;
  if (!(qb.grid == s.grid) || !(qb.time == s.axis))
    throw std::invalid_argument("extract_point_beta: q_background shape mismatch");

  const double srho = std::sqrt(2.0) * rho;
  const CgoProbe fp1 = assemble_probe(Sense::forward, rho, RaySpec(site.y1, site.om1), 0, bump, qb);
  const CgoProbe fp2 = assemble_probe(Sense::forward, rho, RaySpec(site.y2, site.om2), 0, bump, qb);
  const CgoProbe bp0 =
      assemble_probe(Sense::backward, srho, RaySpec(site.y0, site.varpi), 0, bump, qb);
  const GaugeShift fg1(rho, site.om1, Sense::forward);
  const GaugeShift fg2(rho, site.om2, Sense::forward);
  const GaugeShift bg0(srho, site.varpi, Sense::backward);

  GaugedInput h1{MeasurementInput(s.grid, s.axis), fg1};
  GaugedInput h2{MeasurementInput(s.grid, s.axis), fg2};
  h1.data.dirichlet = dirichlet_trace(fp1.gauged_total);
  h2.data.dirichlet = dirichlet_trace(fp2.gauged_total);
  const MeasurementRecord rec = linearize_second(s, h1, h2, SecondOrderMethod::direct, 1e-3,
                                                 1e-3, p.compat_tol);
  const ProbeTraceData w = probe_trace_data(bp0, false);
  const double pairing = boundary_pairing(PairingKind::beta_identity, rec, w).real();

  // site kernel from solves in the known background medium
  auto lin = [&](const BoundaryTimeTrace& tr, const GaugeShift& gs, TimeDirection dir) {
    return solve_linear(
        {qb, SpaceTimeField(s.grid, s.axis), tr, Field(s.grid), Field(s.grid), dir, gs});
  };
  const SpaceTimeField u1 = lin(h1.data.dirichlet, fg1, TimeDirection::forward);
  const SpaceTimeField u2 = lin(h2.data.dirichlet, fg2, TimeDirection::forward);
  const SpaceTimeField wsol = lin(w.trace, bg0, TimeDirection::backward_final_data);
  SpaceTimeField ones(s.grid, s.axis);
  for (cplx& v : ones.v) v = 1.0;
  const SpaceTimeField src = detail::mixed_source(u1, u2, ones, rho * rho, rho * rho);
  double kmass = 0.0;
  for (int iy = 0; iy < s.grid.n; ++iy)
    for (int ix = 0; ix < s.grid.n; ++ix) {
      double acc = 0.0;
      for (int k = 0; k <= s.axis.n_t; ++k)
        acc += quad_weight_t(s.axis, k) * (src.at(k, ix, iy) * wsol.at(k, ix, iy)).real();
      kmass += quad_weight(s.grid, ix, iy) * acc;
    }
  if (std::abs(kmass) < 1e-12)
    throw std::runtime_error("extract_point_beta: degenerate site kernel");

  if (diag != nullptr) {
    const TubeConstants tc = tube_constants(bump, p.quad_panels);
    diag->pairing = pairing;
    diag->kernel_mass = kmass;
    diag->asymptotic_mass = 4.0 * std::pow(rho, 4.0) * tc.phi3 * tc.blob;
  }
  return pairing / kmass;
}

/// Batch site recovery of the quadratic coefficient over the geometry's site
/// list and time centers. Returns an empty report when the geometry carries
/// no sites.
inline RecoveryReport recover_beta(const Scenario& s, const GeometrySet& geo, double rho,
                                   const RecoveryParams& p = {},
                                   const SpaceTimeField* q_background = nullptr) {
  RecoveryReport rep;
  rep.rho = rho;
  rep.centers = geo.centers;
  rep.sites = geo.sites;
  if (geo.sites.empty() || geo.centers.empty()) return rep;

  const size_t nc = geo.centers.size();
  const size_t ncu = p.time_independent ? 1 : nc;
  rep.site_values.assign(nc, std::vector<double>(geo.sites.size(), 0.0));
  for (size_t ci = 0; ci < ncu; ++ci) {
    for (size_t i = 0; i < geo.sites.size(); ++i) {
      const double v =
          extract_point_beta(s, geo.sites[i], geo.centers[ci], rho, p, q_background);
      if (p.time_independent)
        for (size_t c = 0; c < nc; ++c) rep.site_values[c][i] = v;
      else
        rep.site_values[ci][i] = v;
    }
  }
  return rep;
}

/// Error summary of a rho ladder: one error per report and center (slice
/// error in potential mode, median site error in quadratic mode) and the
/// fitted log-log slope per center. Requires ground truth to be attached.
struct LadderSummary {
  std::vector<double> rhos;
  std::vector<std::vector<double>> errors;
  std::vector<double> slopes;
};

inline LadderSummary summarize_ladder(const std::vector<RecoveryReport>& reports) {
  if (reports.size() < 2)
    throw std::invalid_argument("summarize_ladder: need at least two reports");
  LadderSummary out;
  const size_t nc = reports.front().centers.size();
  for (const RecoveryReport& r : reports) {
    if (!r.has_truth)
      throw std::runtime_error("summarize_ladder: report lacks ground-truth errors");
    if (r.centers.size() != nc)
      throw std::invalid_argument("summarize_ladder: center count mismatch");
    out.rhos.push_back(r.rho);
    std::vector<double> errs;
    if (!r.slice_errors.empty()) {
      errs = r.slice_errors;
    } else {
      for (const std::vector<double>& row : r.site_errors) {
        std::vector<double> sorted = row;
        std::sort(sorted.begin(), sorted.end());
        const size_t m = sorted.size();
        errs.push_back(m % 2 ? sorted[m / 2]
                             : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]));
      }
    }
    out.errors.push_back(std::move(errs));
  }
  for (size_t c = 0; c < nc; ++c) {
    std::vector<double> ys;
    for (const std::vector<double>& e : out.errors) ys.push_back(e.at(c));
    out.slopes.push_back(detail::fit_loglog_slope(out.rhos, ys));
  }
  return out;
}

}  // namespace wvlt
