#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include <wvlt/recovery.hpp>

namespace {

using namespace wvlt;

SolverConfig default_cfg() { return SolverConfig{}; }

Scenario small_scenario(const std::string& name) {
  SpatialGrid g(33);
  TimeAxis ta(24, 1.0);
  return Scenario(make_named_phantom(name, g, ta), default_cfg(), MeasurementKind::lateral_dtn);
}

Scenario fine_scenario(const std::string& name) {
  SpatialGrid g(65);
  TimeAxis ta(48, 1.0);
  return Scenario(make_named_phantom(name, g, ta), default_cfg(), MeasurementKind::lateral_dtn);
}

TEST(Phantoms, RegistryListsKnownNamesAndRejectsOthers) {
  SpatialGrid g(17);
  TimeAxis ta(16, 1.0);
  for (const std::string& name : phantom_names()) {
    Phantom ph = make_named_phantom(name, g, ta);
    EXPECT_TRUE(ph.q.grid == g);
  }
  EXPECT_THROW(make_named_phantom("no_such_phantom", g, ta), std::invalid_argument);
}

TEST(Phantoms, SmoothRadialBumpShape) {
  EXPECT_DOUBLE_EQ(smooth_radial_bump(0.0, 0.35), 1.0);
  EXPECT_DOUBLE_EQ(smooth_radial_bump(0.35, 0.35), 0.0);
  EXPECT_DOUBLE_EQ(smooth_radial_bump(0.9, 0.35), 0.0);
  EXPECT_GT(smooth_radial_bump(0.1, 0.35), smooth_radial_bump(0.2, 0.35));
  // C1 at the edge: one-sided slope vanishes as the edge is approached
  const double d = 1e-4;
  EXPECT_LT(smooth_radial_bump(0.35 - d, 0.35) / d, 1e-2);
  EXPECT_THROW(smooth_radial_bump(0.1, 0.0), std::invalid_argument);
}

TEST(Phantoms, StaticAndSeparableTimeDependence) {
  SpatialGrid g(17);
  TimeAxis ta(16, 1.0);
  Phantom stat = make_named_phantom("bump_q", g, ta);
  Phantom sep = make_named_phantom("separable", g, ta);
  for (int k = 0; k <= ta.n_t; ++k) {
    const double prof = std::pow(std::sin(M_PI * ta.t(k) / ta.T), 2.0);
    for (int p = 0; p < g.num_nodes(); ++p) {
      EXPECT_EQ(stat.q.v[static_cast<size_t>(k) * g.num_nodes() + p], stat.q.v[p]);
      EXPECT_NEAR(sep.q.v[static_cast<size_t>(k) * g.num_nodes() + p].real(),
                  prof * stat.q.v[p].real(), 1e-12);
    }
  }
  EXPECT_EQ(stat.beta.at(10, 8, 8), cplx(0.0));
  Phantom bb = make_named_phantom("bump_beta", g, ta);
  EXPECT_EQ(bb.q.at(10, 8, 8), cplx(0.0));
  EXPECT_EQ(bb.beta.at(0, 8, 8), stat.q.at(0, 8, 8));
}

TEST(Phantoms, EllipsePhantomPinnedValues) {
  SpatialGrid g(65);
  TimeAxis ta(8, 1.0);
  Phantom sp = make_named_phantom("shepp", g, ta);
  EXPECT_NEAR(sp.q.at(0, 32, 33).real(), 0.91815775, 1e-7);
  EXPECT_NEAR(sp.q.at(0, 27, 35).real(), 0.33150889, 1e-7);
  EXPECT_NEAR(sp.q.at(0, 38, 27).real(), 1.03991439, 1e-7);
  EXPECT_DOUBLE_EQ(sp.q.at(0, 4, 4).real(), 0.0);
}

TEST(Recovery, TubeConstantsConvergeUnderPanelRefinement) {
  const BumpSpec b(0.25, 0.5, 0.125);
  const TubeConstants c1 = tube_constants(b, 500);
  const TubeConstants c2 = tube_constants(b, 2000);
  EXPECT_NEAR(c1.phi2, c2.phi2, 1e-8);
  EXPECT_NEAR(c1.phi3, c2.phi3, 1e-8);
  EXPECT_NEAR(c1.chi2, c2.chi2, 1e-8);
  EXPECT_NEAR(c1.blob, c2.blob, 1e-6);
  // the transversal mass at width 0.25 doubles the time mass at width 0.125
  EXPECT_NEAR(c2.chi2, 2.0 * c2.phi2, 1e-10);
  EXPECT_NEAR(c2.chi2, 0.35142631, 1e-7);
  EXPECT_NEAR(c2.blob, 0.12687904, 1e-6);
}

TEST(Recovery, WeightedLineIntegralAveragesFullChords) {
  SpatialGrid g(65);
  Field one(g);
  for (cplx& v : one.v) v = 1.0;
  // central horizontal tube: every parallel chord has unit length
  EXPECT_NEAR(weighted_line_integral(one, LineSpec{0.0, 0.0}, BumpSpec(0.2, 0.5, 0.125)), 1.0,
              1e-9);
}

TEST(Recovery, TubeAveragingBiasIsQuadraticInWidth) {
  SpatialGrid g(65);
  const LineSpec line{0.0, 0.0};
  const Vec2 a0 = LineSpec{0.0, 0.0}.anchor();
  const Vec2 a1 = LineSpec{0.0, 1.0}.anchor();
  const Vec2 n1{a1.x - a0.x, a1.y - a0.y};  // unit normal of the family
  Field f(g);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      const Vec2 x{g.x(ix), g.y(iy)};
      const double tau = (x.x - 0.5) * n1.x + (x.y - 0.5) * n1.y;
      f.at(ix, iy) = tau * tau;
    }
  const double b1 = weighted_line_integral(f, line, BumpSpec(0.2, 0.5, 0.125));
  const double b2 = weighted_line_integral(f, line, BumpSpec(0.1, 0.5, 0.125));
  // exact transversal second moment of the profile
  const BumpSpec w1(0.2, 0.5, 0.125);
  const double num = wvlt::detail::simpson(-0.2, 0.2, 2000, [&](double t) {
    const double c = w1.chi(t);
    return c * c * t * t;
  });
  const double den = wvlt::detail::simpson(-0.2, 0.2, 2000, [&](double t) {
    const double c = w1.chi(t);
    return c * c;
  });
  EXPECT_NEAR(b1, num / den, 0.02 * num / den);  // grid interpolation limits agreement
  EXPECT_NEAR(b1 / b2, 4.0, 0.1);  // quadratic field: bias scales as width^2
}

TEST(Recovery, ParallelGeometryIsValidAndUniform) {
  GeometrySet geo = make_parallel_geometry(12, 9, 0.6, {0.5});
  ASSERT_EQ(geo.angles.size(), 12u);
  ASSERT_EQ(geo.offsets.size(), 9u);
  EXPECT_DOUBLE_EQ(geo.angles.front(), 0.0);
  EXPECT_LT(geo.angles.back(), M_PI);
  for (size_t i = 1; i < geo.angles.size(); ++i) EXPECT_GT(geo.angles[i], geo.angles[i - 1]);
  EXPECT_DOUBLE_EQ(geo.offsets.front(), -0.6);
  EXPECT_DOUBLE_EQ(geo.offsets.back(), 0.6);
  EXPECT_THROW(make_parallel_geometry(0, 9, 0.6, {0.5}), std::invalid_argument);
  EXPECT_THROW(make_parallel_geometry(12, 9, 0.8, {0.5}), std::invalid_argument);
}

TEST(Recovery, BetaSiteDerivesAnchorsAndDualDirection) {
  BetaSite s = make_beta_site({0.4, 0.6}, {1.0, 0.0}, {0.0, 1.0});
  EXPECT_NEAR(s.varpi.x, -std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(s.varpi.y, -std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(s.y1.x, 0.0, 1e-12);
  EXPECT_NEAR(s.y1.y, 0.6, 1e-12);
  EXPECT_NEAR(s.y2.x, 0.4, 1e-12);
  EXPECT_NEAR(s.y2.y, 0.0, 1e-12);
  EXPECT_NEAR(s.y0.x, 0.8, 1e-12);
  EXPECT_NEAR(s.y0.y, 1.0, 1e-12);
  EXPECT_NO_THROW(check_beta_site(s, 1.0 / 32.0));
  EXPECT_THROW(make_beta_site({0.4, 0.6}, {2.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(make_beta_site({0.4, 0.6}, {1.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(make_beta_site({0.0, 0.6}, {1.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
}

TEST(Recovery, PerturbedSiteFailsConcurrencyCheck) {
  BetaSite s = make_beta_site({0.4, 0.6}, {1.0, 0.0}, {0.0, 1.0});
  const double h = 1.0 / 32.0;
  BetaSite bad = s;
  bad.y1.y += 2.0 * h;  // first ray now misses x0
  EXPECT_THROW(check_beta_site(bad, h), std::invalid_argument);
  bad = s;
  bad.y0.x -= 2.0 * h;  // dual ray misses x0
  EXPECT_THROW(check_beta_site(bad, h), std::invalid_argument);
}

TEST(Recovery, SiteLatticeStaysInterior) {
  GeometrySet geo = make_site_lattice(5, 0.3, 0.7, {0.5});
  ASSERT_EQ(geo.sites.size(), 25u);
  for (const BetaSite& s : geo.sites) {
    EXPECT_GE(std::min({s.x0.x, 1.0 - s.x0.x, s.x0.y, 1.0 - s.x0.y}), 0.3 - 1e-12);
    EXPECT_NO_THROW(check_beta_site(s, 1.0 / 64.0));
  }
  EXPECT_THROW(make_site_lattice(3, 0.0, 0.7, {0.5}), std::invalid_argument);
}

TEST(Recovery, NullPotentialExtractsExactlyZero) {
  Scenario s = small_scenario("zero");
  EXPECT_EQ(extract_line_integral_q(s, LineSpec{0.0, 0.0}, 0.5, 6.0), 0.0);
  EXPECT_EQ(extract_line_integral_q(s, LineSpec{1.1, 0.2}, 0.5, 6.0), 0.0);
}

TEST(Recovery, LineEstimateTracksWeightedIntegralAcrossRates) {
  Scenario s = fine_scenario("bump_q");
  RecoveryParams p;
  const LineSpec line{0.0, 0.05};
  const Field q0 = s.phantom.q.slice_field(0);
  const double truth = weighted_line_integral(q0, line, BumpSpec(p.eps, 0.5, s.axis.T / 8.0));
  std::vector<double> rhos{4.0, 8.0, 16.0}, errs;
  for (double rho : rhos) {
    const double est = extract_line_integral_q(s, line, 0.5, rho, p);
    EXPECT_GT(est, 0.0);
    EXPECT_LT(est, truth);  // damping attenuates the probe response
    errs.push_back(std::abs(est - truth) / truth);
  }
  // errors shrink monotonically with the modulation rate at these settings
  EXPECT_LT(errs[1], errs[0]);
  EXPECT_LT(errs[2], errs[1]);
  EXPECT_NEAR(errs[0], 0.8856, 0.02);
  EXPECT_NEAR(errs[2], 0.5791, 0.02);
  const double slope = wvlt::detail::fit_loglog_slope(rhos, errs);
  EXPECT_NEAR(slope, -0.31, 0.1);  // measured decay of the rate ladder
}

TEST(Recovery, LineEstimateIsTimeShiftInvariantForStaticMedium) {
  Scenario s = fine_scenario("bump_q");
  const LineSpec line{0.0, 0.05};
  const double e1 = extract_line_integral_q(s, line, 0.4, 8.0);
  const double e2 = extract_line_integral_q(s, line, 0.6, 8.0);
  EXPECT_NEAR(e1, e2, 1e-6 * std::abs(e1));
}

TEST(Recovery, CalibratedRecoveryOnSmallGeometry) {
  Scenario s = small_scenario("bump_q");
  RecoveryParams p;
  p.recon_n = 17;
  GeometrySet geo = make_parallel_geometry(12, 9, 0.6, {0.45, 0.5});
  RecoveryReport rep = recover_q(s, geo, 6.0, p);
  ASSERT_EQ(rep.slices.size(), 2u);
  EXPECT_EQ(rep.slices[0].v, rep.slices[1].v);  // static medium: slices reused verbatim

  SpatialGrid recon(p.recon_n);
  Field truth(recon);
  const int stride = (s.grid.n - 1) / (recon.n - 1);
  for (int iy = 0; iy < recon.n; ++iy)
    for (int ix = 0; ix < recon.n; ++ix)
      truth.at(ix, iy) = s.phantom.q.at(0, ix * stride, iy * stride);
  rep.attach_q_truth({truth, truth});
  ASSERT_TRUE(rep.has_truth);
  EXPECT_LT(rep.slice_errors[0], 0.2);  // measured 0.114 at this tiny geometry
  EXPECT_DOUBLE_EQ(rep.slice_errors[0], rep.slice_errors[1]);
}

TEST(Recovery, EmptyGeometryGivesEmptyReport) {
  Scenario s = small_scenario("bump_q");
  GeometrySet geo;
  geo.centers = {0.5};
  RecoveryReport rep = recover_q(s, geo, 6.0);
  EXPECT_TRUE(rep.slices.empty());
  RecoveryReport rb = recover_beta(s, geo, 6.0);
  EXPECT_TRUE(rb.site_values.empty());
}

TEST(Recovery, ReconstructionGridMustDivideSolverGrid) {
  Scenario s = small_scenario("bump_q");
  RecoveryParams p;
  p.recon_n = 20;
  EXPECT_THROW(recover_q(s, make_parallel_geometry(4, 5, 0.5, {0.5}), 6.0, p),
               std::invalid_argument);
}

TEST(Recovery, TruthAttachmentValidatesShapes) {
  Scenario s = small_scenario("zero");
  RecoveryParams p;
  p.recon_n = 17;
  RecoveryReport rep = recover_q(s, make_parallel_geometry(6, 5, 0.5, {0.5}), 6.0, p);
  ASSERT_EQ(rep.slices.size(), 1u);
  EXPECT_THROW(rep.attach_q_truth({}), std::invalid_argument);
  EXPECT_THROW(rep.attach_q_truth({Field(SpatialGrid(9)), Field(SpatialGrid(9))}),
               std::invalid_argument);
  // zero truth: the error falls back to the absolute norm of the estimate
  rep.attach_q_truth({Field(SpatialGrid(17))});
  EXPECT_EQ(rep.slice_errors[0], 0.0);  // null data recovers the zero field exactly
}

TEST(Recovery, NullQuadraticCoefficientExtractsExactlyZero) {
  Scenario s = small_scenario("zero");
  BetaSite site = make_beta_site({0.3, 0.4}, {1.0, 0.0}, {0.0, 1.0});
  EXPECT_EQ(extract_point_beta(s, site, 0.5, 4.0), 0.0);
}

TEST(Recovery, SiteEstimateIsLinearInTheCoefficient) {
  Scenario s1 = small_scenario("bump_beta");
  Phantom doubled = s1.phantom;
  for (cplx& v : doubled.beta.v) v *= 2.0;
  Scenario s2(doubled, default_cfg(), MeasurementKind::lateral_dtn);
  BetaSite site = make_beta_site({0.3, 0.4}, {1.0, 0.0}, {0.0, 1.0});
  const double b1 = extract_point_beta(s1, site, 0.5, 4.0);
  const double b2 = extract_point_beta(s2, site, 0.5, 4.0);
  ASSERT_NE(b1, 0.0);
  EXPECT_NEAR(b2 / b1, 2.0, 1e-10);
}

TEST(Recovery, SiteEstimateAccuracyImprovesWithRate) {
  Scenario s = fine_scenario("bump_beta");
  BetaSite site = make_beta_site({0.3, 0.4}, {1.0, 0.0}, {0.0, 1.0});
  const double truth = smooth_radial_bump(std::hypot(0.3 - 0.5, 0.4 - 0.5), 0.35);
  const double b4 = extract_point_beta(s, site, 0.5, 4.0);
  const double b8 = extract_point_beta(s, site, 0.5, 8.0);
  const double e4 = std::abs(b4 - truth) / truth;
  const double e8 = std::abs(b8 - truth) / truth;
  EXPECT_LT(e8, e4);
  EXPECT_LT(e8, 0.05);  // measured 0.017
  EXPECT_LT(e4, 0.15);  // measured 0.099
}

TEST(Recovery, SiteEstimateAcceptsRecoveredBackground) {
  SpatialGrid g(65);
  TimeAxis ta(48, 1.0);
  Phantom both = make_named_phantom("bump_beta", g, ta);
  both.q = make_named_phantom("bump_q", g, ta).q;
  Scenario s(both, default_cfg(), MeasurementKind::lateral_dtn);
  BetaSite site = make_beta_site({0.3, 0.4}, {1.0, 0.0}, {0.0, 1.0});
  const double truth = smooth_radial_bump(std::hypot(0.3 - 0.5, 0.4 - 0.5), 0.35);
  const double b_ref = extract_point_beta(s, site, 0.5, 8.0);
  const double b_bg = extract_point_beta(s, site, 0.5, 8.0, {}, &both.q);
  EXPECT_NEAR(b_ref, truth, 0.05 * truth);
  EXPECT_NEAR(b_bg, truth, 0.05 * truth);
  EXPECT_NEAR(b_bg, b_ref, 0.01 * std::abs(b_ref));

  SpaceTimeField wrong(SpatialGrid(33), ta);
  EXPECT_THROW(extract_point_beta(s, site, 0.5, 8.0, {}, &wrong), std::invalid_argument);
}

TEST(Recovery, SiteClearanceIsEnforced) {
  Scenario s = small_scenario("bump_beta");
  RecoveryParams p;
  p.eps_site = 0.4;
  BetaSite site = make_beta_site({0.3, 0.4}, {1.0, 0.0}, {0.0, 1.0});
  EXPECT_THROW(extract_point_beta(s, site, 0.5, 4.0, p), std::invalid_argument);
}

TEST(Recovery, BatchSiteRecoveryReusesStaticCenters) {
  Scenario s = small_scenario("bump_beta");
  GeometrySet geo;
  geo.centers = {0.45, 0.5};
  geo.sites = {make_beta_site({0.5, 0.5}, {1.0, 0.0}, {0.0, 1.0}),
               make_beta_site({0.3, 0.4}, {1.0, 0.0}, {0.0, 1.0})};
  RecoveryReport rep = recover_beta(s, geo, 4.0);
  ASSERT_EQ(rep.site_values.size(), 2u);
  ASSERT_EQ(rep.site_values[0].size(), 2u);
  EXPECT_EQ(rep.site_values[0], rep.site_values[1]);
  rep.attach_beta_truth({{1.0, 0.5}, {1.0, 0.5}});
  ASSERT_EQ(rep.site_errors.size(), 2u);
  for (double e : rep.site_errors[0]) EXPECT_GE(e, 0.0);
}

TEST(Recovery, LadderSummaryUsesSliceOrMedianSiteErrors) {
  RecoveryReport a, b;
  a.rho = 4.0;
  b.rho = 8.0;
  a.centers = b.centers = {0.5};
  a.has_truth = b.has_truth = true;
  a.site_errors = {{0.4, 0.1, 0.3}};  // median 0.3
  b.site_errors = {{0.2, 0.05, 0.1}};  // median 0.1
  LadderSummary ls = summarize_ladder({a, b});
  EXPECT_DOUBLE_EQ(ls.errors[0][0], 0.3);
  EXPECT_DOUBLE_EQ(ls.errors[1][0], 0.1);
  EXPECT_NEAR(ls.slopes[0], std::log(0.1 / 0.3) / std::log(2.0), 1e-12);

  RecoveryReport c = a;
  c.has_truth = false;
  EXPECT_THROW(summarize_ladder({a, c}), std::runtime_error);
  EXPECT_THROW(summarize_ladder({a}), std::invalid_argument);
}

}  // namespace
