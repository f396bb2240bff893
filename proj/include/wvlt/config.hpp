#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include <wvlt/measurement.hpp>
#include <wvlt/phantoms.hpp>
#include <wvlt/recovery.hpp>

namespace wvlt {

/// One run's complete parameter set. Every field has a default; the JSON
/// schema mirrors the nesting here and rejects unknown keys.
struct RunConfig {
  // grid
  int n = 65;
  int n_t = 48;
  double T = 1.0;
  // scenario
  std::string phantom = "bump_q";
  std::string measurement = "lateral";  // lateral | all_boundary
  std::string mode = "linear";          // linear | nonlinear
  SolverConfig solver;
  // rate ladder
  std::vector<double> rho_ladder = {4.0, 8.0, 16.0};
  // geometry
  int n_angles = 60;
  int n_offsets = 33;
  double offset_span = 0.7;
  std::vector<double> time_centers = {0.4, 0.5, 0.6};
  int site_per_side = 5;
  double site_lo = 0.3;
  double site_hi = 0.7;
  // recovery tuning
  RecoveryParams recovery;
  std::string q_source = "recovered";  // reference | true | recovered
  // probe line
  int probe_order = 0;
  double probe_angle = 0.0;
  double probe_offset = 0.05;
  // run plumbing
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& path,
                                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw std::invalid_argument("config: expected an object at " + path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) throw std::invalid_argument("config: unknown key " + path + it.key());
  }
}

template <class T>
T config_get(const nlohmann::json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("config: bad value at " + path + key);
  }
}

}  // namespace detail

/// Parses and validates a configuration document. Missing fields keep their
/// defaults; unknown keys and out-of-range values raise invalid_argument
/// naming the offending field path.
inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  detail::reject_unknown_keys(
      j, "", {"grid", "phantom", "measurement", "mode", "solver", "rho_ladder", "geometry",
              "recovery", "q_source", "probe", "out_dir", "seed", "jobs"});
  if (j.contains("grid")) {
    const nlohmann::json& g = j.at("grid");
    detail::reject_unknown_keys(g, "grid.", {"n", "n_t", "T"});
    c.n = detail::config_get(g, "n", c.n, "grid.");
    c.n_t = detail::config_get(g, "n_t", c.n_t, "grid.");
    c.T = detail::config_get(g, "T", c.T, "grid.");
  }
  c.phantom = detail::config_get(j, "phantom", c.phantom, "");
  c.measurement = detail::config_get(j, "measurement", c.measurement, "");
  c.mode = detail::config_get(j, "mode", c.mode, "");
  if (j.contains("solver")) {
    const nlohmann::json& s = j.at("solver");
    detail::reject_unknown_keys(s, "solver.",
                                {"theta", "picard_tol", "picard_max", "refactor_tol"});
    c.solver.theta = detail::config_get(s, "theta", c.solver.theta, "solver.");
    c.solver.picard_tol = detail::config_get(s, "picard_tol", c.solver.picard_tol, "solver.");
    c.solver.picard_max = detail::config_get(s, "picard_max", c.solver.picard_max, "solver.");
    c.solver.refactor_tol =
        detail::config_get(s, "refactor_tol", c.solver.refactor_tol, "solver.");
  }
  c.rho_ladder = detail::config_get(j, "rho_ladder", c.rho_ladder, "");
  if (j.contains("geometry")) {
    const nlohmann::json& g = j.at("geometry");
    detail::reject_unknown_keys(g, "geometry.",
                                {"n_angles", "n_offsets", "offset_span", "time_centers",
                                 "site_per_side", "site_lo", "site_hi"});
    c.n_angles = detail::config_get(g, "n_angles", c.n_angles, "geometry.");
    c.n_offsets = detail::config_get(g, "n_offsets", c.n_offsets, "geometry.");
    c.offset_span = detail::config_get(g, "offset_span", c.offset_span, "geometry.");
    c.time_centers = detail::config_get(g, "time_centers", c.time_centers, "geometry.");
    c.site_per_side = detail::config_get(g, "site_per_side", c.site_per_side, "geometry.");
    c.site_lo = detail::config_get(g, "site_lo", c.site_lo, "geometry.");
    c.site_hi = detail::config_get(g, "site_hi", c.site_hi, "geometry.");
  }
  if (j.contains("recovery")) {
    const nlohmann::json& r = j.at("recovery");
    detail::reject_unknown_keys(r, "recovery.",
                                {"eps", "eps_site", "t_width", "compat_tol", "tikhonov",
                                 "recon_n", "calibrated", "time_independent", "quad_panels"});
    RecoveryParams& p = c.recovery;
    p.eps = detail::config_get(r, "eps", p.eps, "recovery.");
    p.eps_site = detail::config_get(r, "eps_site", p.eps_site, "recovery.");
    p.t_width = detail::config_get(r, "t_width", p.t_width, "recovery.");
    p.compat_tol = detail::config_get(r, "compat_tol", p.compat_tol, "recovery.");
    p.tikhonov = detail::config_get(r, "tikhonov", p.tikhonov, "recovery.");
    p.recon_n = detail::config_get(r, "recon_n", p.recon_n, "recovery.");
    p.calibrated = detail::config_get(r, "calibrated", p.calibrated, "recovery.");
    p.time_independent =
        detail::config_get(r, "time_independent", p.time_independent, "recovery.");
    p.quad_panels = detail::config_get(r, "quad_panels", p.quad_panels, "recovery.");
  }
  c.q_source = detail::config_get(j, "q_source", c.q_source, "");
  if (j.contains("probe")) {
    const nlohmann::json& p = j.at("probe");
    detail::reject_unknown_keys(p, "probe.", {"order", "angle", "offset"});
    c.probe_order = detail::config_get(p, "order", c.probe_order, "probe.");
    c.probe_angle = detail::config_get(p, "angle", c.probe_angle, "probe.");
    c.probe_offset = detail::config_get(p, "offset", c.probe_offset, "probe.");
  }
  c.out_dir = detail::config_get(j, "out_dir", c.out_dir, "");
  c.seed = detail::config_get(j, "seed", c.seed, "");
  c.jobs = detail::config_get(j, "jobs", c.jobs, "");

  // value validation with field paths
  if (c.n < 5) throw std::invalid_argument("config: grid.n must be at least 5");
  if (c.n_t < 8) throw std::invalid_argument("config: grid.n_t must be at least 8");
  if (!(c.T > 0.0)) throw std::invalid_argument("config: grid.T must be positive");
  {
    const std::vector<std::string> names = phantom_names();
    if (std::find(names.begin(), names.end(), c.phantom) == names.end())
      throw std::invalid_argument("config: phantom: unknown name " + c.phantom);
  }
  if (c.measurement != "lateral" && c.measurement != "all_boundary")
    throw std::invalid_argument("config: measurement must be lateral or all_boundary");
  if (c.mode != "linear" && c.mode != "nonlinear")
    throw std::invalid_argument("config: mode must be linear or nonlinear");
  if (c.rho_ladder.empty()) throw std::invalid_argument("config: rho_ladder must be nonempty");
  for (double r : c.rho_ladder)
    if (!(r > 0.0)) throw std::invalid_argument("config: rho_ladder entries must be positive");
  if (c.n_angles < 1) throw std::invalid_argument("config: geometry.n_angles must be positive");
  if (c.n_offsets < 2) throw std::invalid_argument("config: geometry.n_offsets must be at least 2");
  if (!(c.offset_span > 0.0) || c.offset_span > std::sqrt(2.0) / 2.0)
    throw std::invalid_argument("config: geometry.offset_span must lie in (0, sqrt2/2]");
  if (c.time_centers.empty())
    throw std::invalid_argument("config: geometry.time_centers must be nonempty");
  for (double t : c.time_centers)
    if (!(t > 0.0 && t < c.T))
      throw std::invalid_argument("config: geometry.time_centers must lie in (0, T)");
  if (c.site_per_side < 1)
    throw std::invalid_argument("config: geometry.site_per_side must be positive");
  if (!(c.site_lo > 0.0 && c.site_hi < 1.0 && c.site_lo <= c.site_hi))
    throw std::invalid_argument("config: geometry.site_lo/site_hi must be interior and ordered");
  if (!(c.recovery.eps > 0.0) || c.recovery.eps > 0.25 || !(c.recovery.eps_site > 0.0) ||
      c.recovery.eps_site > 0.25)
    throw std::invalid_argument("config: recovery.eps and recovery.eps_site must lie in (0, 1/4]");
  if (c.recovery.t_width < 0.0)
    throw std::invalid_argument("config: recovery.t_width must be nonnegative");
  if (!(c.recovery.tikhonov >= 0.0))
    throw std::invalid_argument("config: recovery.tikhonov must be nonnegative");
  if (c.recovery.recon_n < 2)
    throw std::invalid_argument("config: recovery.recon_n must be at least 2");
  if (c.recovery.quad_panels < 2)
    throw std::invalid_argument("config: recovery.quad_panels must be at least 2");
  if (c.q_source != "reference" && c.q_source != "true" && c.q_source != "recovered")
    throw std::invalid_argument("config: q_source must be reference, true, or recovered");
  if (c.probe_order < 0) throw std::invalid_argument("config: probe.order must be nonnegative");
  if (c.jobs < 1) throw std::invalid_argument("config: jobs must be positive");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

/// Effective configuration as JSON, suitable for embedding in run manifests.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["grid"] = {{"n", c.n}, {"n_t", c.n_t}, {"T", c.T}};
  j["phantom"] = c.phantom;
  j["measurement"] = c.measurement;
  j["mode"] = c.mode;
  j["solver"] = {{"theta", c.solver.theta},
                 {"picard_tol", c.solver.picard_tol},
                 {"picard_max", c.solver.picard_max},
                 {"refactor_tol", c.solver.refactor_tol}};
  j["rho_ladder"] = c.rho_ladder;
  j["geometry"] = {{"n_angles", c.n_angles},     {"n_offsets", c.n_offsets},
                   {"offset_span", c.offset_span}, {"time_centers", c.time_centers},
                   {"site_per_side", c.site_per_side}, {"site_lo", c.site_lo},
                   {"site_hi", c.site_hi}};
  j["recovery"] = {{"eps", c.recovery.eps},
                   {"eps_site", c.recovery.eps_site},
                   {"t_width", c.recovery.t_width},
                   {"compat_tol", c.recovery.compat_tol},
                   {"tikhonov", c.recovery.tikhonov},
                   {"recon_n", c.recovery.recon_n},
                   {"calibrated", c.recovery.calibrated},
                   {"time_independent", c.recovery.time_independent},
                   {"quad_panels", c.recovery.quad_panels}};
  j["q_source"] = c.q_source;
  j["probe"] = {{"order", c.probe_order}, {"angle", c.probe_angle}, {"offset", c.probe_offset}};
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  return j;
}

/// Scenario assembly from a validated configuration.
inline Scenario make_scenario(const RunConfig& c) {
  const SpatialGrid g(c.n);
  const TimeAxis ta(c.n_t, c.T);
  const MeasurementKind kind = c.measurement == "all_boundary" ? MeasurementKind::all_boundary
                                                               : MeasurementKind::lateral_dtn;
  return Scenario(make_named_phantom(c.phantom, g, ta), c.solver, kind);
}

}  // namespace wvlt
