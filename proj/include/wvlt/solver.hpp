#pragma once

// Implicit three-level theta scheme for the strongly damped operator
//   d_t^2 u - Lap u - d_t Lap u + q u = f
// on the unit square with Dirichlet data, optionally conjugated by a linear
// gauge e^{i phi} (the solver then steps P(D + zeta0) + q, whose fields stay
// O(1) for large rho). The backward problem with final data is solved by the
// exact time reflection t -> T - t, which maps the transposed operator onto
// the forward one. Picard iteration handles the quadratic Westervelt
// nonlinearity; the compatibility recursion supplies startup derivatives.

#include <wvlt/grid.hpp>
#include <wvlt/ops.hpp>
#include <wvlt/symbol.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <optional>

namespace wvlt {

struct SolverConfig {
  double theta = 0.25;        // weight of the implicit Laplacian average
  double picard_tol = 1e-10;  // relative update threshold per time step
  int picard_max = 25;
  double refactor_tol = 1e-12;  // coefficient drift triggering refactorization
};

enum class TimeDirection { forward, backward_final_data };

/// Linear problem: q, forcing, Dirichlet trace, and two data fields which are
/// initial data (forward) or final data (backward). With gauge set the
/// operator is assembled from the shifted symbol, all cross-terms included.
struct LinearProblemSpec {
  SpaceTimeField q;
  SpaceTimeField forcing;
  BoundaryTimeTrace dirichlet;
  Field g0;
  Field g1;
  TimeDirection direction = TimeDirection::forward;
  std::optional<GaugeShift> gauge;
};

struct NonlinearProblemSpec {
  LinearProblemSpec lin;
  SpaceTimeField beta;
};

struct StepReport {
  int step = 0;
  int picard_iters = 0;
  double residual = 0.0;  // last relative update (0 for linear steps)
};

struct SolveReport {
  std::vector<StepReport> steps;
  long factorizations = 0;
};

/// g_0..g_m of the compatibility recursion plus, per level, the max-abs
/// mismatch between g_l on the boundary and the one-sided discrete d_t^l h(0).
struct CompatibilitySequence {
  std::vector<Field> g;
  std::vector<double> boundary_mismatch;
};

namespace detail {

/// Constant-coefficient 5-point operator; n/s step +y/-y.
struct Penta {
  double c = 0, e = 0, w = 0, n = 0, s = 0;
};

/// B = rho^2 I - Lap + 2 rho (om.grad); the operator multiplying d_t in the
/// shifted frame. rho = 0 reduces to -Lap, the physical damping operator.
inline Penta damping_coeffs(const SpatialGrid& g, double rho, Vec2 om) {
  const double ih2 = 1.0 / (g.h * g.h), rh = rho / g.h;
  Penta p;
  p.c = 4.0 * ih2 + rho * rho;
  p.e = -ih2 + rh * om.x;
  p.w = -ih2 - rh * om.x;
  p.n = -ih2 + rh * om.y;
  p.s = -ih2 - rh * om.y;
  return p;
}

/// A = (1+rho^2)(-Lap + 2 rho (om.grad)) - rho^2 I; the zeroth-order-in-d_t
/// part of the shifted operator. rho = 0 reduces to -Lap.
inline Penta stiffness_coeffs(const SpatialGrid& g, double rho, Vec2 om) {
  const double ih2 = 1.0 / (g.h * g.h), rh = rho / g.h;
  const double f = 1.0 + rho * rho;
  Penta p;
  p.c = f * 4.0 * ih2 - rho * rho;
  p.e = f * (-ih2 + rh * om.x);
  p.w = f * (-ih2 - rh * om.x);
  p.n = f * (-ih2 + rh * om.y);
  p.s = f * (-ih2 - rh * om.y);
  return p;
}

inline cplx apply_penta_at(const SpatialGrid& g, const Penta& p, const cplx* u, int ix, int iy) {
  const int i = g.idx(ix, iy);
  return p.c * u[i] + p.e * u[i + 1] + p.w * u[i - 1] + p.n * u[i + g.n] + p.s * u[i - g.n];
}

using SpMat = Eigen::SparseMatrix<cplx>;
using SpVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

/// Coarse von Neumann screen for theta < 1/4: amplification of the extreme
/// 5-point modes of the physical operator must stay within a mild growth
/// allowance. theta >= 1/4 is unconditionally stable and skips the check.
inline void check_stability(const SpatialGrid& g, const TimeAxis& ta, double theta) {
  if (theta >= 0.25) return;
  const double dt = ta.dt;
  for (double lambda : {8.0 / (g.h * g.h), 4.0 / (g.h * g.h), 1.0}) {
    const double al = 1.0 / (dt * dt) + lambda / (2.0 * dt) + theta * lambda;
    const double be = -2.0 / (dt * dt) + (1.0 - 2.0 * theta) * lambda;
    const double ga = 1.0 / (dt * dt) - lambda / (2.0 * dt) + theta * lambda;
    const cplx disc = std::sqrt(cplx(be * be - 4.0 * al * ga, 0.0));
    const double gmax = std::max(std::abs((-be + disc) / (2.0 * al)),
                                 std::abs((-be - disc) / (2.0 * al)));
    if (gmax > 1.0 + 16.0 * dt)
      throw std::invalid_argument(
          "solver: theta < 1/4 fails the von Neumann screen at this dt; "
          "amplification " +
          std::to_string(gmax));
  }
}

/// Owns the step matrix and its factorization. The matrix is
///   diag(a)/dt^2 + B/(2 dt) + theta A
/// on interior rows and identity on Dirichlet rows; a is the frozen
/// second-derivative coefficient (identically 1 for linear problems).
struct Stepper {
  const SpatialGrid& g;
  double dt, theta;
  Penta B, A;
  SpMat M;
  Eigen::SparseLU<SpMat> lu;
  std::vector<cplx> a_frozen;
  long factorizations = 0;

  Stepper(const SpatialGrid& g_, double dt_, double theta_, double rho, Vec2 om)
      : g(g_), dt(dt_), theta(theta_), B(damping_coeffs(g_, rho, om)),
        A(stiffness_coeffs(g_, rho, om)), M(g_.num_nodes(), g_.num_nodes()),
        a_frozen(g_.num_nodes(), cplx(1.0)) {}

  void factorize(const std::vector<cplx>& a, int step_index) {
    const double idt2 = 1.0 / (dt * dt), i2dt = 1.0 / (2.0 * dt);
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<size_t>(5) * g.num_nodes());
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        const int i = g.idx(ix, iy);
        if (g.on_boundary(ix, iy)) {
          trip.emplace_back(i, i, cplx(1.0));
          continue;
        }
        trip.emplace_back(i, i, a[i] * idt2 + B.c * i2dt + theta * A.c);
        trip.emplace_back(i, i + 1, cplx(B.e * i2dt + theta * A.e));
        trip.emplace_back(i, i - 1, cplx(B.w * i2dt + theta * A.w));
        trip.emplace_back(i, i + g.n, cplx(B.n * i2dt + theta * A.n));
        trip.emplace_back(i, i - g.n, cplx(B.s * i2dt + theta * A.s));
      }
    M.setFromTriplets(trip.begin(), trip.end());
    lu.compute(M);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("solver: singular step matrix at step " +
                               std::to_string(step_index));
    a_frozen = a;
    ++factorizations;
  }

  /// Advance one level: fills u_next from levels u_n, u_m (= n-1) given the
  /// slice data. source is the frozen Picard source (null for linear).
  void step(const cplx* u_n, const cplx* u_m, const cplx* q_n, const cplx* f_n,
            const cplx* source, const BoundaryTimeTrace& h, int k_next, const cplx* a,
            cplx* u_next) const {
    const double idt2 = 1.0 / (dt * dt), i2dt = 1.0 / (2.0 * dt);
    const double th1 = 1.0 - 2.0 * theta;
    SpVec rhs(g.num_nodes());
    rhs.setZero();
    for (int iy = 1; iy < g.n - 1; ++iy)
      for (int ix = 1; ix < g.n - 1; ++ix) {
        const int i = g.idx(ix, iy);
        const cplx Bum = apply_penta_at(g, B, u_m, ix, iy);
        const cplx Aun = apply_penta_at(g, A, u_n, ix, iy);
        const cplx Aum = apply_penta_at(g, A, u_m, ix, iy);
        cplx r = f_n[i] + a[i] * (2.0 * u_n[i] - u_m[i]) * idt2 + Bum * i2dt - th1 * Aun -
                 theta * Aum - q_n[i] * u_n[i];
        if (source) r += source[i];
        rhs[i] = r;
      }
    for (size_t b = 0; b < h.num_bnodes(); ++b) rhs[h.nodes[b]] = h.at(k_next, b);
    const SpVec sol = lu.solve(rhs);
    std::copy(sol.data(), sol.data() + g.num_nodes(), u_next);
  }
};

inline void require_same_shape(const LinearProblemSpec& p) {
  const SpatialGrid& g = p.q.grid;
  const TimeAxis& ta = p.q.time;
  if (!(p.forcing.grid == g) || !(p.dirichlet.grid == g) || !(p.g0.grid == g) ||
      !(p.g1.grid == g))
    throw std::invalid_argument("solver: mismatched spatial grids in problem spec");
  if (!(p.forcing.time == ta) || !(p.dirichlet.time == ta))
    throw std::invalid_argument("solver: mismatched time axes in problem spec");
}

inline void require_data_compatibility(const LinearProblemSpec& p) {
  const int k0 = (p.direction == TimeDirection::forward) ? 0 : p.q.time.n_t;
  double worst = 0.0;
  for (size_t b = 0; b < p.dirichlet.num_bnodes(); ++b)
    worst = std::max(worst, std::abs(p.dirichlet.at(k0, b) - p.g0.v[p.dirichlet.nodes[b]]));
  if (worst > 1e-10)
    throw std::invalid_argument(
        "solver: Dirichlet trace disagrees with the data field on the boundary (" +
        std::to_string(worst) + ")");
}

inline void validate_config(const SolverConfig& cfg) {
  if (cfg.theta < 0.0 || cfg.theta > 0.5)
    throw std::invalid_argument("solver: theta outside [0, 1/2]");
  if (!(cfg.picard_tol > 0.0)) throw std::invalid_argument("solver: picard_tol must be positive");
  if (cfg.picard_max < 1) throw std::invalid_argument("solver: picard_max must be at least 1");
}

/// Shared startup: interior second time-derivative at t=0 from the stepped
/// equation, so U^1 = g0 + dt g1 + dt^2/2 g2 is third-order accurate.
/// For nonlinear problems the Westervelt coefficient and source enter.
inline Field startup_g2(const SpatialGrid& g, const Stepper& st, const Field& g0, const Field& g1,
                        const cplx* q0, const cplx* f0, const cplx* beta0) {
  Field g2(g);
  for (int iy = 1; iy < g.n - 1; ++iy)
    for (int ix = 1; ix < g.n - 1; ++ix) {
      const int i = g.idx(ix, iy);
      cplx num = f0[i] - apply_penta_at(g, st.B, g1.v.data(), ix, iy) -
                 apply_penta_at(g, st.A, g0.v.data(), ix, iy) - q0[i] * g0.v[i];
      if (beta0) {
        num += 2.0 * beta0[i] * g1.v[i] * g1.v[i];
        num /= 1.0 - 2.0 * beta0[i] * g0.v[i];
      }
      g2.v[i] = num;
    }
  return g2;
}

/// Forward-in-time engine shared by the linear and nonlinear entry points.
/// beta == nullptr selects the linear path with a frozen coefficient of 1.
inline SpaceTimeField march(const SpaceTimeField& q, const SpaceTimeField& f,
                            const BoundaryTimeTrace& h, const Field& g0, const Field& g1,
                            double rho, Vec2 om, const SpaceTimeField* beta,
                            const SolverConfig& cfg, SolveReport* report) {
  const SpatialGrid& g = q.grid;
  const TimeAxis& ta = q.time;
  check_stability(g, ta, cfg.theta);
  Stepper st(g, ta.dt, cfg.theta, rho, om);
  SpaceTimeField u(g, ta);

  // level 0: data field with the Dirichlet trace stamped on
  std::copy(g0.v.begin(), g0.v.end(), u.slice(0));
  for (size_t b = 0; b < h.num_bnodes(); ++b) u.v[h.nodes[b]] = h.at(0, b);

  // level 1: Taylor with the compatibility second derivative
  {
    const Field g2 = startup_g2(g, st, g0, g1, q.slice(0), f.slice(0),
                                beta ? beta->slice(0) : nullptr);
    cplx* u1 = u.slice(1);
    for (int iy = 1; iy < g.n - 1; ++iy)
      for (int ix = 1; ix < g.n - 1; ++ix) {
        const int i = g.idx(ix, iy);
        u1[i] = g0.v[i] + ta.dt * g1.v[i] + 0.5 * ta.dt * ta.dt * g2.v[i];
      }
    for (size_t b = 0; b < h.num_bnodes(); ++b) u1[h.nodes[b]] = h.at(1, b);
  }

  std::vector<cplx> a(g.num_nodes(), cplx(1.0));
  std::vector<cplx> source;
  std::vector<cplx> iterate, prev_iterate;
  bool factored = false;

  for (int n = 1; n < ta.n_t; ++n) {
    const cplx* u_n = u.slice(n);
    const cplx* u_m = u.slice(n - 1);
    cplx* u_next = u.slice(n + 1);
    StepReport sr;
    sr.step = n + 1;

    if (!beta) {
      if (!factored) {
        st.factorize(a, n + 1);
        factored = true;
      }
      st.step(u_n, u_m, q.slice(n), f.slice(n), nullptr, h, n + 1, a.data(), u_next);
      sr.picard_iters = 1;
    } else {
      // freeze the Westervelt coefficient at the known center level
      const cplx* bet = beta->slice(n);
      double drift = 0.0;
      for (int i = 0; i < g.num_nodes(); ++i) {
        const cplx ai = 1.0 - 2.0 * bet[i] * u_n[i];
        if (std::abs(ai) < 0.5)
          throw std::runtime_error("solver: Westervelt coefficient degenerate at step " +
                                   std::to_string(n + 1) + " (data too large)");
        drift = std::max(drift, std::abs(ai - st.a_frozen[i]));
        a[i] = ai;
      }
      if (!factored || drift > cfg.refactor_tol) {
        st.factorize(a, n + 1);
        factored = true;
      }

      source.assign(g.num_nodes(), cplx(0.0));
      iterate.assign(g.num_nodes(), cplx(0.0));
      // linear extrapolation as initial guess for the implicit level
      for (int i = 0; i < g.num_nodes(); ++i) iterate[i] = 2.0 * u_n[i] - u_m[i];
      const double i2dt = 1.0 / (2.0 * ta.dt);
      double update = 0.0;
      int k = 0;
      for (; k < cfg.picard_max; ++k) {
        for (int iy = 1; iy < g.n - 1; ++iy)
          for (int ix = 1; ix < g.n - 1; ++ix) {
            const int i = g.idx(ix, iy);
            const cplx ut = (iterate[i] - u_m[i]) * i2dt;
            source[i] = 2.0 * bet[i] * ut * ut;
          }
        prev_iterate = iterate;
        st.step(u_n, u_m, q.slice(n), f.slice(n), source.data(), h, n + 1, a.data(),
                iterate.data());
        double dn = 0.0, nn = 0.0;
        for (int i = 0; i < g.num_nodes(); ++i) {
          dn += std::norm(iterate[i] - prev_iterate[i]);
          nn += std::norm(iterate[i]);
        }
        update = std::sqrt(dn) / std::max(std::sqrt(nn), 1e-300);
        if (update < cfg.picard_tol) {
          ++k;
          break;
        }
      }
      if (update >= cfg.picard_tol)
        throw std::runtime_error("solver: Picard stalled at step " + std::to_string(n + 1) +
                                 " with relative update " + std::to_string(update) +
                                 " (data too large)");
      std::copy(iterate.begin(), iterate.end(), u_next);
      sr.picard_iters = k;
      sr.residual = update;
    }
    if (report) report->steps.push_back(sr);
  }
  if (report) report->factorizations = st.factorizations;
  return u;
}

inline SpaceTimeField reflect_time(const SpaceTimeField& u) {
  SpaceTimeField out(u.grid, u.time);
  for (int k = 0; k <= u.time.n_t; ++k) {
    const cplx* src = u.slice(u.time.n_t - k);
    std::copy(src, src + u.grid.num_nodes(), out.slice(k));
  }
  return out;
}

inline BoundaryTimeTrace reflect_time(const BoundaryTimeTrace& tr) {
  BoundaryTimeTrace out(tr.grid, tr.time);
  for (int k = 0; k <= tr.time.n_t; ++k)
    for (size_t b = 0; b < tr.num_bnodes(); ++b) out.at(k, b) = tr.at(tr.time.n_t - k, b);
  return out;
}

}  // namespace detail

/// Solve the linear problem. Backward problems are reflected in time, solved
/// forward (the reflected transpose equals the forward operator with the
/// gauge direction unchanged), and reflected back — an exact involution.
inline SpaceTimeField solve_linear(const LinearProblemSpec& p, const SolverConfig& cfg = {},
                                   SolveReport* report = nullptr) {
  detail::validate_config(cfg);
  detail::require_same_shape(p);
  detail::require_data_compatibility(p);
  double rho = 0.0;
  Vec2 om{0.0, 0.0};
  if (p.gauge) {
    const Sense want =
        (p.direction == TimeDirection::forward) ? Sense::forward : Sense::backward;
    if (p.gauge->sense != want)
      throw std::invalid_argument("solve_linear: gauge sense does not match time direction");
    rho = p.gauge->rho;
    om = p.gauge->direction;
  }
  if (p.direction == TimeDirection::forward)
    return detail::march(p.q, p.forcing, p.dirichlet, p.g0, p.g1, rho, om, nullptr, cfg, report);

  // backward: reflect data, solve forward, reflect the solution
  const SpaceTimeField qr = detail::reflect_time(p.q);
  const SpaceTimeField fr = detail::reflect_time(p.forcing);
  const BoundaryTimeTrace hr = detail::reflect_time(p.dirichlet);
  Field g1r = p.g1;
  for (cplx& z : g1r.v) z = -z;
  const SpaceTimeField w = detail::march(qr, fr, hr, p.g0, g1r, rho, om, nullptr, cfg, report);
  return detail::reflect_time(w);
}

/// Picard solver for the Westervelt problem
///   (1 - 2 beta u) d_t^2 u - Lap u - d_t Lap u + q u - 2 beta (d_t u)^2 = f.
/// Physical frame and forward direction only; with beta == 0 the iteration
/// reproduces solve_linear exactly.
inline SpaceTimeField solve_nonlinear(const NonlinearProblemSpec& p, const SolverConfig& cfg = {},
                                      SolveReport* report = nullptr) {
  detail::validate_config(cfg);
  detail::require_same_shape(p.lin);
  detail::require_data_compatibility(p.lin);
  if (p.lin.direction != TimeDirection::forward)
    throw std::invalid_argument("solve_nonlinear: only forward problems are supported");
  if (p.lin.gauge)
    throw std::invalid_argument("solve_nonlinear: gauge frames are linear-only");
  if (!(p.beta.grid == p.lin.q.grid) || !(p.beta.time == p.lin.q.time))
    throw std::invalid_argument("solve_nonlinear: beta shape mismatch");
  return detail::march(p.lin.q, p.lin.forcing, p.lin.dirichlet, p.lin.g0, p.lin.g1, 0.0,
                       Vec2{0.0, 0.0}, &p.beta, cfg, report);
}

/// Compatibility recursion: g_{l+1} = (1-2 beta(0) g_0)^{-1} G_l with
///   G_1 = Lap g_0 + Lap g_1 - q(0) g_0 + 2 beta(0) g_1^2.
/// (The quadratic term enters with +: expanding -beta d_t^2(u^2) and moving
/// the coefficient form to the right-hand side flips its printed sign.)
/// Boundary values use the one-sided-completed Laplacian so the per-level
/// mismatch against d_t^l h(0) can be reported.
inline CompatibilitySequence compatibility_sequence(const Field& g0, const Field& g1,
                                                    const BoundaryTimeTrace& h,
                                                    const SpaceTimeField& q,
                                                    const SpaceTimeField& beta, int m) {
  if (m < 0 || m > 2)
    throw std::invalid_argument("compatibility_sequence: depth m must be 0, 1 or 2");
  const SpatialGrid& g = g0.grid;
  if (!(g1.grid == g) || !(h.grid == g) || !(q.grid == g) || !(beta.grid == g))
    throw std::invalid_argument("compatibility_sequence: mismatched grids");
  const double dt = h.time.dt;

  CompatibilitySequence out;
  auto mismatch = [&](const Field& gl, auto dt_h) {
    double worst = 0.0;
    for (size_t b = 0; b < h.num_bnodes(); ++b)
      worst = std::max(worst, std::abs(gl.v[h.nodes[b]] - dt_h(b)));
    return worst;
  };

  out.g.push_back(g0);
  out.boundary_mismatch.push_back(mismatch(g0, [&](size_t b) { return h.at(0, b); }));
  if (m >= 1) {
    out.g.push_back(g1);
    out.boundary_mismatch.push_back(mismatch(g1, [&](size_t b) {
      return (-3.0 * h.at(0, b) + 4.0 * h.at(1, b) - h.at(2, b)) / (2.0 * dt);
    }));
  }
  if (m >= 2) {
    const Field lap0 = laplacian_field(g0, true);
    const Field lap1 = laplacian_field(g1, true);
    const cplx* q0 = q.slice(0);
    const cplx* b0 = beta.slice(0);
    Field g2(g);
    for (int i = 0; i < g.num_nodes(); ++i) {
      const cplx a0 = 1.0 - 2.0 * b0[i] * g0.v[i];
      if (std::abs(a0) < 0.5)
        throw std::runtime_error(
            "compatibility_sequence: coefficient 1-2 beta(0) g0 degenerate");
      g2.v[i] = (lap0.v[i] + lap1.v[i] - q0[i] * g0.v[i] + 2.0 * b0[i] * g1.v[i] * g1.v[i]) / a0;
    }
    out.g.push_back(std::move(g2));
    out.boundary_mismatch.push_back(mismatch(out.g[2], [&](size_t b) {
      return (2.0 * h.at(0, b) - 5.0 * h.at(1, b) + 4.0 * h.at(2, b) - h.at(3, b)) / (dt * dt);
    }));
  }
  return out;
}

}  // namespace wvlt
