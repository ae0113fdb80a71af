#pragma once

// The time-local coefficient equation that sits between the Born-Markov
// master equation and the Lindblad limit:
//
//   d rho/dt = -[S S^dag rho - S^dag rho S] G*(t) - [rho S^dag S - S rho S^dag] F*(t)
//              -[S^dag S rho - S rho S^dag] F(t)  - [rho S S^dag - S^dag rho S] G(t)
//
// integrated in the interaction picture of H_S, which leaves S unchanged
// when [S, H_S] = 0.

#include "lindblad_lab/lindblad.hpp"

#include <functional>

namespace lindblad_lab {

inline Operator rhs_coeff_eq(const Operator& rho, const Operator& s, complex f, complex g) {
  detail::require_same_dim(rho, s, "rhs_coeff_eq");
  const Operator sd = s.adjoint();
  const Operator ssd = s * sd;
  const Operator sds = sd * s;
  const Operator s_rho_sd = s * rho * sd;
  const Operator sd_rho_s = sd * rho * s;
  return -(ssd * rho - sd_rho_s) * std::conj(g) - (rho * sds - s_rho_sd) * std::conj(f) -
         (sds * rho - s_rho_sd) * f - (rho * ssd - sd_rho_s) * g;
}

// Where F(t) and G(t) come from.
struct CoefficientSource {
  std::function<complex(double)> f;
  std::function<complex(double)> g;
  double f_bound = 0.0;  // bound on |F| + |G| over the run, used for the step mandate

  // Finite-t closed forms for a discrete vacuum bath.
  static CoefficientSource discrete(const BathSpec& bath, double t_max) {
    CoefficientSource c;
    c.f = [bath](double t) { return f_discrete(bath, t); };
    c.g = [bath](double t) { return g_discrete(bath, t); };
    c.f_bound = bath.coupling_weight() * t_max;
    return c;
  }

  // Markov limit: F = (gamma + i epsilon)/2, G = 0.
  static CoefficientSource markov(double gamma, double epsilon = 0.0) {
    CoefficientSource c;
    const complex f0(0.5 * gamma, 0.5 * epsilon);
    c.f = [f0](double) { return f0; };
    c.g = [](double) { return complex{}; };
    c.f_bound = std::abs(f0);
    return c;
  }
};

struct CoeffEqOptions {
  std::optional<double> dt_override;
  Tolerances tol;
  double max_step_change = 0.1;     // reject if ||d rho||_max per step exceeds this
  double negativity_floor = -1e-4;  // eig_min below this marks the run failed
};

struct CoeffEqResult {
  Trajectory trajectory;          // Schroedinger picture
  Trajectory interaction;         // interaction picture
  CptpReport report;
  double dt = 0.0;
  bool negativity_flagged = false;  // some node had eig_min < -tol.psd
  std::optional<std::size_t> failed_node;
};

// Step mandate: dt (|H_S|/hbar + sum |g_k|^2 t_max) <= 0.05.
inline double coeff_eq_step_limit(const SystemSpec& sys, const CoefficientSource& src) {
  const double s_norm = spectral_norm(sys.s_op);
  const double rate = spectral_norm(sys.h_s) / sys.hbar + sys.alpha * sys.alpha * src.f_bound * s_norm * s_norm;
  return rate > 0.0 ? 0.05 / rate : std::numeric_limits<double>::infinity();
}

/// RK4 integration of the coefficient equation on a uniform grid.
inline CoeffEqResult integrate_coeff_eq(const SystemSpec& sys, const CoefficientSource& src, const Operator& rho0,
                                        const TimeGrid& grid, const CoeffEqOptions& opt = {}) {
  sys.validate();
  sys.require_commuting();
  detail::require(grid.is_uniform(), "integrate_coeff_eq: uniform grid required");
  detail::require(rho0.rows() == sys.dim() && rho0.cols() == sys.dim(), "integrate_coeff_eq: rho0 dimension mismatch");

  const double a2 = sys.alpha * sys.alpha;
  // RK4 evaluates each stage time twice in a row; F can be a long mode sum.
  double cached_t = std::numeric_limits<double>::quiet_NaN();
  complex cached_f, cached_g;
  auto rhs = [&](double t, const Operator& rho) -> Operator {
    if (t != cached_t) {
      cached_t = t;
      cached_f = src.f(t);
      cached_g = src.g(t);
    }
    return a2 * rhs_coeff_eq(rho, sys.s_op, cached_f, cached_g);
  };
  const double dt_max = opt.dt_override ? *opt.dt_override : coeff_eq_step_limit(sys, src);
  detail::require(dt_max > 0.0, "integrate_coeff_eq: step must be positive");

  CoeffEqResult r;
  // Step-size guard: a single RK4 step from rho0 with the largest |F| must
  // not move the state by more than max_step_change.
  {
    double probe_dt = dt_max;
    if (!std::isfinite(probe_dt)) probe_dt = grid.t_max();
    probe_dt = std::min(probe_dt, grid.size() > 1 ? grid[1] - grid[0] : probe_dt);
    const double change = probe_dt * max_abs(rhs(grid.t_max(), rho0));
    detail::require(change <= opt.max_step_change,
                    "integrate_coeff_eq: step too large (|d rho| per step = " + std::to_string(change) +
                        " > " + std::to_string(opt.max_step_change) + "); reduce dt");
  }

  r.interaction = detail::rk4_on_grid(rhs, rho0, grid, dt_max, r.dt);
  for (std::size_t i = 0; i < r.interaction.size(); ++i) {
    const double t = r.interaction.times[i];
    r.trajectory.push(t, from_interaction_picture(r.interaction.states[i], sys.h_s, t, sys.hbar));
  }
  r.report = cptp_report(r.trajectory, opt.tol);
  for (std::size_t i = 0; i < r.report.nodes.size(); ++i) {
    const auto& d = r.report.nodes[i];
    if (d.eig_min < -opt.tol.psd) r.negativity_flagged = true;
    const bool fail = d.trace_err > 10.0 * opt.tol.trace || d.herm_err > 10.0 * opt.tol.herm ||
                      d.eig_min < opt.negativity_floor;
    if (fail && !r.failed_node) r.failed_node = i;
  }
  return r;
}

inline CoeffEqResult integrate_coeff_eq(const SystemSpec& sys, const BathSpec& bath, const DensityMatrix& rho0,
                                        const TimeGrid& grid, const CoeffEqOptions& opt = {}) {
  return integrate_coeff_eq(sys, CoefficientSource::discrete(bath, grid.t_max()), rho0.op(), grid, opt);
}

}  // namespace lindblad_lab
