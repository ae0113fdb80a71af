#pragma once

// Lindblad generator, its superoperator form, and two propagators.

#include "lindblad_lab/model.hpp"
#include "lindblad_lab/trajectory.hpp"

#include <optional>

namespace lindblad_lab {

struct LindbladTerm {
  Operator op;
  double rate = 0.0;  // gamma_j >= 0
  // Optional frequency shift epsilon_j, entering as the Hamiltonian
  // hbar (epsilon_j / 2) L_j^dag L_j.
  double shift = 0.0;
};

struct LindbladModel {
  Operator h_s;
  std::vector<LindbladTerm> terms;
  double hbar = 1.0;

  Eigen::Index dim() const { return h_s.rows(); }

  void validate() const {
    detail::require_square(h_s, "LindbladModel.h_s");
    detail::require(hbar > 0.0, "LindbladModel: hbar must be positive");
    detail::require(is_hermitian(h_s, 1e-12 * std::max(1.0, max_abs(h_s))), "LindbladModel: h_s is not Hermitian");
    for (const auto& t : terms) {
      detail::require_same_dim(h_s, t.op, "LindbladModel: jump operator");
      detail::require(t.rate >= 0.0 && std::isfinite(t.rate), "LindbladModel: rates must be finite and >= 0");
      detail::require(std::isfinite(t.shift), "LindbladModel: shift must be finite");
    }
  }

  // H_S plus the shift Hamiltonians.
  Operator effective_hamiltonian() const {
    Operator h = h_s;
    for (const auto& t : terms)
      if (t.shift != 0.0) h += hbar * (0.5 * t.shift) * (t.op.adjoint() * t.op);
    return h;
  }
};

/// L rho L^dag - (L^dag L rho + rho L^dag L) / 2.
inline Operator dissipator(const Operator& l, const Operator& rho) {
  detail::require_same_dim(l, rho, "dissipator");
  const Operator ldl = l.adjoint() * l;
  return l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl);
}

/// Direct evaluation of d rho / dt.
inline Operator lindblad_rhs(const LindbladModel& model, const Operator& rho) {
  const Operator h = model.effective_hamiltonian();
  Operator out = (-kI / model.hbar) * (h * rho - rho * h);
  for (const auto& t : model.terms)
    if (t.rate != 0.0) out += t.rate * dissipator(t.op, rho);
  return out;
}

// d^2 x d^2 matrix acting on column-stacked vec(rho).
struct Superoperator {
  Eigen::Index dim = 0;  // system dimension d
  Operator matrix;

  Operator apply(const Operator& rho) const { return unvec(matrix * vec(rho), dim); }
};

/*
  Column stacking, vec(A rho B) = (B^T kron A) vec(rho):

    -(i/hbar) (1 kron H - H^T kron 1)
    + sum_j gamma_j [ conj(L_j) kron L_j - 1/2 (1 kron L_j^dag L_j)
                      - 1/2 ((L_j^dag L_j)^T kron 1) ]
*/
inline Superoperator generator_superop(const LindbladModel& model) {
  model.validate();
  const Eigen::Index d = model.dim();
  const Operator id = identity(d);
  const Operator h = model.effective_hamiltonian();
  Superoperator s;
  s.dim = d;
  s.matrix = (-kI / model.hbar) * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& t : model.terms) {
    if (t.rate == 0.0) continue;
    const Operator ldl = t.op.adjoint() * t.op;
    s.matrix += t.rate * (kron(t.op.conjugate(), t.op) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id));
  }
  return s;
}

enum class PropagationMethod { rk4, expm };

// Largest RK4 step allowed by default: 0.05 / max(|H_S|/hbar, sum_j gamma_j |L_j|^2).
inline double rk4_step_limit(const LindbladModel& model) {
  double rate = spectral_norm(model.effective_hamiltonian()) / model.hbar;
  double diss = 0.0;
  for (const auto& t : model.terms) {
    const double n = spectral_norm(t.op);
    diss += t.rate * n * n;
  }
  rate = std::max(rate, diss);
  return rate > 0.0 ? 0.05 / rate : std::numeric_limits<double>::infinity();
}

struct PropagateOptions {
  PropagationMethod method = PropagationMethod::rk4;
  // When set, RK4 uses this step instead of the mandated limit (it is still
  // shortened to divide each grid interval evenly).
  std::optional<double> dt_override;
  Tolerances tol;
};

struct PropagateResult {
  Trajectory trajectory;
  CptpReport report;
  double dt = 0.0;  // RK4 step actually used (0 for expm)

  bool failed() const { return report.failed(); }
};

namespace detail {

// Fixed-step classical RK4 for a linear right-hand side, stepping each grid
// interval with the largest even subdivision not exceeding dt_max.
template <class Rhs>
Trajectory rk4_on_grid(const Rhs& rhs, const Operator& rho0, const TimeGrid& grid, double dt_max, double& dt_used) {
  Trajectory traj;
  Operator rho = rho0;
  traj.push(0.0, rho);
  dt_used = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double t0 = grid[i - 1];
    const double span = grid[i] - t0;
    const auto n = static_cast<long>(std::ceil(span / dt_max - 1e-12));
    const double h = span / static_cast<double>(std::max(1L, n));
    dt_used = std::max(dt_used, h);
    for (long s = 0; s < std::max(1L, n); ++s) {
      const double t = t0 + h * static_cast<double>(s);
      const Operator k1 = rhs(t, rho);
      const Operator k2 = rhs(t + 0.5 * h, rho + (0.5 * h) * k1);
      const Operator k3 = rhs(t + 0.5 * h, rho + (0.5 * h) * k2);
      const Operator k4 = rhs(t + h, rho + h * k3);
      rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    traj.push(grid[i], rho);
  }
  return traj;
}

}  // namespace detail

/// Integrate d rho/dt = -(i/hbar)[H, rho] + sum_j gamma_j D[L_j](rho) on `grid`.
inline PropagateResult propagate(const LindbladModel& model, const Operator& rho0, const TimeGrid& grid,
                                 const PropagateOptions& opt = {}) {
  model.validate();
  detail::require(rho0.rows() == model.dim() && rho0.cols() == model.dim(), "propagate: rho0 dimension mismatch");
  PropagateResult r;
  if (opt.method == PropagationMethod::rk4) {
    detail::require(grid.is_uniform(), "propagate: rk4 requires a uniform grid");
    const double dt_max = opt.dt_override ? *opt.dt_override : rk4_step_limit(model);
    detail::require(dt_max > 0.0, "propagate: step must be positive");
    auto rhs = [&model](double, const Operator& rho) { return lindblad_rhs(model, rho); };
    r.trajectory = detail::rk4_on_grid(rhs, rho0, grid, dt_max, r.dt);
  } else {
    const Superoperator gen = generator_superop(model);
    const Eigen::VectorXcd v0 = vec(rho0);
    for (double t : grid.times()) {
      const Operator phi = t == 0.0 ? identity(gen.matrix.rows()) : matrix_exp(gen.matrix * t);
      r.trajectory.push(t, unvec(phi * v0, model.dim()));
    }
  }
  r.report = cptp_report(r.trajectory, opt.tol);
  return r;
}

inline PropagateResult propagate(const LindbladModel& model, const DensityMatrix& rho0, const TimeGrid& grid,
                                 const PropagateOptions& opt = {}) {
  return propagate(model, rho0.op(), grid, opt);
}

enum class TwoLevelChannel { dephasing, damping };

/*
  Closed-form two-level solutions with H_S = hbar (w0/2) sigma_z:
    dephasing (L = sigma_z): populations fixed, rho_eg -> rho_eg e^{-2 gamma t} e^{-i w0 t}
    damping  (L = sigma_-):  rho_ee -> rho_ee e^{-gamma t},
                             rho_eg -> rho_eg e^{-gamma t / 2} e^{-i w0 t}
*/
inline Operator analytic_two_level(TwoLevelChannel kind, double omega0, double gamma, const Operator& rho0, double t) {
  detail::require(rho0.rows() == 2 && rho0.cols() == 2, "analytic_two_level: rho0 must be 2x2");
  Operator rho = rho0;
  const complex rot = std::exp(-kI * (omega0 * t));
  if (kind == TwoLevelChannel::dephasing) {
    const double decay = std::exp(-2.0 * gamma * t);
    rho(0, 1) = rho0(0, 1) * decay * rot;
    rho(1, 0) = rho0(1, 0) * decay * std::conj(rot);
  } else {
    const double pop = std::exp(-gamma * t);
    const double coh = std::exp(-0.5 * gamma * t);
    rho(0, 0) = rho0(0, 0) * pop;
    rho(1, 1) = 1.0 - rho(0, 0);
    rho(0, 1) = rho0(0, 1) * coh * rot;
    rho(1, 0) = rho0(1, 0) * coh * std::conj(rot);
  }
  return rho;
}

inline Operator analytic_two_level(TwoLevelChannel kind, double omega0, double gamma, const DensityMatrix& rho0,
                                   double t) {
  return analytic_two_level(kind, omega0, gamma, rho0.op(), t);
}

}  // namespace lindblad_lab
