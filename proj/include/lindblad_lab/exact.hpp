#pragma once

// Brute-force reference dynamics: unitary evolution of the full
// system + bath state followed by a partial trace.

#include "lindblad_lab/model.hpp"
#include "lindblad_lab/trajectory.hpp"

namespace lindblad_lab {

/// rho_S kron |vac><vac|.
inline Operator initial_composite(const DensityMatrix& rho_s, const BathSpec& bath) {
  return kron(rho_s.op(), projector(bath.space().vacuum()));
}

namespace detail {

// exp(-i H t / hbar) from a single Hermitian eigendecomposition of H, so
// every node is an exact conjugation rather than an accumulated product.
class SpectralPropagator {
 public:
  SpectralPropagator(const Operator& h, double hbar) : hbar_(hbar) {
    require(is_hermitian(h, 1e-10 * std::max(1.0, max_abs(h))), "propagator: Hamiltonian is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (h + h.adjoint()));
    vectors_ = es.eigenvectors();
    energies_ = es.eigenvalues();
  }

  Operator at(double t) const {
    const Eigen::VectorXcd phase = (-kI * (t / hbar_) * energies_.cast<complex>().array()).exp().matrix();
    return vectors_ * phase.asDiagonal() * vectors_.adjoint();
  }

 private:
  double hbar_;
  Operator vectors_;
  Eigen::VectorXd energies_;
};

}  // namespace detail

/// rho(t_i) = U(t_i) rho0 U(t_i)^dag with U(t) = exp(-i H t / hbar).
inline Trajectory evolve_exact(const CompositeModel& model, const Operator& rho0, const TimeGrid& grid) {
  const Eigen::Index dim = model.h_total.rows();
  detail::require(dim <= kMaxDenseDim, "evolve_exact: composite dimension " + std::to_string(dim) +
                                           " exceeds dense cap " + std::to_string(kMaxDenseDim));
  detail::require(rho0.rows() == dim && rho0.cols() == dim, "evolve_exact: rho0 dimension mismatch");
  const detail::SpectralPropagator prop(model.h_total, model.sys.hbar);
  Trajectory traj;
  for (double t : grid.times()) {
    const Operator u = prop.at(t);
    traj.push(t, u * rho0 * u.adjoint());
  }
  return traj;
}

inline Trajectory evolve_exact(const CompositeModel& model, const DensityMatrix& rho0, const TimeGrid& grid) {
  return evolve_exact(model, rho0.op(), grid);
}

inline Trajectory reduced_trajectory(const Trajectory& composite, CompositeDims dims) {
  Trajectory out;
  for (std::size_t i = 0; i < composite.size(); ++i)
    out.push(composite.times[i], partial_trace_b(composite.states[i], dims));
  return out;
}

struct SingleExcitationResult {
  std::vector<double> p_e;
  Trajectory rho_s;
  double max_norm_err = 0.0;  // max | ||c(t)|| - 1 |
};

/*
  Amplitude dynamics in the sector spanned by |e, vac> and |g, 1_k>.
  With S = sigma_minus and H_S = diag(E_e, E_g) the block Hamiltonian (in
  units of hbar) is

      H1[0,0] = E_e/hbar,  H1[k,k] = E_g/hbar + w_k,  H1[k,0] = alpha g_k,

  and the reduced state is diag(|c_0|^2, 1 - |c_0|^2). The phases of g_k
  can be absorbed into |g, 1_k>, so only |g_k| enters.
*/
inline SingleExcitationResult evolve_single_excitation(const SystemSpec& sys, const BathSpec& bath,
                                                        const TimeGrid& grid) {
  sys.validate();
  bath.validate();
  detail::require(sys.dim() == 2, "single_excitation: system must be a two-level system");
  detail::require(max_abs(sys.s_op - pauli::minus()) <= 1e-12,
                  "single_excitation: s_op must be sigma_minus = [[0,0],[1,0]]");
  detail::require(std::abs(sys.h_s(0, 1)) <= 1e-12 && std::abs(sys.h_s(1, 0)) <= 1e-12,
                  "single_excitation: h_s must be diagonal (commute with sigma_plus sigma_minus)");

  const auto m = static_cast<Eigen::Index>(bath.modes.size());
  Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero(m + 1, m + 1);
  const double e_e = sys.h_s(0, 0).real() / sys.hbar;
  const double e_g = sys.h_s(1, 1).real() / sys.hbar;
  h1(0, 0) = e_e;
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& mode = bath.modes[static_cast<std::size_t>(k)];
    h1(k + 1, k + 1) = e_g + mode.omega;
    h1(k + 1, 0) = h1(0, k + 1) = sys.alpha * std::abs(mode.g);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h1);
  const Eigen::MatrixXd& v = es.eigenvectors();
  const Eigen::VectorXd overlap = v.row(0).transpose();  // V^T c(0) with c(0) = e_0

  SingleExcitationResult r;
  for (double t : grid.times()) {
    const Eigen::VectorXcd phased =
        ((-kI * t * es.eigenvalues().cast<complex>().array()).exp() * overlap.cast<complex>().array()).matrix();
    // V is real: c = V Re(phased) + i V Im(phased).
    const Eigen::VectorXd c_re = v * phased.real();
    const Eigen::VectorXd c_im = v * phased.imag();
    const double pe = c_re(0) * c_re(0) + c_im(0) * c_im(0);
    r.max_norm_err = std::max(r.max_norm_err, std::abs(std::sqrt(c_re.squaredNorm() + c_im.squaredNorm()) - 1.0));
    r.p_e.push_back(pe);
    Operator rho = Operator::Zero(2, 2);
    rho(0, 0) = pe;
    rho(1, 1) = 1.0 - pe;
    r.rho_s.push(t, std::move(rho));
  }
  return r;
}

}  // namespace lindblad_lab
