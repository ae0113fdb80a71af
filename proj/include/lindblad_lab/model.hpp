#pragma once

// System + bath Hamiltonian assembly and interaction-picture transforms.
//
// Two-level basis convention: {|e>, |g>} with |e> = (1, 0)^T, so
// sigma_minus = |g><e| = [[0, 0], [1, 0]] and sigma_z = diag(1, -1).

#include "lindblad_lab/bathcorr.hpp"

namespace lindblad_lab {

namespace pauli {

inline Operator x() {
  Operator m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Operator y() {
  Operator m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}
inline Operator z() {
  Operator m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
inline Operator minus() {
  Operator m(2, 2);
  m << 0, 0, 1, 0;
  return m;
}
inline Operator plus() { return minus().adjoint(); }

inline StateVector excited() { return StateVector::Unit(2, 0); }
inline StateVector ground() { return StateVector::Unit(2, 1); }

}  // namespace pauli

struct SystemSpec {
  Operator h_s;         // energy units
  Operator s_op;        // coupling operator S
  double hbar = 1.0;
  double alpha = 1.0;   // coupling scale

  Eigen::Index dim() const { return h_s.rows(); }

  void validate() const {
    detail::require_square(h_s, "SystemSpec.h_s");
    detail::require_same_dim(h_s, s_op, "SystemSpec: h_s and s_op");
    detail::require(hbar > 0.0 && std::isfinite(hbar), "SystemSpec: hbar must be positive");
    detail::require(std::isfinite(alpha), "SystemSpec: alpha must be finite");
    detail::require(is_hermitian(h_s, 1e-12 * std::max(1.0, max_abs(h_s))),
                    "SystemSpec: h_s is not Hermitian");
  }

  double commutation_defect() const { return max_abs(commutator(s_op, h_s)); }

  // [S, H_S] = 0 is the hypothesis under which S is unchanged by the
  // interaction picture; required by the derivation-pipeline paths.
  void require_commuting(double tol = 1e-10) const {
    const double d = commutation_defect();
    detail::require(d <= tol, "[s_op, h_s] != 0 (max entry " + std::to_string(d) +
                                  "); the coefficient equation assumes S commutes with H_S");
  }
};

struct CompositeModel {
  SystemSpec sys;
  BathSpec bath;
  CompositeDims dims;
  Operator h_b;
  Operator h_sb;
  Operator h_total;
};

/// H_SB = hbar (S kron B^dag + S^dag kron B).
inline Operator build_interaction(const Operator& s_op, const Operator& b, double hbar = 1.0) {
  detail::require_square(s_op, "build_interaction: s_op");
  detail::require_square(b, "build_interaction: b_op");
  return hbar * (kron(s_op, b.adjoint()) + kron(s_op.adjoint(), b));
}

/// H = H_S kron 1_B + 1_S kron H_B + alpha H_SB.
inline CompositeModel build_total(const SystemSpec& sys, const Operator& h_b, const Operator& h_sb) {
  sys.validate();
  detail::require_square(h_b, "build_total: h_b");
  const CompositeDims dims{sys.dim(), h_b.rows()};
  detail::require(h_sb.rows() == dims.total() && h_sb.cols() == dims.total(),
                  "build_total: h_sb has dimension " + std::to_string(h_sb.rows()) + ", expected " +
                      std::to_string(dims.total()));
  detail::require(dims.total() <= kMaxDenseDim, "build_total: composite dimension exceeds dense cap");
  CompositeModel m;
  m.sys = sys;
  m.dims = dims;
  m.h_b = h_b;
  m.h_sb = h_sb;
  m.h_total = kron(sys.h_s, identity(dims.dim_b)) + kron(identity(dims.dim_s), h_b) + sys.alpha * h_sb;
  return m;
}

// Composite model for the coupling S B^dag + h.c. with B = sum_k conj(g_k) a_k.
inline CompositeModel build_composite(const SystemSpec& sys, const BathSpec& bath) {
  bath.validate();
  const Operator b = b_op(bath);
  CompositeModel m = build_total(sys, bath_hamiltonian(bath, sys.hbar), build_interaction(sys.s_op, b, sys.hbar));
  m.bath = bath;
  return m;
}

/// exp(+i H0 t / hbar) o exp(-i H0 t / hbar).
inline Operator to_interaction_picture(const Operator& o, const Operator& h0, double t, double hbar = 1.0) {
  detail::require_same_dim(o, h0, "to_interaction_picture");
  if (t == 0.0) return o;
  const Operator u = matrix_exp((kI * (t / hbar)) * h0);
  return u * o * u.adjoint();
}

/// exp(-i H0 t / hbar) o exp(+i H0 t / hbar).
inline Operator from_interaction_picture(const Operator& o, const Operator& h0, double t, double hbar = 1.0) {
  detail::require_same_dim(o, h0, "from_interaction_picture");
  if (t == 0.0) return o;
  const Operator u = matrix_exp((-kI * (t / hbar)) * h0);
  return u * o * u.adjoint();
}

/// max(|tr(B rho_B)|, |tr(B^dag rho_B)|): the first-order Born term vanishes
/// when this is zero.
inline double check_first_order_vanishes(const Operator& b, const Operator& rho_b) {
  detail::require_same_dim(b, rho_b, "check_first_order_vanishes");
  return std::max(std::abs((b * rho_b).trace()), std::abs((b.adjoint() * rho_b).trace()));
}

inline double check_first_order_vanishes(const Operator& b, const DensityMatrix& rho_b) {
  return check_first_order_vanishes(b, rho_b.op());
}

}  // namespace lindblad_lab
