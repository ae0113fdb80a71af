#pragma once

// Dense complex operator algebra on finite Hilbert spaces.
//
// Operators are plain Eigen::MatrixXcd values. Everything here is a pure
// function of its arguments; nothing caches or mutates shared state.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace lindblad_lab {

using complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

inline constexpr complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Largest composite dimension accepted by the dense code paths.
inline constexpr Eigen::Index kMaxDenseDim = 4096;

// Raised for inputs that violate a documented precondition (shape, range,
// finiteness). Callers can distinguish it from numerical failures.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Tolerances {
  double herm = 1e-9;
  double trace = 1e-9;
  double psd = 1e-7;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

inline void require_square(const Operator& a, const char* what) {
  require(a.rows() == a.cols() && a.rows() >= 1,
          std::string(what) + ": operator must be square with dim >= 1");
}

inline void require_same_dim(const Operator& a, const Operator& b, const char* what) {
  require_square(a, what);
  require_square(b, what);
  require(a.rows() == b.rows(), std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.rows()) + " vs " +
                                    std::to_string(b.rows()) + ")");
}

}  // namespace detail

// Largest absolute entry.
inline double max_abs(const Operator& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermiticity_error(const Operator& a) { return max_abs(a - a.adjoint()); }

inline bool is_hermitian(const Operator& a, double tol) { return hermiticity_error(a) <= tol; }

inline Operator identity(Eigen::Index dim) { return Operator::Identity(dim, dim); }

inline Operator zeros(Eigen::Index dim) { return Operator::Zero(dim, dim); }

inline Operator projector(const StateVector& psi) { return psi * psi.adjoint(); }

// Spectral (largest singular value) norm.
inline double spectral_norm(const Operator& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Operator> svd(a);
  return svd.singularValues()(0);
}

/// Kronecker product; entry (i*b.dim+k, j*b.dim+l) equals a(i,j)*b(k,l).
inline Operator kron(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

struct CompositeDims {
  Eigen::Index dim_s = 1;
  Eigen::Index dim_b = 1;

  Eigen::Index total() const { return dim_s * dim_b; }
};

/// Trace over the second (bath) factor of a system-major composite operator.
inline Operator partial_trace_b(const Operator& rho, CompositeDims dims) {
  detail::require(dims.dim_s >= 1 && dims.dim_b >= 1, "partial_trace_b: dims must be positive");
  detail::require(rho.rows() == dims.total() && rho.cols() == dims.total(),
                  "partial_trace_b: operator dimension " + std::to_string(rho.rows()) +
                      " does not match dim_s*dim_b = " + std::to_string(dims.total()));
  Operator out = Operator::Zero(dims.dim_s, dims.dim_s);
  for (Eigen::Index i = 0; i < dims.dim_s; ++i)
    for (Eigen::Index j = 0; j < dims.dim_s; ++j)
      out(i, j) = rho.block(i * dims.dim_b, j * dims.dim_b, dims.dim_b, dims.dim_b).trace();
  return out;
}

inline Operator commutator(const Operator& a, const Operator& b) {
  detail::require_same_dim(a, b, "commutator");
  return a * b - b * a;
}

inline Operator anticommutator(const Operator& a, const Operator& b) {
  detail::require_same_dim(a, b, "anticommutator");
  return a * b + b * a;
}

/// Real eigenvalues (ascending) of the Hermitian part of `a`.
inline Eigen::VectorXd eigenvalues_hermitian(const Operator& a) {
  detail::require_square(a, "eigenvalues_hermitian");
  Operator h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double eig_min_hermitian(const Operator& a) { return eigenvalues_hermitian(a)(0); }

/// Matrix exponential.
///
/// Hermitian and skew-Hermitian arguments (every physical propagator
/// -iHt/hbar) go through a Hermitian eigendecomposition, which keeps
/// exp(-iHt) unitary to rounding. Anything else falls back to Pade
/// scaling-and-squaring.
inline Operator matrix_exp(const Operator& a, double structure_tol = 1e-13) {
  detail::require_square(a, "matrix_exp");
  detail::require(a.allFinite(), "matrix_exp: non-finite entries");
  const double scale = std::max(1.0, max_abs(a));
  if (max_abs(a - a.adjoint()) <= structure_tol * scale) {
    Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (a + a.adjoint()));
    const Eigen::VectorXcd phases = es.eigenvalues().array().exp().cast<complex>();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  }
  if (max_abs(a + a.adjoint()) <= structure_tol * scale) {
    // a = i*h with h Hermitian
    const Operator h = -kI * 0.5 * (a - a.adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> es(h);
    const Eigen::VectorXcd phases =
        (kI * es.eigenvalues().cast<complex>().array()).exp().matrix();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  }
  return a.exp();
}

/// Half the sum of singular values of a - b.
inline double trace_distance(const Operator& a, const Operator& b) {
  detail::require_same_dim(a, b, "trace_distance");
  Eigen::JacobiSVD<Operator> svd(a - b);
  return 0.5 * svd.singularValues().sum();
}

// A validated density operator. Construction checks hermiticity, unit trace
// and positivity against the carried tolerances and throws InvalidInput on
// violation; the stored operator is never modified.
class DensityMatrix {
 public:
  explicit DensityMatrix(Operator op, Tolerances tol = {}) : op_(std::move(op)), tol_(tol) {
    detail::require_square(op_, "DensityMatrix");
    detail::require(op_.allFinite(), "DensityMatrix: non-finite entries");
    const double herm = hermiticity_error(op_);
    detail::require(herm <= tol_.herm,
                    "DensityMatrix: not Hermitian (|rho - rho^dag|_max = " + std::to_string(herm) + ")");
    const double tr_err = std::abs(op_.trace() - 1.0);
    detail::require(tr_err <= tol_.trace,
                    "DensityMatrix: trace differs from 1 by " + std::to_string(tr_err));
    const double emin = eig_min_hermitian(op_);
    detail::require(emin >= -tol_.psd,
                    "DensityMatrix: negative eigenvalue " + std::to_string(emin));
  }

  const Operator& op() const { return op_; }
  Eigen::Index dim() const { return op_.rows(); }
  const Tolerances& tolerances() const { return tol_; }

  static DensityMatrix pure(const StateVector& psi, Tolerances tol = {}) {
    const double n = psi.norm();
    detail::require(n > 0, "DensityMatrix::pure: zero vector");
    return DensityMatrix(projector(psi / n), tol);
  }

  static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index index, Tolerances tol = {}) {
    detail::require(index >= 0 && index < dim, "DensityMatrix::basis_state: index out of range");
    StateVector v = StateVector::Zero(dim);
    v(index) = 1.0;
    return pure(v, tol);
  }

 private:
  Operator op_;
  Tolerances tol_;
};

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.op(), b.op());
}

// Column-stacking vectorisation: vec(A rho B) = (B^T kron A) vec(rho).
inline Eigen::VectorXcd vec(const Operator& a) {
  return Eigen::Map<const Eigen::VectorXcd>(a.data(), a.size());
}

inline Operator unvec(const Eigen::VectorXcd& v, Eigen::Index dim) {
  detail::require(v.size() == dim * dim, "unvec: size is not dim^2");
  return Eigen::Map<const Operator>(v.data(), dim, dim);
}

}  // namespace lindblad_lab
