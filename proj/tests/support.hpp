#pragma once

// Random generators and brute-force reference computations shared by the
// unit and acceptance suites. Nothing here calls into the library's own
// algebra beyond the Operator type, so these act as independent checks.

#include "lindblad_lab/linops.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <random>

namespace lab_test {

using lindblad_lab::complex;
using lindblad_lab::Operator;

inline constexpr double kPi = 3.14159265358979323846;

inline Operator random_operator(std::mt19937& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Operator a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = complex(n(rng), n(rng));
  return a;
}

inline Operator random_hermitian(std::mt19937& rng, Eigen::Index d, double scale = 1.0) {
  const Operator a = random_operator(rng, d, scale);
  return 0.5 * (a + a.adjoint());
}

// Full-rank density matrix A A^dag / tr.
inline Operator random_density(std::mt19937& rng, Eigen::Index d) {
  const Operator a = random_operator(rng, d);
  Operator r = a * a.adjoint();
  return r / r.trace();
}

inline Operator random_pure(std::mt19937& rng, Eigen::Index d) {
  std::normal_distribution<double> n;
  Eigen::VectorXcd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = complex(n(rng), n(rng));
  v.normalize();
  return v * v.adjoint();
}

// Haar-ish unitary from the QR factor of a Gaussian matrix.
inline Operator random_unitary(std::mt19937& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Operator> qr(random_operator(rng, d));
  return qr.householderQ() * Operator::Identity(d, d);
}

inline double uniform(std::mt19937& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// ---------------------------------------------------------------------------
// loop-level references

inline Operator kron_loops(const Operator& a, const Operator& b) {
  const auto p = a.rows(), q = b.rows();
  Operator out = Operator::Zero(p * q, p * q);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index k = 0; k < q; ++k)
        for (Eigen::Index l = 0; l < q; ++l) out(i * q + k, j * q + l) = a(i, j) * b(k, l);
  return out;
}

inline Operator ptrace_loops(const Operator& rho, Eigen::Index ds, Eigen::Index db) {
  Operator out = Operator::Zero(ds, ds);
  for (Eigen::Index i = 0; i < ds; ++i)
    for (Eigen::Index j = 0; j < ds; ++j)
      for (Eigen::Index k = 0; k < db; ++k) out(i, j) += rho(i * db + k, j * db + k);
  return out;
}

// Taylor series with scaling and squaring; slow but independent of any
// eigensolver or Pade code.
inline Operator expm_taylor(const Operator& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double s = 1.0;
  while (norm / s > 0.25) {
    s *= 2.0;
    ++squarings;
  }
  const Operator x = a / s;
  Operator term = Operator::Identity(a.rows(), a.cols());
  Operator sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// Trace norm via the Hermitian eigenvalues of a - b (both Hermitian).
inline double trace_distance_eig(const Operator& a, const Operator& b) {
  const Operator d = a - b;
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Principal value of int f(w)/w dw over (-inf, inf), by subtracting the pole:
//   PV int f/w = int_{-A}^{A} (f(w) - f(0))/w dw + int_{|w|>A} f/w dw.
// The subtracted integrand is regular, so no exclusion ladder is involved.
template <class F>
double pv_over_omega_subtracted(F f, double a, const std::vector<double>& inner_breaks = {}) {
  using boost::math::quadrature::gauss_kronrod;
  const double f0 = f(0.0);
  auto reg = [&](double w) { return std::abs(w) < 1e-300 ? 0.0 : (f(w) - f0) / w; };
  auto raw = [&](double w) { return f(w) / w; };
  std::vector<double> cuts{-a};
  for (double b : inner_breaks)
    if (b > -a && b < a) cuts.push_back(b);
  cuts.push_back(a);
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    s += gauss_kronrod<double, 31>::integrate(reg, cuts[i], cuts[i + 1], 20, 1e-14);
  s += gauss_kronrod<double, 31>::integrate(raw, a, std::numeric_limits<double>::infinity(), 20, 1e-14);
  s += gauss_kronrod<double, 31>::integrate(raw, -std::numeric_limits<double>::infinity(), -a, 20, 1e-14);
  return s;
}

}  // namespace lab_test
