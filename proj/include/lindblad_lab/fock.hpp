#pragma once

// Truncated multimode Fock space. Mode 1 is the most significant tensor
// factor, so basis index = sum_k n_k (n_max+1)^(m-k).

#include "lindblad_lab/linops.hpp"

#include <cmath>
#include <utility>

namespace lindblad_lab {

struct FockSpace {
  int modes = 0;
  int n_max = 1;

  FockSpace() = default;
  FockSpace(int m, int nmax) : modes(m), n_max(nmax) {
    detail::require(m >= 0, "FockSpace: negative mode count");
    detail::require(nmax >= 1, "FockSpace: n_max must be >= 1");
    double d = std::pow(static_cast<double>(nmax + 1), m);
    detail::require(d <= static_cast<double>(kMaxDenseDim),
                    "FockSpace: bath dimension exceeds dense cap");
  }

  Eigen::Index dim() const {
    Eigen::Index d = 1;
    for (int k = 0; k < modes; ++k) d *= (n_max + 1);
    return d;
  }

  StateVector vacuum() const {
    StateVector v = StateVector::Zero(dim());
    v(0) = 1.0;
    return v;
  }
};

// Single-mode truncated ladder operator: a|n> = sqrt(n)|n-1>.
inline Operator single_mode_annihilation(int n_max) {
  Operator a = Operator::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// (a_k, a_k^dag) on the full truncated bath space, 1-based k.
inline std::pair<Operator, Operator> build_bath_ops(const FockSpace& space, int k) {
  detail::require(k >= 1 && k <= space.modes,
                  "build_bath_ops: mode index " + std::to_string(k) + " out of range [1, " +
                      std::to_string(space.modes) + "]");
  const Eigen::Index left = static_cast<Eigen::Index>(std::pow(space.n_max + 1, k - 1));
  const Eigen::Index right = static_cast<Eigen::Index>(std::pow(space.n_max + 1, space.modes - k));
  Operator a = kron(kron(identity(left), single_mode_annihilation(space.n_max)), identity(right));
  Operator ad = a.adjoint();
  return {std::move(a), std::move(ad)};
}

// Occupation of mode k (1-based) in basis state `index`.
inline int occupation(const FockSpace& space, Eigen::Index index, int k) {
  Eigen::Index stride = 1;
  for (int j = space.modes; j > k; --j) stride *= (space.n_max + 1);
  return static_cast<int>((index / stride) % (space.n_max + 1));
}

}  // namespace lindblad_lab
