#pragma once

#include "lindblad_lab/linops.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace lindblad_lab::quad {

/// Composite Simpson rule on [a, b] with `steps` intervals (rounded up to even).
template <class F>
auto simpson(F&& f, double a, double b, int steps) -> decltype(f(a)) {
  detail::require(steps >= 2, "simpson: need at least 2 intervals");
  if (steps % 2) ++steps;
  using value_t = decltype(f(a));
  if (a == b) return value_t{};
  const double h = (b - a) / steps;
  value_t acc = f(a) + f(b);
  for (int i = 1; i < steps; ++i) {
    const double x = a + h * i;
    acc += (i % 2 ? 4.0 : 2.0) * f(x);
  }
  return acc * (h / 3.0);
}

struct AdaptiveOptions {
  double rel_tol = 1e-13;
  unsigned max_depth = 15;
};

/// Adaptive 15-point Gauss-Kronrod; either limit may be infinite.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        AdaptiveOptions opt = {}) {
  if (a == b) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, opt.max_depth,
                                                                       opt.rel_tol, &err);
}

// Sum of adaptive integrals over consecutive pieces [cuts[i], cuts[i+1]].
inline double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& cuts,
                               AdaptiveOptions opt = {}) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) s += integrate(f, cuts[i], cuts[i + 1], opt);
  return s;
}

struct PrincipalValue {
  double value = 0.0;
  std::vector<double> exclusions;  // half-widths delta_i
  std::vector<double> truncated;   // integral with (-delta_i, delta_i) removed
  std::vector<double> richardson;  // last row of the extrapolation table
};

/*
  PV int_lo^hi f(w)/w dw for lo <= 0 <= hi, by removing (-d, d) around the
  pole for d = exclusion/2^i, i = 0..levels-1, and extrapolating to d -> 0.

  For smooth f the removed piece int_0^d (f(w) - f(-w))/w dw is odd in d,
  so the truncation error is c1 d + c3 d^3 + c5 d^5 + ..., and column j of
  the Richardson table cancels the d^(2j-1) term.

  If 0 coincides with an endpoint the integral is one-sided and only exists
  when f(0) = 0; the error series is then a plain power series in d.

  `breaks` lists interior points where f is not smooth (table nodes); they
  are passed to the adaptive rule as piece boundaries.
*/
inline PrincipalValue principal_value_over_omega(const std::function<double(double)>& f, double lo,
                                                 double hi, double exclusion, int levels,
                                                 const std::vector<double>& breaks = {},
                                                 AdaptiveOptions opt = {}) {
  detail::require(lo <= 0.0 && hi >= 0.0 && lo < hi, "principal value: domain must contain 0");
  detail::require(exclusion > 0.0, "principal value: exclusion must be positive");
  detail::require(levels >= 2, "principal value: need at least 2 ladder levels");
  const bool one_sided = (lo == 0.0 || hi == 0.0);
  if (one_sided)
    detail::require(std::abs(f(0.0)) <= 1e-300,
                    "principal value diverges: integrand pole sits on a domain endpoint with J(0) != 0");

  auto g = [&f](double w) { return f(w) / w; };

  PrincipalValue pv;
  for (int i = 0; i < levels; ++i) {
    const double d = exclusion / std::pow(2.0, i);
    std::vector<double> left{lo}, right{d};
    for (double b : breaks) {
      if (b > lo && b < -d) left.push_back(b);
      if (b > d && b < hi) right.push_back(b);
    }
    left.push_back(-d);
    right.push_back(hi);
    double s = 0.0;
    if (lo < -d) s += integrate_pieces(g, left, opt);
    if (hi > d) s += integrate_pieces(g, right, opt);
    pv.exclusions.push_back(d);
    pv.truncated.push_back(s);
  }

  // Richardson table, row by row; keep only the previous row.
  std::vector<double> prev{pv.truncated[0]};
  for (int i = 1; i < levels; ++i) {
    std::vector<double> row{pv.truncated[static_cast<std::size_t>(i)]};
    for (int j = 1; j <= i; ++j) {
      const int power = one_sided ? j : 2 * j - 1;
      const double factor = std::pow(2.0, power) - 1.0;
      const double r = row[static_cast<std::size_t>(j - 1)];
      row.push_back(r + (r - prev[static_cast<std::size_t>(j - 1)]) / factor);
    }
    prev = std::move(row);
  }
  pv.richardson = prev;
  pv.value = prev.back();
  return pv;
}

}  // namespace lindblad_lab::quad
