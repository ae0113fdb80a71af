#pragma once

// Bath side of the reduction: the coupling operator B, its correlation
// integrals F(t) and G(t) in the vacuum, spectral densities, and the
// Markov-limit rates gamma and epsilon.

#include "lindblad_lab/fock.hpp"
#include "lindblad_lab/quadrature.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lindblad_lab {

struct BathMode {
  double omega = 0.0;  // rad/time, may be zero or negative
  complex g{0.0, 0.0};  // coupling, frequency units
};

struct BathSpec {
  std::vector<BathMode> modes;
  int n_max = 1;

  FockSpace space() const { return FockSpace(static_cast<int>(modes.size()), n_max); }

  double coupling_weight() const {
    double s = 0.0;
    for (const auto& m : modes) s += std::norm(m.g);
    return s;
  }

  void validate() const {
    detail::require(n_max >= 1, "BathSpec: n_max must be >= 1");
    for (const auto& m : modes)
      detail::require(std::isfinite(m.omega) && std::isfinite(m.g.real()) && std::isfinite(m.g.imag()),
                      "BathSpec: non-finite mode parameters");
  }
};

/// B = sum_k conj(g_k) a_k on the truncated Fock space.
inline Operator b_op(const BathSpec& bath) {
  bath.validate();
  const FockSpace space = bath.space();
  Operator b = Operator::Zero(space.dim(), space.dim());
  for (int k = 1; k <= space.modes; ++k)
    b += std::conj(bath.modes[static_cast<std::size_t>(k - 1)].g) * build_bath_ops(space, k).first;
  return b;
}

/// Coefficients c_k with B(t) = sum_k c_k a_k, i.e. c_k = conj(g_k) exp(-i w_k t).
inline std::vector<complex> b_op_t_coeffs(const BathSpec& bath, double t) {
  std::vector<complex> c;
  c.reserve(bath.modes.size());
  for (const auto& m : bath.modes) c.push_back(std::conj(m.g) * std::exp(-kI * (m.omega * t)));
  return c;
}

/// H_B = hbar sum_k w_k a_k^dag a_k (diagonal in the Fock basis).
inline Operator bath_hamiltonian(const BathSpec& bath, double hbar = 1.0) {
  const FockSpace space = bath.space();
  Operator h = Operator::Zero(space.dim(), space.dim());
  for (Eigen::Index i = 0; i < space.dim(); ++i) {
    double e = 0.0;
    for (int k = 1; k <= space.modes; ++k)
      e += bath.modes[static_cast<std::size_t>(k - 1)].omega * occupation(space, i, k);
    h(i, i) = hbar * e;
  }
  return h;
}

/*
  F(t) = sum_k |g_k|^2 int_0^t exp(-i w_k (t - t')) dt'
       = sum_k |g_k|^2 (1 - exp(-i w_k t)) / (i w_k)
       = sum_k |g_k|^2 t exp(-i w_k t / 2) sinc(w_k t / 2),
  the last form being free of cancellation for small w_k t and reducing to
  |g_k|^2 t at w_k = 0.
*/
inline complex f_discrete(const BathSpec& bath, double t) {
  detail::require(t >= 0.0, "f_discrete: t must be non-negative");
  complex f{0.0, 0.0};
  for (const auto& m : bath.modes) {
    const double x = 0.5 * m.omega * t;
    const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    f += std::norm(m.g) * t * sinc * complex(std::cos(x), -std::sin(x));
  }
  return f;
}

// G(t) vanishes identically for the vacuum bath state.
inline complex g_discrete(const BathSpec& /*bath*/, double t) {
  detail::require(t >= 0.0, "g_discrete: t must be non-negative");
  return {0.0, 0.0};
}

namespace detail {

// Vacuum correlation integrand evaluated literally: B(s) is obtained by
// conjugating B with exp(+-i H_B s / hbar) on the truncated space, and the
// vacuum trace is the expectation value in |vac>.
struct VacuumCorrelator {
  Operator b;
  Eigen::VectorXd energies;  // diagonal of H_B / hbar
  StateVector vac;

  explicit VacuumCorrelator(const BathSpec& bath)
      : b(b_op(bath)), energies(bath_hamiltonian(bath, 1.0).diagonal().real()), vac(bath.space().vacuum()) {}

  Operator b_at(double s) const {
    const Eigen::VectorXcd left = (kI * s * energies.cast<complex>().array()).exp().matrix();
    const Eigen::VectorXcd right = left.conjugate();
    return left.asDiagonal() * b * right.asDiagonal();
  }

  // B(t) B^dag(t') |vac>  and  B^dag(t') B(t) |vac>, projected on <vac|.
  complex bbdag(const Operator& bt, const Operator& btp) const {
    return vac.dot(bt * (btp.adjoint() * vac));
  }
  complex bdagb(const Operator& bt, const Operator& btp) const {
    return vac.dot(btp.adjoint() * (bt * vac));
  }
};

}  // namespace detail

/// F(t) by explicit vacuum traces on the Fock space and Simpson quadrature in t'.
inline complex f_oracle(const BathSpec& bath, double t, int quad_steps) {
  detail::require(quad_steps >= 2, "f_oracle: quad_steps must be >= 2");
  detail::require(t >= 0.0, "f_oracle: t must be non-negative");
  if (t == 0.0 || bath.modes.empty()) return {0.0, 0.0};
  const detail::VacuumCorrelator c(bath);
  const Operator bt = c.b_at(t);
  return quad::simpson([&](double tp) { return c.bbdag(bt, c.b_at(tp)); }, 0.0, t, quad_steps);
}

/// G(t) by the same literal route.
inline complex g_oracle(const BathSpec& bath, double t, int quad_steps) {
  detail::require(quad_steps >= 2, "g_oracle: quad_steps must be >= 2");
  detail::require(t >= 0.0, "g_oracle: t must be non-negative");
  if (t == 0.0 || bath.modes.empty()) return {0.0, 0.0};
  const detail::VacuumCorrelator c(bath);
  const Operator bt = c.b_at(t);
  return quad::simpson([&](double tp) { return c.bdagb(bt, c.b_at(tp)); }, 0.0, t, quad_steps);
}

// ---------------------------------------------------------------------------
// Spectral densities

struct Lorentzian {
  double j0 = 1.0;       // peak value
  double gamma_w = 1.0;  // half-width
  double center = 0.0;
};

// Tabulated J(w) with linear interpolation between strictly increasing nodes.
struct SpectralTable {
  std::vector<double> omega;
  std::vector<double> value;
};

class SpectralDensity {
 public:
  enum class Kind { lorentzian, table };

  static SpectralDensity lorentzian(double j0, double gamma_w, double center = 0.0) {
    detail::require(j0 >= 0.0 && std::isfinite(j0), "lorentzian: j0 must be finite and >= 0");
    detail::require(gamma_w > 0.0 && std::isfinite(gamma_w), "lorentzian: gamma_w must be positive");
    detail::require(std::isfinite(center), "lorentzian: center must be finite");
    SpectralDensity s;
    s.kind_ = Kind::lorentzian;
    s.lor_ = {j0, gamma_w, center};
    return s;
  }

  static SpectralDensity table(std::vector<double> omega, std::vector<double> value) {
    detail::require(omega.size() == value.size(), "spectral table: column lengths differ");
    detail::require(omega.size() >= 2, "spectral table: need at least two points");
    for (std::size_t i = 0; i < omega.size(); ++i) {
      detail::require(std::isfinite(omega[i]) && std::isfinite(value[i]), "spectral table: non-finite entry");
      detail::require(value[i] >= 0.0, "spectral table: negative J at omega = " + std::to_string(omega[i]));
      if (i) detail::require(omega[i] > omega[i - 1], "spectral table: omega must be strictly increasing");
    }
    SpectralDensity s;
    s.kind_ = Kind::table;
    s.tab_ = {std::move(omega), std::move(value)};
    return s;
  }

  Kind kind() const { return kind_; }
  const Lorentzian& lorentzian_params() const { return lor_; }
  const SpectralTable& table_data() const { return tab_; }

  // Domain on which J is declared: the full line for Lorentzians, the
  // table range otherwise.
  double domain_lo() const {
    return kind_ == Kind::lorentzian ? -std::numeric_limits<double>::infinity() : tab_.omega.front();
  }
  double domain_hi() const {
    return kind_ == Kind::lorentzian ? std::numeric_limits<double>::infinity() : tab_.omega.back();
  }

  double operator()(double omega) const {
    if (kind_ == Kind::lorentzian) {
      const double d = omega - lor_.center;
      return lor_.j0 * lor_.gamma_w * lor_.gamma_w / (d * d + lor_.gamma_w * lor_.gamma_w);
    }
    detail::require(omega >= tab_.omega.front() && omega <= tab_.omega.back(),
                    "spectral table: omega = " + std::to_string(omega) + " outside [" +
                        std::to_string(tab_.omega.front()) + ", " + std::to_string(tab_.omega.back()) + "]");
    auto it = std::upper_bound(tab_.omega.begin(), tab_.omega.end(), omega);
    if (it == tab_.omega.end()) return tab_.value.back();
    const auto i = static_cast<std::size_t>(it - tab_.omega.begin());
    const double w0 = tab_.omega[i - 1], w1 = tab_.omega[i];
    const double s = (omega - w0) / (w1 - w0);
    return (1.0 - s) * tab_.value[i - 1] + s * tab_.value[i];
  }

 private:
  Kind kind_ = Kind::lorentzian;
  Lorentzian lor_;
  SpectralTable tab_;
};

inline double spectral_eval(const SpectralDensity& j, double omega) { return j(omega); }

/// Parse the two-column "omega,J" text format. Blank lines and lines
/// starting with '#' are skipped; a single non-numeric header line is allowed.
inline SpectralDensity read_spectral_table(std::istream& in, const std::string& source = "<table>") {
  std::vector<double> w, v;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a = 0, b = 0;
    std::string extra;
    if (!(ss >> a >> b)) {
      detail::require(!header_seen && w.empty(),
                      source + ":" + std::to_string(lineno) + ": expected two numeric columns");
      header_seen = true;
      continue;
    }
    detail::require(!(ss >> extra), source + ":" + std::to_string(lineno) + ": more than two columns");
    w.push_back(a);
    v.push_back(b);
  }
  return SpectralDensity::table(std::move(w), std::move(v));
}

inline SpectralDensity load_spectral_table(const std::string& path) {
  std::ifstream f(path);
  detail::require(static_cast<bool>(f), "cannot open spectral table '" + path + "'");
  return read_spectral_table(f, path);
}

/// Midpoint discretisation: m equal cells on [lo, hi], w_k at the cell
/// centres, g_k = sqrt(J(w_k) dw).
inline BathSpec discretize(const SpectralDensity& j, int m, double omega_lo, double omega_hi, int n_max = 1) {
  detail::require(m >= 1, "discretize: m must be >= 1");
  detail::require(omega_lo < omega_hi, "discretize: omega_lo must be < omega_hi");
  BathSpec bath;
  bath.n_max = n_max;
  const double dw = (omega_hi - omega_lo) / m;
  bath.modes.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const double w = omega_lo + (k + 0.5) * dw;
    const double jw = j(w);
    detail::require(jw >= 0.0, "discretize: negative J at omega = " + std::to_string(w));
    bath.modes.push_back({w, complex(std::sqrt(jw * dw), 0.0)});
  }
  return bath;
}

/// Continuum F(t) = int_lo^hi J(w) (1 - exp(-i w t)) / (i w) dw on a finite window.
inline complex f_continuum(const SpectralDensity& j, double t, double lo, double hi) {
  detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "f_continuum: finite window required");
  if (t == 0.0) return {0.0, 0.0};
  auto kernel = [t](double w) {
    const double x = 0.5 * w * t;
    const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    return complex(std::cos(x), -std::sin(x)) * (t * sinc);
  };
  std::vector<double> cuts{lo};
  if (j.kind() == SpectralDensity::Kind::table)
    for (double w : j.table_data().omega)
      if (w > lo && w < hi) cuts.push_back(w);
  cuts.push_back(hi);
  quad::AdaptiveOptions opt{1e-12, 40};
  const double re = quad::integrate_pieces([&](double w) { return j(w) * kernel(w).real(); }, cuts, opt);
  const double im = quad::integrate_pieces([&](double w) { return j(w) * kernel(w).imag(); }, cuts, opt);
  return {re, im};
}

// ---------------------------------------------------------------------------
// Markov limit

struct MarkovOptions {
  double pv_exclusion = 0.5;
  int pv_levels = 6;
  // Weight of the delta function at the lower end of int_0^inf: false gives
  // gamma = 2 pi J(0) (domain extended to the full line), true gives pi J(0).
  bool half_line_gamma = false;
};

struct MarkovRates {
  double gamma = 0.0;
  double epsilon = 0.0;
  // Diagnostics of the principal-value evaluation.
  double domain_lo = 0.0;
  double domain_hi = 0.0;
  quad::PrincipalValue pv;
};

/*
  gamma   = 2 pi J(0)                  (or pi J(0) with half_line_gamma)
  epsilon = -2 PV int J(w)/w dw        over the declared domain of J.
*/
inline MarkovRates markov_rates(const SpectralDensity& j, const MarkovOptions& opt = {}) {
  detail::require(opt.pv_exclusion > 0.0, "markov_rates: pv_exclusion must be positive");
  detail::require(opt.pv_levels >= 2, "markov_rates: pv_levels must be >= 2");
  const double lo = j.domain_lo(), hi = j.domain_hi();
  detail::require(lo <= 0.0 && hi >= 0.0,
                  "markov_rates: J(0) undefined, spectral domain [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] does not cover 0");
  MarkovRates r;
  r.domain_lo = lo;
  r.domain_hi = hi;
  const double j_at_zero = j(0.0);
  r.gamma = (opt.half_line_gamma ? kPi : 2.0 * kPi) * j_at_zero;

  std::vector<double> breaks;
  double exclusion = opt.pv_exclusion;
  if (j.kind() == SpectralDensity::Kind::table) {
    // Keep the exclusion window inside the cells adjacent to 0 so the
    // removed piece stays polynomial in the half-width.
    for (double w : j.table_data().omega) {
      breaks.push_back(w);
      if (w != 0.0) exclusion = std::min(exclusion, std::abs(w));
    }
  } else {
    const auto& p = j.lorentzian_params();
    breaks.push_back(p.center);
    // Anchor the infinite tails a few widths out.
    for (double k : {1.0, 4.0, 16.0, 64.0}) {
      breaks.push_back(p.center - k * p.gamma_w);
      breaks.push_back(p.center + k * p.gamma_w);
    }
    std::sort(breaks.begin(), breaks.end());
    if (p.center != 0.0) exclusion = std::min(exclusion, 0.5 * std::abs(p.center));
  }
  auto jf = [&j](double w) { return j(w); };
  r.pv = quad::principal_value_over_omega(jf, lo, hi, exclusion, opt.pv_levels, breaks);
  r.epsilon = -2.0 * r.pv.value;
  return r;
}

}  // namespace lindblad_lab
