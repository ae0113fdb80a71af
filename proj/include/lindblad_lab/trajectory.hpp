#pragma once

#include "lindblad_lab/linops.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace lindblad_lab {

// Strictly increasing sequence of times starting at 0.
class TimeGrid {
 public:
  TimeGrid() = default;

  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    detail::require(!times_.empty(), "TimeGrid: empty");
    detail::require(times_.front() == 0.0, "TimeGrid: must start at t = 0");
    for (std::size_t i = 1; i < times_.size(); ++i)
      detail::require(times_[i] > times_[i - 1], "TimeGrid: times must be strictly increasing");
  }

  static TimeGrid uniform(double t_max, std::size_t steps) {
    detail::require(steps >= 1, "TimeGrid::uniform: steps must be >= 1");
    detail::require(t_max > 0 && std::isfinite(t_max), "TimeGrid::uniform: t_max must be positive");
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) t[i] = t_max * static_cast<double>(i) / static_cast<double>(steps);
    TimeGrid g(std::move(t));
    g.uniform_ = true;
    return g;
  }

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double operator[](std::size_t i) const { return times_[i]; }
  double t_max() const { return times_.back(); }

  // Uniform either by construction or to within relative 1e-12.
  bool is_uniform() const {
    if (uniform_ || times_.size() <= 2) return true;
    const double h = times_[1] - times_[0];
    for (std::size_t i = 2; i < times_.size(); ++i)
      if (std::abs((times_[i] - times_[i - 1]) - h) > 1e-12 * std::max(1.0, times_.back())) return false;
    return true;
  }

 private:
  std::vector<double> times_{0.0};
  bool uniform_ = false;
};

struct NodeDiagnostics {
  double trace_err = 0.0;  // |tr rho - 1|
  double herm_err = 0.0;   // max |rho - rho^dag|
  double eig_min = 0.0;    // smallest eigenvalue of the Hermitian part
};

inline NodeDiagnostics diagnose(const Operator& rho) {
  return {std::abs(rho.trace() - 1.0), hermiticity_error(rho), eig_min_hermitian(rho)};
}

// One state per grid node. States are stored exactly as the propagator
// produced them; drift shows up in the diagnostics and is never corrected.
struct Trajectory {
  std::vector<double> times;
  std::vector<Operator> states;
  std::vector<NodeDiagnostics> diagnostics;

  std::size_t size() const { return states.size(); }
  Eigen::Index dim() const { return states.empty() ? 0 : states.front().rows(); }

  void push(double t, Operator rho) {
    diagnostics.push_back(diagnose(rho));
    times.push_back(t);
    states.push_back(std::move(rho));
  }
};

struct CptpReport {
  std::vector<NodeDiagnostics> nodes;
  double max_trace_err = 0.0;
  double max_herm_err = 0.0;
  double min_eig = 0.0;
  // First node whose diagnostics exceed `breach_factor` times the tolerances.
  std::optional<std::size_t> breach_node;

  bool within(const Tolerances& tol) const {
    return max_trace_err <= tol.trace && max_herm_err <= tol.herm && min_eig >= -tol.psd;
  }
  bool failed() const { return breach_node.has_value(); }
};

inline CptpReport cptp_report(const Trajectory& traj, const Tolerances& tol = {},
                              double breach_factor = 10.0) {
  CptpReport r;
  r.nodes = traj.diagnostics;
  r.min_eig = r.nodes.empty() ? 0.0 : r.nodes.front().eig_min;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const auto& d = r.nodes[i];
    r.max_trace_err = std::max(r.max_trace_err, d.trace_err);
    r.max_herm_err = std::max(r.max_herm_err, d.herm_err);
    r.min_eig = std::min(r.min_eig, d.eig_min);
    const bool breach = d.trace_err > breach_factor * tol.trace ||
                        d.herm_err > breach_factor * tol.herm ||
                        d.eig_min < -breach_factor * tol.psd;
    if (breach && !r.breach_node) r.breach_node = i;
  }
  return r;
}

// Node-wise trace distance between two trajectories on the same grid.
inline std::vector<double> trace_distances(const Trajectory& a, const Trajectory& b) {
  detail::require(a.size() == b.size(), "trace_distances: trajectories have different lengths");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = trace_distance(a.states[i], b.states[i]);
  return out;
}

}  // namespace lindblad_lab
