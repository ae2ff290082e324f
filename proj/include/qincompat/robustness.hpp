#pragma once

// Incompatibility quantifiers for unbiased qubit measurement pairs:
//   - closed form for equally noisy symmetric pairs,
//   - the equivalent disk-in-square geometric maximization,
//   - the ratio bound chi = M / P,
//   - bisection over dominance feasibility for arbitrary pairs.
// All quantifiers return 1 exactly on compatible pairs.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "qincompat/assemblage.hpp"
#include "qincompat/bloch.hpp"
#include "qincompat/compat.hpp"

namespace qincompat {

enum class RobustnessMethod { closed_form, geometric, bisection };

struct NoiseOptimizer {
  double angle = 0.0;     // disk-boundary angle of the optimal noise vector
  BlochVector vector{};   // the noise vector itself (unit, in-plane)
};

struct RobustnessResult {
  double eta = 1.0;
  RobustnessMethod method = RobustnessMethod::closed_form;
  std::optional<NoiseOptimizer> optimizer;
};

// Equally noisy symmetric pair at half-angle theta and visibility gamma.
// Compatible (eta = 1) iff gamma*(cos theta + sin theta) <= 1; otherwise
// eta = (sqrt(2)+1) / (sqrt(2) + gamma*(cos theta + sin theta)).
inline RobustnessResult eta_closed_form(double theta, double gamma) {
  if (!(theta >= -kAlgebraTol && theta <= std::numbers::pi / 2 + kAlgebraTol)) {
    throw std::invalid_argument("eta_closed_form: theta must lie in [0, pi/2]");
  }
  if (!(gamma > 0.0 && gamma <= 1.0 + kAlgebraTol)) {
    throw std::invalid_argument("eta_closed_form: gamma must lie in (0, 1]");
  }
  const double k = gamma * (std::cos(theta) + std::sin(theta));
  if (k <= 1.0) return {1.0, RobustnessMethod::closed_form, std::nullopt};
  const double eta = (std::numbers::sqrt2 + 1.0) / (std::numbers::sqrt2 + k);
  return {eta, RobustnessMethod::closed_form,
          NoiseOptimizer{1.25 * std::numbers::pi,
                         {-1.0 / std::numbers::sqrt2, -1.0 / std::numbers::sqrt2, 0.0}}};
}

namespace detail {

// Largest eta in [0,1] with | eta*a + (1-eta)*c |_1 <= 1 for in-plane a, c;
// -1 when the segment misses the unit square.  The crossing lies on one of
// the four square edges, each a linear equation in eta.
inline double square_crossing_eta(const BlochVector& a, const BlochVector& c) {
  double best = -1.0;
  if (c.norm1() <= 1.0 + kAlgebraTol) best = 0.0;
  for (int s1 : {1, -1}) {
    for (int s2 : {1, -1}) {
      const double denom = s1 * (a.x1 - c.x1) + s2 * (a.x2 - c.x2);
      if (std::abs(denom) < 1e-15) continue;
      const double eta = (1.0 - (s1 * c.x1 + s2 * c.x2)) / denom;
      if (eta < -kAlgebraTol || eta > 1.0 + kAlgebraTol) continue;
      const BlochVector p = eta * a + (1.0 - eta) * c;
      if (p.norm1() <= 1.0 + kInputTol) best = std::max(best, std::clamp(eta, 0.0, 1.0));
    }
  }
  return best;
}

}  // namespace detail

// Geometric form of the closed-form robustness: the input vector is the
// scaled measurement axis gamma*(cos theta, sin theta, 0) in first-quadrant
// canonical position.  The optimal noise direction sits at angle 5*pi/4 on
// the disk boundary; a full-circle sweep guards the analytic maximizer.
inline RobustnessResult eta_geometric(const BlochVector& a, int sweep_points = 4096) {
  if (!a.finite() || a.norm() > 1.0 + kAlgebraTol) {
    throw std::invalid_argument("eta_geometric: vector must lie in the unit disk");
  }
  if (std::abs(a.x3) > kInputTol || a.x1 < -kInputTol || a.x2 < -kInputTol) {
    throw std::invalid_argument(
        "eta_geometric: vector must be canonicalized (first quadrant, in plane)");
  }
  if (a.norm1() <= 1.0 + kAlgebraTol) {
    return {1.0, RobustnessMethod::geometric, std::nullopt};
  }
  const double k = a.x1 + a.x2;
  double best_eta = (std::numbers::sqrt2 + 1.0) / (std::numbers::sqrt2 + k);
  double best_phi = 1.25 * std::numbers::pi;
  for (int i = 0; i < sweep_points; ++i) {
    const double phi = 2.0 * std::numbers::pi * (i + 1) / sweep_points;
    const BlochVector c{std::cos(phi), std::sin(phi), 0.0};
    const double eta = detail::square_crossing_eta(a, c);
    if (eta > best_eta) {
      best_eta = eta;
      best_phi = phi;
    }
  }
  return {best_eta, RobustnessMethod::geometric,
          NoiseOptimizer{best_phi, {std::cos(best_phi), std::sin(best_phi), 0.0}}};
}

struct CanonicalPair {
  double theta = 0.0;  // half-angle between the axes
  double gamma = 1.0;  // common visibility
  bool degenerate = false;  // parallel or antiparallel axes (compatible)
};

// Reduces an equally noisy pair to the rotation-invariant (theta, gamma)
// parameters; the robustness of the original pair equals
// eta_closed_form(theta, gamma).
inline CanonicalPair canonicalize_pair(const DichotomicMeasurement& a,
                                       const DichotomicMeasurement& b) {
  if (std::abs(a.visibility - b.visibility) > kInputTol) {
    throw std::invalid_argument(
        "canonicalize_pair: visibilities differ; use eta_bisection instead");
  }
  const double dot = std::clamp(a.axis.dot(b.axis), -1.0, 1.0);
  CanonicalPair out;
  out.theta = 0.5 * std::acos(dot);
  out.gamma = 0.5 * (a.visibility + b.visibility);
  out.degenerate = (1.0 - std::abs(dot)) < kAlgebraTol;
  return out;
}

// General ratio bound on the robustness: guessing bound over success
// probability.  Specializing M to the canonical-ensemble value recovers
// the (sqrt(2)+1) / (2 sqrt(2) P) form.
inline double chi_bound(double m_value, double p_value) {
  if (!(p_value > 0.0 && p_value <= 1.0 + kAlgebraTol)) {
    throw std::invalid_argument("chi_bound: P must lie in (0, 1]");
  }
  if (!(m_value > 0.0 && m_value <= 1.0 + kAlgebraTol)) {
    throw std::invalid_argument("chi_bound: M must lie in (0, 1]");
  }
  return m_value / p_value;
}

// Equivalent robustness reparametrization 1/eta - 1 (decreases to zero as
// the pair becomes compatible).
inline double ir_from_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0 + kAlgebraTol)) {
    throw std::invalid_argument("ir_from_eta: eta must lie in (0, 1]");
  }
  return 1.0 / eta - 1.0;
}

// Numerical robustness for arbitrary unbiased pairs (unequal visibilities
// allowed): bisects eta against the dominance feasibility problem
//   sum_y J(x,y) >= eta A(x),  sum_x J(x,y) >= eta B(y),  sum J = I.
//
// Probes the solver cannot settle are only possible within a band around
// the true eta much narrower than the bracket tolerance; such probes are
// rounded down (treated as infeasible), which keeps the reported value
// within the bracket of the supremum.  A probe left undecided far from
// the final bracket is a genuine malfunction and aborts.
inline RobustnessResult eta_bisection(const DichotomicMeasurement& a,
                                      const DichotomicMeasurement& b,
                                      double bracket_tol = 1e-4,
                                      const FeasibilityOptions& opts = {}) {
  if (busch_compatible(a, b)) return {1.0, RobustnessMethod::bisection, std::nullopt};
  double lo = 0.0, hi = 1.0;  // lo feasible, hi infeasible (incompatible pair)
  double undecided_at = -1.0;
  while (hi - lo >= bracket_tol) {
    const double mid = 0.5 * (lo + hi);
    const std::array<Effect, 2> tx = {mid * a.effect(1), mid * a.effect(-1)};
    const std::array<Effect, 2> ty = {mid * b.effect(1), mid * b.effect(-1)};
    const FeasibilityReport rep = joint_feasibility(tx, ty, /*dominance=*/true, opts);
    if (rep.status == FeasibilityStatus::feasible) {
      lo = mid;
    } else {
      if (rep.status == FeasibilityStatus::undecided) undecided_at = mid;
      hi = mid;
    }
  }
  if (undecided_at >= 0.0 && std::abs(undecided_at - 0.5 * (lo + hi)) > 4.0 * bracket_tol) {
    std::ostringstream msg;
    msg << "eta_bisection: feasibility undecided at eta=" << undecided_at
        << ", far outside the final bracket [" << lo << ", " << hi << "]";
    throw SolverError(msg.str());
  }
  return {0.5 * (lo + hi), RobustnessMethod::bisection, std::nullopt};
}

}  // namespace qincompat
