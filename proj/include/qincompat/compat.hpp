#pragma once

// Compatibility machinery for dichotomic qubit measurements: the Busch
// criterion for unbiased pairs, joint measurements and their marginals,
// and a convex-feasibility solver alternating projections between the
// marginal-constraint affine set and the PSD cone product (in
// reflection-averaged form, which resolves near-tangent instances that
// plain corrected alternation leaves unsettled).  The solver also
// supports the dominance form
//   sum_y J(x,y) >= T_x,  sum_x J(x,y) >= T_y,  sum J = I
// used by the robustness bisection.
//
// Infeasible instances drive the residual to a stable plateau whose level
// approximates the gap between the two sets; feasible instances traverse
// a plateau of comparable level for roughly (plateau level)^-1 iterations
// before collapsing into the intersection.  The infeasibility certificate
// therefore requires both a stalled residual and an iteration count past
// the collapse horizon for that plateau level.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "qincompat/bloch.hpp"
#include "qincompat/detail/linalg.hpp"

namespace qincompat {

// Two unbiased measurements with vectors e = vis_A * axis_A and
// f = vis_B * axis_B are compatible iff |e+f| + |e-f| <= 2.
inline bool busch_compatible(const DichotomicMeasurement& a, const DichotomicMeasurement& b) {
  const BlochVector e = a.visibility * a.axis;
  const BlochVector f = b.visibility * b.axis;
  return (e + f).norm() + (e - f).norm() <= 2.0 + kAlgebraTol;
}

struct JointMeasurement {
  // Outcome pairs in the order (+,+), (+,-), (-,+), (-,-).
  std::array<Effect, 4> effects{};

  static int index(int x, int y) {
    if ((x != 1 && x != -1) || (y != 1 && y != -1)) {
      throw std::invalid_argument("JointMeasurement: outcomes must be +1 or -1");
    }
    return (x == 1 ? 0 : 2) + (y == 1 ? 0 : 1);
  }
  const Effect& effect(int x, int y) const { return effects[static_cast<size_t>(index(x, y))]; }

  void validate(double tol = kInputTol) const {
    Effect sum = Effect::zero();
    for (const Effect& e : effects) {
      if (e.min_eigenvalue() < -tol) {
        throw std::invalid_argument("JointMeasurement: effect not PSD");
      }
      sum = sum + e;
    }
    const Effect dev = sum - Effect::identity();
    if (0.5 * (std::abs(dev.c0) + dev.c.norm()) > tol) {
      throw std::invalid_argument("JointMeasurement: effects must sum to the identity");
    }
  }
};

struct MarginalPOVMs {
  std::array<Effect, 2> x;  // outcome + then -
  std::array<Effect, 2> y;
};

inline MarginalPOVMs marginals(const JointMeasurement& joint) {
  MarginalPOVMs m;
  m.x[0] = joint.effect(1, 1) + joint.effect(1, -1);
  m.x[1] = joint.effect(-1, 1) + joint.effect(-1, -1);
  m.y[0] = joint.effect(1, 1) + joint.effect(-1, 1);
  m.y[1] = joint.effect(1, -1) + joint.effect(-1, -1);
  return m;
}

enum class FeasibilityStatus { feasible, infeasible, undecided };

struct FeasibilityReport {
  bool feasible = false;
  FeasibilityStatus status = FeasibilityStatus::undecided;
  std::optional<JointMeasurement> witness;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double gap_estimate = 0.0;  // stalled displacement norm for infeasible instances
};

struct FeasibilityOptions {
  int max_iterations = 50000;
  double feasible_tol = 1e-7;
  double infeasible_tol = 1e-4;     // stalled above this at the cap => infeasible
  double certificate_floor = 2e-7;  // stalled gap above this => infeasible
  int stall_window = 800;
  double stall_improvement = 1e-3;  // relative progress required per window
  double certify_scale = 2.5;  // certify a stall only past certify_scale / residual iterations
};

namespace detail {

using Coeffs = std::array<double, 4>;  // (c0, c1, c2, c3), E = (c0*I + c.sigma)/2

inline Coeffs to_coeffs(const Effect& e) { return {e.c0, e.c.x1, e.c.x2, e.c.x3}; }
inline Effect to_effect(const Coeffs& v) { return {v[0], {v[1], v[2], v[3]}}; }

// Frobenius projection onto the PSD cone: clip the negative eigenvalue.
inline Coeffs psd_clip(const Coeffs& v) {
  const double n = std::sqrt(v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
  if (v[0] >= n) return v;
  if (v[0] <= -n) return {0.0, 0.0, 0.0, 0.0};
  const double lam = 0.5 * (v[0] + n);
  const double s = (n > 0.0) ? lam / n : 0.0;
  return {lam, s * v[1], s * v[2], s * v[3]};
}

// Affine set { V : sum_s pattern[r][s] V[s] = rhs[r] }, same slot pattern
// for all four Bloch coordinates.
struct AffineProjector {
  std::vector<std::vector<double>> pattern;  // rows x slots, entries in {-1,0,1}
  std::vector<Coeffs> rhs;
  std::vector<double> gram_inv;  // rows x rows

  void finalize() {
    const std::size_t m = pattern.size();
    std::vector<double> gram(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t q = 0; q < m; ++q) {
        double s = 0.0;
        for (std::size_t k = 0; k < pattern[r].size(); ++k) s += pattern[r][k] * pattern[q][k];
        gram[r * m + q] = s;
      }
    }
    // invert by solving against unit vectors
    gram_inv.assign(m * m, 0.0);
    for (std::size_t col = 0; col < m; ++col) {
      std::vector<double> e(m, 0.0);
      e[col] = 1.0;
      const std::vector<double> x = gauss_solve(gram, e);
      for (std::size_t r = 0; r < m; ++r) gram_inv[r * m + col] = x[r];
    }
  }

  void project(std::vector<Coeffs>& v) const {
    const std::size_t m = pattern.size();
    for (int j = 0; j < 4; ++j) {
      std::array<double, 8> res{};  // m <= 5
      for (std::size_t r = 0; r < m; ++r) {
        double s = -rhs[r][static_cast<size_t>(j)];
        for (std::size_t k = 0; k < pattern[r].size(); ++k) s += pattern[r][k] * v[k][static_cast<size_t>(j)];
        res[r] = s;
      }
      std::array<double, 8> lam{};
      for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (std::size_t q = 0; q < m; ++q) s += gram_inv[r * m + q] * res[q];
        lam[r] = s;
      }
      for (std::size_t k = 0; k < pattern[0].size(); ++k) {
        double corr = 0.0;
        for (std::size_t r = 0; r < m; ++r) corr += pattern[r][k] * lam[r];
        v[k][static_cast<size_t>(j)] -= corr;
      }
    }
  }

  double violation(const std::vector<Coeffs>& v) const {
    double worst = 0.0;
    for (std::size_t r = 0; r < pattern.size(); ++r) {
      for (int j = 0; j < 4; ++j) {
        double s = -rhs[r][static_cast<size_t>(j)];
        for (std::size_t k = 0; k < pattern[r].size(); ++k) s += pattern[r][k] * v[k][static_cast<size_t>(j)];
        worst = std::max(worst, std::abs(s));
      }
    }
    return worst;
  }
};

// Hermitian congruence B A B in full matrix form A = a0*I + av.sigma.
inline void congruence(double b0, const BlochVector& bv, double a0, const BlochVector& av,
                       double& out0, BlochVector& outv) {
  const double bb = bv.dot(bv);
  const double ab = av.dot(bv);
  out0 = a0 * (b0 * b0 + bb) + 2.0 * b0 * ab;
  outv = (b0 * b0 - bb) * av + (2.0 * (ab + a0 * b0)) * bv;
}

// Rescales four PSD effects by S^{-1/2} (.) S^{-1/2} with S their sum, so
// they sum to the identity exactly while staying PSD.
inline bool normalize_sum(std::array<Effect, 4>& effects) {
  double s0 = 0.0;
  BlochVector sv{};
  for (const Effect& e : effects) {
    s0 += 0.5 * e.c0;
    sv = sv + 0.5 * e.c;
  }
  const double n = sv.norm();
  const double lam_min = s0 - n;
  if (lam_min < 0.1) return false;  // sum too far from the identity
  const double ip = 1.0 / std::sqrt(s0 + n), im = 1.0 / std::sqrt(lam_min);
  const double b0 = 0.5 * (ip + im);
  const BlochVector bv = (n > 1e-300) ? (0.5 * (ip - im) / n) * sv : BlochVector{};
  for (Effect& e : effects) {
    double o0;
    BlochVector ov;
    congruence(b0, bv, 0.5 * e.c0, 0.5 * e.c, o0, ov);
    e = Effect{2.0 * o0, 2.0 * ov};
  }
  return true;
}

}  // namespace detail

// Exact mode (dominance = false): is there a joint measurement whose
// marginals equal the target effect pairs?  Dominance mode: is there a
// normalized joint whose marginals dominate the targets effect-wise?
// Targets in dominance mode are passed pre-scaled (eta * A(x), ...).
inline FeasibilityReport joint_feasibility(const std::array<Effect, 2>& target_x,
                                           const std::array<Effect, 2>& target_y,
                                           bool dominance,
                                           const FeasibilityOptions& opts = {}) {
  using detail::Coeffs;

  for (const Effect& e : {target_x[0], target_x[1], target_y[0], target_y[1]}) {
    if (!e.c.finite() || !std::isfinite(e.c0) || e.min_eigenvalue() < -kInputTol) {
      throw std::invalid_argument("joint_feasibility: targets must be PSD effects");
    }
  }
  const Effect sum_x = target_x[0] + target_x[1];
  const Effect sum_y = target_y[0] + target_y[1];
  {
    const Effect dev = sum_x - sum_y;
    if (0.5 * (std::abs(dev.c0) + dev.c.norm()) > kInputTol || sum_x.c0 > 2.0 + kInputTol) {
      throw std::invalid_argument("joint_feasibility: inconsistent target normalization");
    }
    if (!dominance) {
      const Effect dev1 = sum_x - Effect::identity();
      if (0.5 * (std::abs(dev1.c0) + dev1.c.norm()) > kInputTol) {
        throw std::invalid_argument("joint_feasibility: exact mode needs POVM targets");
      }
    }
  }

  detail::AffineProjector aff;
  std::size_t slots;
  if (!dominance) {
    slots = 4;
    aff.pattern = {{1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0}};
    aff.rhs = {detail::to_coeffs(target_x[0]), detail::to_coeffs(target_x[1]),
               detail::to_coeffs(target_y[0])};
  } else {
    slots = 8;  // four joint effects plus marginal slacks (S+, S-, T+, T-)
    aff.pattern = {{1, 1, 0, 0, -1, 0, 0, 0},
                   {0, 0, 1, 1, 0, -1, 0, 0},
                   {1, 0, 1, 0, 0, 0, -1, 0},
                   {0, 1, 0, 1, 0, 0, 0, -1},
                   {1, 1, 1, 1, 0, 0, 0, 0}};
    aff.rhs = {detail::to_coeffs(target_x[0]), detail::to_coeffs(target_x[1]),
               detail::to_coeffs(target_y[0]), detail::to_coeffs(target_y[1]),
               Coeffs{2.0, 0.0, 0.0, 0.0}};
  }
  aff.finalize();

  std::vector<Coeffs> v(slots, Coeffs{0.5, 0.0, 0.0, 0.0});

  // True violation of a candidate witness: marginal mismatch in exact
  // mode, negative part of (marginal - target) in dominance mode.
  auto witness_violation = [&](const JointMeasurement& j) {
    const MarginalPOVMs m = marginals(j);
    double worst = 0.0;
    const std::array<const Effect*, 4> got = {&m.x[0], &m.x[1], &m.y[0], &m.y[1]};
    const std::array<const Effect*, 4> want = {&target_x[0], &target_x[1], &target_y[0],
                                               &target_y[1]};
    for (int i = 0; i < 4; ++i) {
      const Effect d = *got[static_cast<size_t>(i)] - *want[static_cast<size_t>(i)];
      if (!dominance) {
        worst = std::max(worst, 0.5 * (std::abs(d.c0) + d.c.norm()));
      } else {
        worst = std::max(worst, std::max(0.0, -d.min_eigenvalue()));
      }
    }
    return worst;
  };

  auto polish = [&](const std::vector<Coeffs>& cone_point)
      -> std::optional<std::pair<JointMeasurement, double>> {
    JointMeasurement j;
    for (int i = 0; i < 4; ++i) j.effects[static_cast<size_t>(i)] = detail::to_effect(cone_point[static_cast<size_t>(i)]);
    if (!detail::normalize_sum(j.effects)) return std::nullopt;
    return std::make_pair(j, witness_violation(j));
  };

  FeasibilityReport report;
  double r_best = std::numeric_limits<double>::infinity();
  int last_progress = 0;
  double polish_gate = std::numeric_limits<double>::infinity();
  std::vector<Coeffs> x(slots), y(slots);

  for (int it = 1; it <= opts.max_iterations; ++it) {
    // reflection-averaged step: x = P_A(z), y = P_C(2x - z), z += y - x
    x = v;
    aff.project(x);
    for (std::size_t s = 0; s < slots; ++s) {
      Coeffs refl;
      for (int j = 0; j < 4; ++j) {
        refl[static_cast<size_t>(j)] = 2.0 * x[s][static_cast<size_t>(j)] - v[s][static_cast<size_t>(j)];
      }
      y[s] = detail::psd_clip(refl);
      for (int j = 0; j < 4; ++j) {
        v[s][static_cast<size_t>(j)] += y[s][static_cast<size_t>(j)] - x[s][static_cast<size_t>(j)];
      }
    }
    const double r = aff.violation(y);  // y is cone-exact; measure the affine miss
    report.iterations = it;
    if (r < r_best * (1.0 - opts.stall_improvement)) {
      r_best = r;
      last_progress = it;
    }

    if (r < opts.feasible_tol && r < polish_gate) {
      polish_gate = 0.5 * r;  // retry only once the crude residual halves
      if (auto got = polish(y)) {
        if (got->second <= opts.feasible_tol) {
          report.feasible = true;
          report.status = FeasibilityStatus::feasible;
          report.witness = got->first;
          report.residual = got->second;
          return report;
        }
      }
    }

    // a stalled residual certifies infeasibility only once the iteration
    // count rules out a feasible plateau of the same level
    if (it - last_progress >= opts.stall_window &&
        static_cast<double>(it) * r_best >= opts.certify_scale &&
        r_best > opts.certificate_floor) {
      report.residual = r_best;
      report.gap_estimate = r_best;
      report.status = FeasibilityStatus::infeasible;
      return report;
    }
  }

  if (auto got = polish(y)) {
    if (got->second <= opts.feasible_tol) {
      report.feasible = true;
      report.status = FeasibilityStatus::feasible;
      report.witness = got->first;
      report.residual = got->second;
      return report;
    }
  }
  report.residual = r_best;
  report.gap_estimate = r_best;
  report.status = (r_best > opts.infeasible_tol && report.iterations - last_progress >= opts.stall_window)
                      ? FeasibilityStatus::infeasible
                      : FeasibilityStatus::undecided;
  return report;
}

// Convenience wrapper for a pair of unbiased measurements.
inline FeasibilityReport joint_feasibility(const DichotomicMeasurement& a,
                                           const DichotomicMeasurement& b,
                                           const FeasibilityOptions& opts = {}) {
  return joint_feasibility({a.effect(1), a.effect(-1)}, {b.effect(1), b.effect(-1)},
                           /*dominance=*/false, opts);
}

}  // namespace qincompat
