#pragma once

// Exact qubit state/measurement algebra in the Bloch parametrization.
//
// Conventions used throughout:
//   - a state is rho = (I + r.sigma)/2 with Bloch vector r, |r| <= 1;
//   - an effect is E = (c0*I + c.sigma)/2 with c0 in [0,2], positive
//     semidefinite iff c0 >= |c| and with complement I - E PSD iff
//     2 - c0 >= |c|;
//   - a ket (amp_h, amp_v) maps to the Bloch vector
//       r = (2 Re(conj(h) v), 2 Im(conj(h) v), |h|^2 - |v|^2),
//     i.e. the horizontal basis vector sits at +x3 and the relative
//     phase of the vertical amplitude sweeps the x1-x2 plane.  This
//     phase convention makes the four canonical preparation kets at
//     quarter-turn phase land exactly on the diagonal ensemble axes.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace qincompat {

inline constexpr double kAlgebraTol = 1e-12;  // exact algebraic identities
inline constexpr double kInputTol = 1e-9;     // normalized-input validation

// Thrown when an iterative solver cannot certify its result.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

struct BlochVector {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;

  double dot(const BlochVector& o) const { return x1 * o.x1 + x2 * o.x2 + x3 * o.x3; }
  double norm() const { return std::sqrt(dot(*this)); }
  // l1 norm; the compatibility region of equally noisy unbiased pairs is the unit l1 ball.
  double norm1() const { return std::abs(x1) + std::abs(x2) + std::abs(x3); }

  bool finite() const {
    return std::isfinite(x1) && std::isfinite(x2) && std::isfinite(x3);
  }
};

inline BlochVector operator+(const BlochVector& a, const BlochVector& b) {
  return {a.x1 + b.x1, a.x2 + b.x2, a.x3 + b.x3};
}
inline BlochVector operator-(const BlochVector& a, const BlochVector& b) {
  return {a.x1 - b.x1, a.x2 - b.x2, a.x3 - b.x3};
}
inline BlochVector operator-(const BlochVector& a) { return {-a.x1, -a.x2, -a.x3}; }
inline BlochVector operator*(double s, const BlochVector& a) {
  return {s * a.x1, s * a.x2, s * a.x3};
}
inline BlochVector operator*(const BlochVector& a, double s) { return s * a; }

inline BlochVector axis_x1() { return {1.0, 0.0, 0.0}; }
inline BlochVector axis_x2() { return {0.0, 1.0, 0.0}; }
inline BlochVector axis_x3() { return {0.0, 0.0, 1.0}; }

// Checks the unit-norm requirement for vectors used as directions.
inline BlochVector require_direction(const BlochVector& v, const char* who) {
  if (!v.finite() || std::abs(v.norm() - 1.0) > kAlgebraTol) {
    throw std::invalid_argument(std::string(who) + ": direction must be a unit vector");
  }
  return v;
}

struct QubitState {
  BlochVector r;

  QubitState() = default;
  explicit QubitState(const BlochVector& bloch) : r(bloch) {
    if (!r.finite() || r.norm() > 1.0 + kAlgebraTol) {
      throw std::invalid_argument("QubitState: Bloch vector must lie in the unit ball");
    }
  }

  double purity() const { return 0.5 * (1.0 + r.dot(r)); }

  // Shrinks a pure direction to the requested purity in [1/2, 1].
  static QubitState along(const BlochVector& direction, double purity = 1.0) {
    if (purity < 0.5 - kAlgebraTol || purity > 1.0 + kAlgebraTol) {
      throw std::invalid_argument("QubitState::along: purity must lie in [1/2, 1]");
    }
    const double len = std::sqrt(std::max(0.0, 2.0 * purity - 1.0));
    return QubitState(len * require_direction(direction, "QubitState::along"));
  }
};

struct Effect {
  double c0 = 0.0;
  BlochVector c;

  double trace() const { return c0; }
  double min_eigenvalue() const { return 0.5 * (c0 - c.norm()); }
  double max_eigenvalue() const { return 0.5 * (c0 + c.norm()); }
  Effect complement() const { return {2.0 - c0, -c}; }

  bool is_valid(double tol = kAlgebraTol) const {
    return c.finite() && std::isfinite(c0) && c0 >= c.norm() - tol &&
           (2.0 - c0) >= c.norm() - tol;
  }
  void validate(double tol = kAlgebraTol) const {
    if (!is_valid(tol)) throw std::invalid_argument("Effect: PSD constraints violated");
  }

  static Effect identity() { return {2.0, {}}; }
  static Effect zero() { return {0.0, {}}; }
};

inline Effect operator+(const Effect& a, const Effect& b) { return {a.c0 + b.c0, a.c + b.c}; }
inline Effect operator-(const Effect& a, const Effect& b) { return {a.c0 - b.c0, a.c - b.c}; }
inline Effect operator*(double s, const Effect& a) { return {s * a.c0, s * a.c}; }

// tr[E F] for two effects in Bloch form.
inline double effect_overlap(const Effect& a, const Effect& b) {
  return 0.5 * (a.c0 * b.c0 + a.c.dot(b.c));
}

// Unbiased dichotomic measurement: effects (I +/- visibility * axis.sigma)/2.
struct DichotomicMeasurement {
  BlochVector axis;
  double visibility = 1.0;

  DichotomicMeasurement(const BlochVector& direction, double vis)
      : axis(require_direction(direction, "DichotomicMeasurement")), visibility(vis) {
    if (!(vis >= 0.0 && vis <= 1.0)) {
      throw std::invalid_argument("DichotomicMeasurement: visibility must lie in [0,1]");
    }
  }

  Effect effect(int outcome) const {
    if (outcome != 1 && outcome != -1) {
      throw std::invalid_argument("DichotomicMeasurement::effect: outcome must be +1 or -1");
    }
    return {1.0, (outcome * visibility) * axis};
  }
};

inline double born_probability(const QubitState& state, const DichotomicMeasurement& meas,
                               int outcome) {
  if (outcome != 1 && outcome != -1) {
    throw std::invalid_argument("born_probability: outcome must be +1 or -1");
  }
  return 0.5 * (1.0 + outcome * meas.visibility * state.r.dot(meas.axis));
}

// Mixes a projective measurement with the uniform trivial one; the result
// keeps the axis and carries the requested visibility.
inline DichotomicMeasurement mix_with_trivial(const DichotomicMeasurement& meas,
                                              double visibility) {
  if (std::abs(meas.visibility - 1.0) > kAlgebraTol) {
    throw std::invalid_argument("mix_with_trivial: input must be projective (visibility 1)");
  }
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("mix_with_trivial: visibility must lie in [0,1]");
  }
  return DichotomicMeasurement(meas.axis, visibility);
}

enum class Partition { a, b };

inline const char* partition_name(Partition k) { return k == Partition::a ? "a" : "b"; }

// The four pure preparation states: +/- the two diagonal axes
// (e1 +/- e2)/sqrt(2), labeled (sign | partition).
struct CanonicalStates {
  QubitState plus_a, minus_a, plus_b, minus_b;

  const QubitState& at(Partition k, int sign) const {
    if (sign != 1 && sign != -1) {
      throw std::invalid_argument("CanonicalStates::at: sign must be +1 or -1");
    }
    if (k == Partition::a) return sign == 1 ? plus_a : minus_a;
    return sign == 1 ? plus_b : minus_b;
  }
};

inline BlochVector canonical_axis(Partition k) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  return k == Partition::a ? BlochVector{inv_sqrt2, inv_sqrt2, 0.0}
                           : BlochVector{inv_sqrt2, -inv_sqrt2, 0.0};
}

inline CanonicalStates canonical_ensemble_states(double purity = 1.0) {
  return {QubitState::along(canonical_axis(Partition::a), purity),
          QubitState::along(-canonical_axis(Partition::a), purity),
          QubitState::along(canonical_axis(Partition::b), purity),
          QubitState::along(-canonical_axis(Partition::b), purity)};
}

// Pair of unbiased measurements with axes in the x1-x2 plane, symmetric
// about x1 at half-angle theta.  theta = 0 and pi/2 are permitted as
// degenerate (compatible) endpoints.
inline std::pair<DichotomicMeasurement, DichotomicMeasurement> symmetric_pair(
    double theta, double gamma_a, double gamma_b) {
  if (!(theta >= -kAlgebraTol && theta <= std::numbers::pi / 2 + kAlgebraTol)) {
    throw std::invalid_argument("symmetric_pair: theta must lie in [0, pi/2]");
  }
  const double ct = std::cos(theta), st = std::sin(theta);
  return {DichotomicMeasurement({ct, st, 0.0}, gamma_a),
          DichotomicMeasurement({ct, -st, 0.0}, gamma_b)};
}

// Projective pair at fixed opening angle pi/2, tilted out of the x1-x2
// plane by rotating both axes around x1 by phi.
inline std::pair<DichotomicMeasurement, DichotomicMeasurement> tilted_pair(double phi) {
  if (!(phi >= -std::numbers::pi - kAlgebraTol && phi <= std::numbers::pi + kAlgebraTol)) {
    throw std::invalid_argument("tilted_pair: phi must lie in [-pi, pi]");
  }
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double cp = std::cos(phi), sp = std::sin(phi);
  return {DichotomicMeasurement({inv_sqrt2, inv_sqrt2 * cp, inv_sqrt2 * sp}, 1.0),
          DichotomicMeasurement({inv_sqrt2, -inv_sqrt2 * cp, -inv_sqrt2 * sp}, 1.0)};
}

using Ket = std::array<std::complex<double>, 2>;

inline QubitState ket_to_state(const Ket& amplitudes) {
  const std::complex<double> h = amplitudes[0], v = amplitudes[1];
  const double norm2 = std::norm(h) + std::norm(v);
  if (!(std::abs(norm2 - 1.0) <= kInputTol)) {
    throw std::invalid_argument("ket_to_state: amplitudes must be normalized");
  }
  const std::complex<double> cross = std::conj(h) * v;
  return QubitState({2.0 * cross.real(), 2.0 * cross.imag(), std::norm(h) - std::norm(v)});
}

// Inverse of ket_to_state on pure states, global phase fixed so the
// horizontal amplitude is real and nonnegative.
inline Ket state_to_ket(const QubitState& state) {
  if (std::abs(state.r.norm() - 1.0) > kInputTol) {
    throw std::invalid_argument("state_to_ket: state must be pure");
  }
  const double polar = std::acos(std::clamp(state.r.x3, -1.0, 1.0));
  const double azimuth = std::atan2(state.r.x2, state.r.x1);
  return {std::complex<double>(std::cos(0.5 * polar), 0.0),
          std::polar(std::sin(0.5 * polar), azimuth)};
}

// Preparation/measurement basis ket (|H> + z e^{+/- i theta} |V>)/sqrt(2);
// partition a carries the +theta phase, partition b the -theta phase.
inline Ket symmetric_basis_ket(int sign, Partition k, double theta) {
  if (sign != 1 && sign != -1) {
    throw std::invalid_argument("symmetric_basis_ket: sign must be +1 or -1");
  }
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double phase = (k == Partition::a) ? theta : -theta;
  return {std::complex<double>(inv_sqrt2, 0.0),
          double(sign) * std::polar(inv_sqrt2, phase)};
}

// Basis kets of the tilted projective pair; amplitude split
// w(phi) = (1 + z sin(phi)/sqrt(2))/2 and phase arctan(cos(phi)).
inline Ket tilted_basis_ket(int sign, Partition k, double phi) {
  if (sign != 1 && sign != -1) {
    throw std::invalid_argument("tilted_basis_ket: sign must be +1 or -1");
  }
  const double w = 0.5 * (1.0 + sign * std::sin(phi) / std::numbers::sqrt2);
  const double phase = std::atan(std::cos(phi));
  if (k == Partition::a) {
    return {std::complex<double>(std::sqrt(w), 0.0),
            double(sign) * std::polar(std::sqrt(1.0 - w), phase)};
  }
  return {std::complex<double>(std::sqrt(1.0 - w), 0.0),
          double(sign) * std::polar(std::sqrt(w), -phase)};
}

}  // namespace qincompat
