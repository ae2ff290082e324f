#pragma once

// State discrimination with intermediate information: partitioned
// ensembles, the exact success probability, the compatible-pair guessing
// bound M (solved through its discrimination dual with a certified primal
// witness), and a seedable Monte Carlo simulator of the preparation /
// intermediate-information / measurement protocol.

#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qincompat/assemblage.hpp"
#include "qincompat/bloch.hpp"
#include "qincompat/compat.hpp"
#include "qincompat/detail/linalg.hpp"
#include "qincompat/rng.hpp"

namespace qincompat {

struct PartitionedEnsemble {
  std::array<QubitState, 4> states{};   // FiberLabel order: +a, -a, +b, -b
  std::array<double, 4> label_probs{};  // conditional probabilities p(z|k)
  double q_a = 0.5;
  double q_b = 0.5;

  const QubitState& state(Partition k, int sign) const {
    return states[static_cast<size_t>(static_cast<int>(make_fiber_label(k, sign)))];
  }
  double label_prob(Partition k, int sign) const {
    return label_probs[static_cast<size_t>(static_cast<int>(make_fiber_label(k, sign)))];
  }
  double partition_prob(Partition k) const { return k == Partition::a ? q_a : q_b; }

  void validate(double tol = kAlgebraTol) const {
    for (double p : label_probs) {
      if (!(p >= -tol)) throw std::invalid_argument("PartitionedEnsemble: negative probability");
    }
    if (!(q_a >= -tol && q_b >= -tol) || std::abs(q_a + q_b - 1.0) > tol) {
      throw std::invalid_argument("PartitionedEnsemble: partition probabilities must sum to 1");
    }
    if (std::abs(label_probs[0] + label_probs[1] - 1.0) > tol ||
        std::abs(label_probs[2] + label_probs[3] - 1.0) > tol) {
      throw std::invalid_argument("PartitionedEnsemble: label probabilities must sum to 1");
    }
  }

  // Uniform probabilities over the four canonical diagonal states.
  static PartitionedEnsemble canonical(double purity = 1.0) {
    const CanonicalStates s = canonical_ensemble_states(purity);
    PartitionedEnsemble en;
    en.states = {s.plus_a, s.minus_a, s.plus_b, s.minus_b};
    en.label_probs = {0.5, 0.5, 0.5, 0.5};
    return en;
  }
};

inline double success_probability_exact(const PartitionedEnsemble& en,
                                        const DichotomicMeasurement& meas_a,
                                        const DichotomicMeasurement& meas_b) {
  en.validate(kInputTol);
  double p = 0.0;
  for (Partition k : {Partition::a, Partition::b}) {
    const DichotomicMeasurement& m = (k == Partition::a) ? meas_a : meas_b;
    for (int z : {1, -1}) {
      p += en.partition_prob(k) * en.label_prob(k, z) * born_probability(en.state(k, z), m, z);
    }
  }
  return p;
}

// Sensitivity of the success probability to the two visibilities (it is
// linear in each); used to propagate configured visibility jitter.
inline std::pair<double, double> success_probability_visibility_slopes(
    const PartitionedEnsemble& en, const DichotomicMeasurement& meas_a,
    const DichotomicMeasurement& meas_b) {
  double da = 0.0, db = 0.0;
  for (int z : {1, -1}) {
    da += en.partition_prob(Partition::a) * en.label_prob(Partition::a, z) * 0.5 *
          en.state(Partition::a, z).r.dot(meas_a.axis) * z;
    db += en.partition_prob(Partition::b) * en.label_prob(Partition::b, z) * 0.5 *
          en.state(Partition::b, z).r.dot(meas_b.axis) * z;
  }
  return {da, db};
}

// Closed-form guessing bound for the canonical ensemble (external result,
// cross-checked against guessing_bound_M in the tests).
inline double canonical_guessing_bound() { return 0.5 * (1.0 + 1.0 / std::numbers::sqrt2); }

struct GuessingBound {
  double value = 0.0;           // dual optimum
  double gap = 0.0;             // dual minus primal witness value
  std::array<Effect, 4> witness{};  // optimal POVM over outcome pairs (order ++, +-, -+, --)
  int iterations = 0;
};

namespace detail {

struct MaxBallProblem {
  // minimize over y of max_i ( alpha[i] + |y - p[i]| )
  std::array<double, 4> alpha{};
  std::array<BlochVector, 4> p{};

  double eval(const BlochVector& y) const {
    double worst = -1e300;
    for (int i = 0; i < 4; ++i) {
      worst = std::max(worst, alpha[static_cast<size_t>(i)] + (y - p[static_cast<size_t>(i)]).norm());
    }
    return worst;
  }
};

inline BlochVector cross(const BlochVector& a, const BlochVector& b) {
  return {a.x2 * b.x3 - a.x3 * b.x2, a.x3 * b.x1 - a.x1 * b.x3, a.x1 * b.x2 - a.x2 * b.x1};
}

// Diminishing-step subgradient descent; coarse globalizer for the dual.
inline BlochVector subgradient_descent(const MaxBallProblem& prob, int iters, double step) {
  BlochVector y = 0.25 * (prob.p[0] + prob.p[1] + prob.p[2] + prob.p[3]);
  BlochVector best_y = y;
  double best_f = prob.eval(y);
  for (int t = 1; t <= iters; ++t) {
    int arg = 0;
    double worst = -1e300;
    for (int i = 0; i < 4; ++i) {
      const double v = prob.alpha[static_cast<size_t>(i)] + (y - prob.p[static_cast<size_t>(i)]).norm();
      if (v > worst) {
        worst = v;
        arg = i;
      }
    }
    const BlochVector d = y - prob.p[static_cast<size_t>(arg)];
    const double dn = d.norm();
    if (dn > 1e-15) y = y - (step / std::sqrt(double(t)) / dn) * d;
    const double f = prob.eval(y);
    if (f < best_f) {
      best_f = f;
      best_y = y;
    }
  }
  return best_y;
}

// Exact candidates from every support subset.  Squaring the pairwise
// equalities alpha_i + |y - p_i| = v makes them linear in (y, t) with
// t = v - alpha_0, so within each subset y(t) is an affine line and
// |y(t) - p_0| = t reduces to a quadratic in t.
inline std::vector<BlochVector> support_candidates(const MaxBallProblem& prob,
                                                   const BlochVector& seed) {
  std::vector<BlochVector> cands;
  cands.push_back(seed);
  for (int i = 0; i < 4; ++i) cands.push_back(prob.p[static_cast<size_t>(i)]);

  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const BlochVector diff = prob.p[static_cast<size_t>(j)] - prob.p[static_cast<size_t>(i)];
      const double d = diff.norm();
      if (d < 1e-14) continue;
      const double v = 0.5 * (prob.alpha[static_cast<size_t>(i)] + prob.alpha[static_cast<size_t>(j)] + d);
      if (v + 1e-15 < prob.alpha[static_cast<size_t>(i)] || v + 1e-15 < prob.alpha[static_cast<size_t>(j)]) continue;
      cands.push_back(prob.p[static_cast<size_t>(i)] + ((v - prob.alpha[static_cast<size_t>(i)]) / d) * diff);
    }
  }

  // roots of (|qa|^2 - 1) t^2 + 2 (qa.qb) t + |qb|^2 = 0 with distance
  // feasibility t >= max(0, kappa_j)
  auto push_roots = [&cands](const BlochVector& p0, const BlochVector& qa, const BlochVector& qb,
                             double kappa_max) {
    const double a = qa.dot(qa) - 1.0;
    const double b = 2.0 * qa.dot(qb);
    const double c = qb.dot(qb);
    std::array<double, 2> roots{};
    int nroots = 0;
    if (std::abs(a) < 1e-14) {
      if (std::abs(b) > 1e-300) roots[static_cast<size_t>(nroots++)] = -c / b;
    } else {
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
        if (std::abs(a) > 1e-300) roots[static_cast<size_t>(nroots++)] = q / a;
        if (std::abs(q) > 1e-300) roots[static_cast<size_t>(nroots++)] = c / q;
      }
    }
    for (int r = 0; r < nroots; ++r) {
      const double t = roots[static_cast<size_t>(r)];
      if (!(std::isfinite(t)) || t < std::max(0.0, kappa_max) - 1e-12) continue;
      cands.push_back(p0 + t * qa + qb);
    }
  };

  // |S| = 3: y restricted to the affine plane of the triple
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        const BlochVector p0 = prob.p[static_cast<size_t>(i)];
        const BlochVector u1 = prob.p[static_cast<size_t>(j)] - p0;
        const BlochVector u2 = prob.p[static_cast<size_t>(k)] - p0;
        if (cross(u1, u2).norm() < 1e-13) continue;  // collinear: pairs cover it
        const double k1 = prob.alpha[static_cast<size_t>(j)] - prob.alpha[static_cast<size_t>(i)];
        const double k2 = prob.alpha[static_cast<size_t>(k)] - prob.alpha[static_cast<size_t>(i)];
        const double e1 = 0.5 * (u1.dot(u1) - k1 * k1);
        const double e2 = 0.5 * (u2.dot(u2) - k2 * k2);
        const double g11 = u1.dot(u1), g12 = u1.dot(u2), g22 = u2.dot(u2);
        const double det = g11 * g22 - g12 * g12;
        if (std::abs(det) < 1e-16) continue;
        // (s, r) = Ginv * (t kappa + e): split into the t-slope and offset
        const double sa = (g22 * k1 - g12 * k2) / det, sb = (g22 * e1 - g12 * e2) / det;
        const double ra = (g11 * k2 - g12 * k1) / det, rb = (g11 * e2 - g12 * e1) / det;
        push_roots(p0, sa * u1 + ra * u2, sb * u1 + rb * u2, std::max(k1, k2));
      }
    }
  }

  // |S| = 4: full space
  {
    const BlochVector p0 = prob.p[0];
    const BlochVector u1 = prob.p[1] - p0, u2 = prob.p[2] - p0, u3 = prob.p[3] - p0;
    const double k1 = prob.alpha[1] - prob.alpha[0];
    const double k2 = prob.alpha[2] - prob.alpha[0];
    const double k3 = prob.alpha[3] - prob.alpha[0];
    std::vector<double> mat = {u1.x1, u1.x2, u1.x3, u2.x1, u2.x2,
                               u2.x3, u3.x1, u3.x2, u3.x3};
    const std::vector<double> ev = {0.5 * (u1.dot(u1) - k1 * k1), 0.5 * (u2.dot(u2) - k2 * k2),
                                    0.5 * (u3.dot(u3) - k3 * k3)};
    try {
      const std::vector<double> qa = gauss_solve(mat, {k1, k2, k3});
      const std::vector<double> qb = gauss_solve(mat, ev);
      push_roots(p0, BlochVector{qa[0], qa[1], qa[2]}, BlochVector{qb[0], qb[1], qb[2]},
                 std::max({k1, k2, k3}));
    } catch (const std::runtime_error&) {
      // coplanar points: the triples cover this case
    }
  }
  return cands;
}

}  // namespace detail

// Maximal discrimination success probability over all compatible pairs.
// Solved through the minimum-error-discrimination dual
//   minimize tr Y  subject to  Y >= G(x,y),
// a four-parameter problem whose optimum is pinned by subset equalization
// after a subgradient warm start; a primal witness POVM certifies the
// value by weak duality.
inline GuessingBound guessing_bound_M(const PartitionedEnsemble& en, double gap_tol = 1e-6) {
  en.validate(kInputTol);

  detail::MaxBallProblem prob;
  int idx = 0;
  for (int x : {1, -1}) {
    for (int y : {1, -1}) {
      const double wa = en.partition_prob(Partition::a) * en.label_prob(Partition::a, x);
      const double wb = en.partition_prob(Partition::b) * en.label_prob(Partition::b, y);
      prob.alpha[static_cast<size_t>(idx)] = wa + wb;
      prob.p[static_cast<size_t>(idx)] =
          wa * en.state(Partition::a, x).r + wb * en.state(Partition::b, y).r;
      ++idx;
    }
  }

  const int subgradient_iters = 2000;
  const BlochVector seed = detail::subgradient_descent(prob, subgradient_iters, 0.25);

  BlochVector y_opt = seed;
  double dual = prob.eval(seed);
  for (const BlochVector& cand : detail::support_candidates(prob, seed)) {
    const double f = prob.eval(cand);
    if (f < dual) {
      dual = f;
      y_opt = cand;
    }
  }

  // Primal witness: active constraints have Y - G singular; their kernel
  // projectors carry the POVM weight.
  GuessingBound out;
  out.value = dual;
  out.iterations = subgradient_iters;

  std::vector<std::vector<double>> cols;
  std::vector<int> col_owner;
  for (int i = 0; i < 4; ++i) {
    const double fi = prob.alpha[static_cast<size_t>(i)] + (y_opt - prob.p[static_cast<size_t>(i)]).norm();
    if (fi < dual - 1e-8) continue;
    const BlochVector d = y_opt - prob.p[static_cast<size_t>(i)];
    const double d0 = dual - prob.alpha[static_cast<size_t>(i)];
    const double dn = d.norm();
    if (d0 < 1e-9) {
      // Y - G ~ 0: whole space is kernel, admit both eigenprojectors.
      const BlochVector e = (dn > 1e-13) ? (1.0 / dn) * d : axis_x3();
      cols.push_back({1.0, e.x1, e.x2, e.x3});
      col_owner.push_back(i);
      cols.push_back({1.0, -e.x1, -e.x2, -e.x3});
      col_owner.push_back(i);
    } else {
      const BlochVector e = (1.0 / dn) * d;
      cols.push_back({1.0, -e.x1, -e.x2, -e.x3});
      col_owner.push_back(i);
    }
  }
  const std::vector<double> weights = detail::nnls(cols, {2.0, 0.0, 0.0, 0.0});

  std::array<Effect, 4> witness{};
  for (std::size_t j = 0; j < cols.size(); ++j) {
    Effect& e = witness[static_cast<size_t>(col_owner[j])];
    e.c0 += weights[j] * cols[j][0];
    e.c = e.c + weights[j] * BlochVector{cols[j][1], cols[j][2], cols[j][3]};
  }
  if (!detail::normalize_sum(witness)) {
    throw SolverError("guessing_bound_M: witness normalization failed");
  }

  double primal = 0.0;
  idx = 0;
  for (int i = 0; i < 4; ++i) {
    const Effect g{prob.alpha[static_cast<size_t>(i)], prob.p[static_cast<size_t>(i)]};
    primal += effect_overlap(g, witness[static_cast<size_t>(i)]);
    ++idx;
  }
  out.gap = dual - primal;
  out.witness = witness;
  if (!(out.gap <= gap_tol && out.gap >= -1e-9)) {
    std::ostringstream msg;
    msg << "guessing_bound_M: duality gap " << out.gap << " exceeds tolerance " << gap_tol;
    throw SolverError(msg.str());
  }
  return out;
}

enum class NoiseMode { exact_visibility, phase_diffusion };

struct NoiseSpec {
  NoiseMode mode = NoiseMode::exact_visibility;
  double diffusion_width = 0.0;  // flat phase spread (radians)
  double jitter = 0.0;           // per-shot uniform visibility fluctuation half-width

  void validate() const {
    if (diffusion_width < 0.0) throw std::invalid_argument("NoiseSpec: negative diffusion width");
    if (jitter < 0.0 || jitter > 1.0) {
      throw std::invalid_argument("NoiseSpec: jitter must lie in [0,1]");
    }
  }

  static NoiseSpec exact(double jitter = 0.0) {
    return {NoiseMode::exact_visibility, 0.0, jitter};
  }
  static NoiseSpec diffusion(double width, double jitter = 0.0) {
    return {NoiseMode::phase_diffusion, width, jitter};
  }
};

// Visibility left after averaging a unit phase factor over a flat phase
// distribution of total width l: |sin(l/2) / (l/2)|.
inline double visibility_from_diffusion(double width) {
  if (width < 0.0) throw std::invalid_argument("visibility_from_diffusion: negative width");
  if (width == 0.0) return 1.0;
  return std::abs(std::sin(0.5 * width) / (0.5 * width));
}

struct CountsTable {
  // counts[label][0] = outcome +, counts[label][1] = outcome -.
  std::array<std::array<std::uint64_t, 2>, 4> counts{};
  std::uint64_t seed = 0;

  std::uint64_t shots_for(FiberLabel z) const {
    return counts[static_cast<size_t>(static_cast<int>(z))][0] + counts[static_cast<size_t>(static_cast<int>(z))][1];
  }
  std::uint64_t successes(FiberLabel z) const {
    return counts[static_cast<size_t>(static_cast<int>(z))][fiber_sign(z) == 1 ? 0 : 1];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts) t += row[0] + row[1];
    return t;
  }

  void merge(const CountsTable& other) {
    for (int i = 0; i < 4; ++i) {
      counts[static_cast<size_t>(i)][0] += other.counts[static_cast<size_t>(i)][0];
      counts[static_cast<size_t>(i)][1] += other.counts[static_cast<size_t>(i)][1];
    }
  }

  static const char* label_name(FiberLabel z) {
    static constexpr const char* kNames[4] = {"+|a", "-|a", "+|b", "-|b"};
    return kNames[static_cast<int>(z)];
  }

  std::string to_csv() const {
    std::string out = "prep_label,outcome,count,shots,seed\n";
    char line[128];
    for (int i = 0; i < 4; ++i) {
      const FiberLabel z = static_cast<FiberLabel>(i);
      for (int o = 0; o < 2; ++o) {
        std::snprintf(line, sizeof(line), "%s,%s,%llu,%llu,%llu\n", label_name(z),
                      o == 0 ? "+" : "-",
                      static_cast<unsigned long long>(counts[static_cast<size_t>(i)][static_cast<size_t>(o)]),
                      static_cast<unsigned long long>(shots_for(z)),
                      static_cast<unsigned long long>(seed));
        out += line;
      }
    }
    return out;
  }
};

namespace detail {

inline CountsTable run_protocol_stream(const PartitionedEnsemble& en,
                                       const DichotomicMeasurement& meas_a,
                                       const DichotomicMeasurement& meas_b,
                                       std::uint64_t shots, const NoiseSpec& noise,
                                       RngStream rng) {
  const double diffusion_factor = (noise.mode == NoiseMode::phase_diffusion)
                                      ? visibility_from_diffusion(noise.diffusion_width)
                                      : 1.0;
  const double base_vis_a = meas_a.visibility * diffusion_factor;
  const double base_vis_b = meas_b.visibility * diffusion_factor;

  CountsTable table;
  for (std::uint64_t s = 0; s < shots; ++s) {
    const Partition k = rng.uniform() < en.q_a ? Partition::a : Partition::b;
    const int z = rng.uniform() < en.label_prob(k, 1) ? 1 : -1;
    const FiberLabel label = make_fiber_label(k, z);
    double vis = (k == Partition::a) ? base_vis_a : base_vis_b;
    if (noise.jitter > 0.0) {
      vis = std::clamp(vis + rng.uniform(-noise.jitter, noise.jitter), 0.0, 1.0);
    }
    const BlochVector& axis = (k == Partition::a) ? meas_a.axis : meas_b.axis;
    const double p_plus = 0.5 * (1.0 + vis * en.state(k, z).r.dot(axis));
    const int outcome = rng.uniform() < p_plus ? 1 : -1;
    ++table.counts[static_cast<size_t>(static_cast<int>(label))][outcome == 1 ? 0 : 1];
  }
  return table;
}

}  // namespace detail

// Runs the protocol shot by shot: draw the partition, draw the label,
// prepare, measure with the designated measurement, record (label,
// outcome).  Deterministic for fixed (seed, workers); workers shard the
// shots across deterministically derived RNG streams and merge counts.
inline CountsTable run_protocol(const PartitionedEnsemble& en,
                                const DichotomicMeasurement& meas_a,
                                const DichotomicMeasurement& meas_b, std::uint64_t shots,
                                const NoiseSpec& noise, std::uint64_t seed, int workers = 1) {
  if (shots < 1) throw std::invalid_argument("run_protocol: shots must be >= 1");
  if (workers < 1) throw std::invalid_argument("run_protocol: workers must be >= 1");
  en.validate(kInputTol);
  noise.validate();

  CountsTable total;
  total.seed = seed;
  if (workers == 1) {
    total.merge(detail::run_protocol_stream(en, meas_a, meas_b, shots, noise,
                                            RngStream(seed, 0)));
    return total;
  }
  std::vector<std::future<CountsTable>> parts;
  const std::uint64_t base = shots / static_cast<std::uint64_t>(workers);
  const std::uint64_t extra = shots % static_cast<std::uint64_t>(workers);
  for (int w = 0; w < workers; ++w) {
    const std::uint64_t n = base + (static_cast<std::uint64_t>(w) < extra ? 1 : 0);
    if (n == 0) continue;
    parts.push_back(std::async(std::launch::async, [&, w, n]() {
      return detail::run_protocol_stream(en, meas_a, meas_b, n, noise,
                                         RngStream(seed, static_cast<std::uint64_t>(w)));
    }));
  }
  for (auto& f : parts) total.merge(f.get());
  return total;
}

struct SuccessEstimate {
  double p_hat = 0.0;
  double standard_error = 0.0;
};

// Ensemble-weighted sum of per-cell empirical success frequencies with
// binomial error propagation; extra_se (e.g. a jitter model term) is added
// in quadrature.
inline SuccessEstimate estimate_from_counts(const CountsTable& counts,
                                            const PartitionedEnsemble& en,
                                            double extra_se = 0.0) {
  en.validate(kInputTol);
  double p = 0.0, var = 0.0;
  for (int i = 0; i < 4; ++i) {
    const FiberLabel z = static_cast<FiberLabel>(i);
    const std::uint64_t n = counts.shots_for(z);
    if (n == 0) {
      throw std::invalid_argument(std::string("estimate_from_counts: empty cell ") +
                                  CountsTable::label_name(z));
    }
    const double w = en.partition_prob(fiber_base(z)) * en.label_prob(fiber_base(z), fiber_sign(z));
    const double f = static_cast<double>(counts.successes(z)) / static_cast<double>(n);
    p += w * f;
    var += w * w * f * (1.0 - f) / static_cast<double>(n);
  }
  return {p, std::sqrt(var + extra_se * extra_se)};
}

}  // namespace qincompat
