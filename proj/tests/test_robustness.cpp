#include "qincompat/robustness.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <random>

using namespace qincompat;
using Catch::Approx;

namespace {

constexpr double kEtaMax = 0.85355339059327373;  // (2+sqrt(2))/4

// Independent dense-sweep oracle for the geometric maximization: walk the
// disk boundary and intersect the noise segment with the unit square by
// direct bisection on the l1 norm.
double sweep_oracle(const BlochVector& a, int points = 100001) {
  double best = 0.0;
  for (int i = 0; i < points; ++i) {
    const double phi = 0.5 * std::numbers::pi +
                       1.5 * std::numbers::pi * static_cast<double>(i) / (points - 1);
    const BlochVector c{std::cos(phi), std::sin(phi), 0.0};
    // largest eta with |eta a + (1-eta) c|_1 <= 1, found by bisection
    auto inside = [&](double eta) { return (eta * a + (1.0 - eta) * c).norm1() <= 1.0; };
    if (!inside(0.0)) {
      // convex along the segment: if neither endpoint is inside, scan for a
      // feasible interior point first
      double lo = -1.0;
      for (int k = 1; k < 64; ++k) {
        if (inside(k / 64.0)) {
          lo = k / 64.0;
          break;
        }
      }
      if (lo < 0.0) continue;
      double hi = 1.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (inside(mid) ? lo : hi) = mid;
      }
      best = std::max(best, lo);
      continue;
    }
    double lo = 0.0, hi = 1.0;
    if (inside(1.0)) {
      best = std::max(best, 1.0);
      continue;
    }
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (inside(mid) ? lo : hi) = mid;
    }
    best = std::max(best, lo);
  }
  return best;
}

}  // namespace

TEST_CASE("eta_closed_form reference points") {
  CHECK(eta_closed_form(std::numbers::pi / 4, 1.0).eta == Approx(kEtaMax).margin(1e-15));
  CHECK(eta_closed_form(std::numbers::pi / 4, 1.0 / std::numbers::sqrt2).eta == 1.0);
  CHECK(eta_closed_form(std::numbers::pi / 2, 1.0).eta == 1.0);
  CHECK(eta_closed_form(0.0, 1.0).eta == 1.0);  // degenerate coinciding pair

  CHECK_THROWS_AS(eta_closed_form(2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_closed_form(0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_closed_form(0.5, 1.2), std::invalid_argument);
}

TEST_CASE("eta_geometric matches the dense sweep oracle") {
  const BlochVector a_max{1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2, 0.0};
  const RobustnessResult r = eta_geometric(a_max);
  CHECK(r.eta == Approx(kEtaMax).margin(1e-9));
  REQUIRE(r.optimizer.has_value());
  CHECK(r.optimizer->angle == Approx(1.25 * std::numbers::pi).margin(1e-3));
  CHECK(sweep_oracle(a_max) == Approx(r.eta).margin(1e-9));

  // inside the square: already compatible
  const RobustnessResult inside = eta_geometric(BlochVector{0.45, 0.45, 0.0});
  CHECK(inside.eta == 1.0);

  CHECK_THROWS_AS(eta_geometric(BlochVector{1.2, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(eta_geometric(BlochVector{0.5, 0.5, 0.3}), std::invalid_argument);
}

TEST_CASE("eta_geometric equals eta_closed_form on the grid") {
  for (int th_deg = 5; th_deg <= 85; th_deg += 5) {
    for (int g10 = 1; g10 <= 10; ++g10) {
      const double theta = th_deg * std::numbers::pi / 180.0;
      const double gamma = 0.1 * g10;
      const BlochVector a{gamma * std::cos(theta), gamma * std::sin(theta), 0.0};
      INFO("theta=" << th_deg << " gamma=" << gamma);
      CHECK(eta_geometric(a).eta == Approx(eta_closed_form(theta, gamma).eta).margin(1e-9));
    }
  }
}

TEST_CASE("canonicalize_pair") {
  // tilted pairs canonicalize to (pi/4, 1) independently of phi
  for (int i = 0; i <= 18; ++i) {
    const double phi = -std::numbers::pi / 2 + i * std::numbers::pi / 18;
    const auto [a, b] = tilted_pair(phi);
    const CanonicalPair c = canonicalize_pair(a, b);
    CHECK(std::abs(c.theta - std::numbers::pi / 4) < 1e-12);
    CHECK(c.gamma == 1.0);
    CHECK_FALSE(c.degenerate);
  }

  const auto [as, bs] = symmetric_pair(0.4, 0.9, 0.9);
  const CanonicalPair cs = canonicalize_pair(as, bs);
  CHECK(cs.theta == Approx(0.4).margin(1e-12));
  CHECK(cs.gamma == Approx(0.9));

  // axes at 60 degrees -> half-angle 30 degrees
  const DichotomicMeasurement a60(axis_x1(), 0.9);
  const DichotomicMeasurement b60({0.5, std::sqrt(3.0) / 2.0, 0.0}, 0.9);
  CHECK(canonicalize_pair(a60, b60).theta == Approx(std::numbers::pi / 6).margin(1e-12));

  // degenerate parallel axes report compatibility
  const DichotomicMeasurement p1(axis_x1(), 0.8), p2(axis_x1(), 0.8);
  const CanonicalPair cp = canonicalize_pair(p1, p2);
  CHECK(cp.degenerate);
  CHECK(eta_closed_form(cp.theta, cp.gamma).eta == 1.0);
  const DichotomicMeasurement anti(-1.0 * axis_x1(), 0.8);
  const CanonicalPair ca = canonicalize_pair(p1, anti);
  CHECK(ca.degenerate);
  CHECK(eta_closed_form(ca.theta, ca.gamma).eta == 1.0);

  CHECK_THROWS_AS(canonicalize_pair(DichotomicMeasurement(axis_x1(), 0.9),
                                    DichotomicMeasurement(axis_x2(), 0.5)),
                  std::invalid_argument);
}

TEST_CASE("chi_bound") {
  const double m = 0.5 * (1.0 + 1.0 / std::numbers::sqrt2);
  CHECK(chi_bound(m, 1.0) == Approx(kEtaMax).margin(1e-15));
  CHECK(chi_bound(0.7, 0.7) == 1.0);
  CHECK_THROWS_AS(chi_bound(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(chi_bound(0.0, 0.5), std::invalid_argument);

  // Born-rule P oracle path at theta=30deg, gamma=0.8 against the closed form
  const double theta = std::numbers::pi / 6, gamma = 0.8;
  const double p = 0.5 + gamma * (std::cos(theta) + std::sin(theta)) /
                             (2.0 * std::numbers::sqrt2);
  const double chi = chi_bound(m, p);
  const double expected = (std::numbers::sqrt2 + 1.0) /
                          (std::numbers::sqrt2 + gamma * (std::cos(theta) + std::sin(theta)));
  CHECK(chi == Approx(expected).margin(1e-12));
}

TEST_CASE("ir accessor") {
  CHECK(ir_from_eta(1.0) == Approx(0.0));
  CHECK(ir_from_eta(0.5) == Approx(1.0));
  CHECK_THROWS_AS(ir_from_eta(0.0), std::invalid_argument);
}

TEST_CASE("eta_bisection matches the closed form") {
  const auto [a, b] = symmetric_pair(std::numbers::pi / 4, 1.0, 1.0);
  const RobustnessResult r = eta_bisection(a, b);
  CHECK(r.eta == Approx(kEtaMax).margin(1e-3));
  CHECK(r.method == RobustnessMethod::bisection);

  // compatible pair: exactly 1
  const auto [ac, bc] = symmetric_pair(std::numbers::pi / 4, 0.6, 0.6);
  CHECK(eta_bisection(ac, bc).eta == 1.0);

  // a couple of grid points with moderate noise
  for (const auto& [th_deg, gamma] : {std::pair{30, 0.9}, std::pair{60, 0.95}}) {
    const double theta = th_deg * std::numbers::pi / 180.0;
    const auto [ag, bg] = symmetric_pair(theta, gamma, gamma);
    INFO("theta=" << th_deg << " gamma=" << gamma);
    CHECK(eta_bisection(ag, bg).eta == Approx(eta_closed_form(theta, gamma).eta).margin(1e-3));
  }
}

TEST_CASE("eta_bisection on unequal visibilities respects the ratio bound") {
  // theta = pi/4, alpha = 1, beta = 0.5: the bound uses the mean visibility
  const auto [a, b] = symmetric_pair(std::numbers::pi / 4, 1.0, 0.5);
  const double gamma_bar = 0.75;
  const double chi = (std::numbers::sqrt2 + 1.0) /
                     (std::numbers::sqrt2 + gamma_bar * std::numbers::sqrt2);
  const RobustnessResult r = eta_bisection(a, b);
  CHECK(r.eta <= chi + 2e-3);
  CHECK(r.eta > 0.0);
  CHECK(r.eta <= 1.0);
}

TEST_CASE("eta_bisection upper-bounded by chi on random unbiased pairs") {
  // 500 random pairs: the ratio bound with the canonical ensemble always
  // dominates the robustness (within bisection tolerance).
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double m = 0.5 * (1.0 + 1.0 / std::numbers::sqrt2);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const double theta = (0.05 + 0.9 * u(gen)) * std::numbers::pi / 2;
    const double alpha = 0.05 + 0.95 * u(gen);
    const double beta = 0.05 + 0.95 * u(gen);
    const auto [a, b] = symmetric_pair(theta, alpha, beta);
    const double p = 0.5 + (alpha + beta) * (std::cos(theta) + std::sin(theta)) /
                               (4.0 * std::numbers::sqrt2);
    const double chi = chi_bound(m, p);
    const RobustnessResult r = eta_bisection(a, b);
    INFO("theta=" << theta << " alpha=" << alpha << " beta=" << beta);
    CHECK(r.eta <= chi + 2e-3);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("rotation invariance through canonicalization") {
  // canonical parameters of the tilted family are literally phi-independent
  const CanonicalPair ref = canonicalize_pair(tilted_pair(0.0).first, tilted_pair(0.0).second);
  for (int i = 0; i <= 180; ++i) {
    const double phi = -std::numbers::pi / 2 + i * std::numbers::pi / 180.0;
    const auto [a, b] = tilted_pair(phi);
    const CanonicalPair c = canonicalize_pair(a, b);
    CHECK(std::abs(c.theta - ref.theta) < 1e-12);
    CHECK(c.gamma == ref.gamma);
  }
}
