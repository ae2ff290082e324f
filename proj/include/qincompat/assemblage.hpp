#pragma once

// Measurement assemblages over the four-label fiber bundle
// {+a, -a, +b, -b} -> {a, b} and their symmetrization under the Klein
// four-group of 180-degree rotations about the frame axes, acting by
// label permutation plus Pauli conjugation.  The group average of any
// normalized assemblage is covariant: unbiased effects with mirror
// symmetric in-plane vectors.

#include <array>

#include "qincompat/bloch.hpp"

namespace qincompat {

enum class FiberLabel : int { plus_a = 0, minus_a = 1, plus_b = 2, minus_b = 3 };

inline Partition fiber_base(FiberLabel z) {
  return (static_cast<int>(z) < 2) ? Partition::a : Partition::b;
}
inline int fiber_sign(FiberLabel z) { return (static_cast<int>(z) % 2 == 0) ? 1 : -1; }
inline FiberLabel make_fiber_label(Partition k, int sign) {
  if (sign != 1 && sign != -1) {
    throw std::invalid_argument("make_fiber_label: sign must be +1 or -1");
  }
  return static_cast<FiberLabel>((k == Partition::a ? 0 : 2) + (sign == 1 ? 0 : 1));
}

struct DihedralElement {
  // Klein four-group: identity plus the 180-degree rotations about the
  // three frame axes; composition is XOR on the two-bit tag.
  enum class Tag : int { identity = 0, r1 = 1, r2 = 2, r3 = 3 };
  Tag tag = Tag::identity;

  int pauli_index() const { return static_cast<int>(tag); }

  FiberLabel apply(FiberLabel z) const {
    static constexpr int kPerm[4][4] = {
        {0, 1, 2, 3},  // identity
        {2, 3, 0, 1},  // r1: +a<->+b, -a<->-b
        {3, 2, 1, 0},  // r2: +a<->-b, -a<->+b
        {1, 0, 3, 2},  // r3: +a<->-a, +b<->-b
    };
    return static_cast<FiberLabel>(kPerm[static_cast<int>(tag)][static_cast<int>(z)]);
  }

  BlochVector rotate(const BlochVector& v) const {
    switch (tag) {
      case Tag::identity: return v;
      case Tag::r1: return {v.x1, -v.x2, -v.x3};
      case Tag::r2: return {-v.x1, v.x2, -v.x3};
      case Tag::r3: return {-v.x1, -v.x2, v.x3};
    }
    return v;
  }

  DihedralElement inverse() const { return *this; }

  static DihedralElement compose(DihedralElement g, DihedralElement h) {
    return {static_cast<Tag>(static_cast<int>(g.tag) ^ static_cast<int>(h.tag))};
  }

  static std::array<DihedralElement, 4> group() {
    return {DihedralElement{Tag::identity}, DihedralElement{Tag::r1},
            DihedralElement{Tag::r2}, DihedralElement{Tag::r3}};
  }
};

struct MeasurementAssemblage {
  std::array<Effect, 4> effects{};  // indexed by FiberLabel

  const Effect& effect(FiberLabel z) const { return effects[static_cast<size_t>(static_cast<int>(z))]; }
  Effect& effect(FiberLabel z) { return effects[static_cast<size_t>(static_cast<int>(z))]; }

  // Per-fiber normalization: the two effects over each base point sum to
  // the identity, and every effect is PSD.
  void validate(double tol = kInputTol) const {
    for (const Effect& e : effects) {
      if (e.min_eigenvalue() < -tol) {
        throw std::invalid_argument("MeasurementAssemblage: effect not PSD");
      }
    }
    for (Partition k : {Partition::a, Partition::b}) {
      const Effect sum =
          effect(make_fiber_label(k, 1)) + effect(make_fiber_label(k, -1));
      const Effect dev = sum - Effect::identity();
      if (0.5 * (std::abs(dev.c0) + dev.c.norm()) > tol) {
        throw std::invalid_argument("MeasurementAssemblage: fiber not normalized");
      }
    }
  }

  static MeasurementAssemblage from_pair(const DichotomicMeasurement& a,
                                         const DichotomicMeasurement& b) {
    MeasurementAssemblage m;
    m.effect(FiberLabel::plus_a) = a.effect(1);
    m.effect(FiberLabel::minus_a) = a.effect(-1);
    m.effect(FiberLabel::plus_b) = b.effect(1);
    m.effect(FiberLabel::minus_b) = b.effect(-1);
    return m;
  }

  // Covariant fixture: unbiased effects with vectors of length nu at
  // in-plane angle varphi, mirror symmetric about the first axis.
  static MeasurementAssemblage covariant(double nu, double varphi) {
    if (!(nu >= 0.0 && nu <= 1.0)) {
      throw std::invalid_argument("MeasurementAssemblage::covariant: nu must lie in [0,1]");
    }
    const BlochVector c{nu * std::cos(varphi), nu * std::sin(varphi), 0.0};
    const BlochVector d{nu * std::cos(varphi), -nu * std::sin(varphi), 0.0};
    MeasurementAssemblage m;
    m.effect(FiberLabel::plus_a) = {1.0, c};
    m.effect(FiberLabel::minus_a) = {1.0, -c};
    m.effect(FiberLabel::plus_b) = {1.0, d};
    m.effect(FiberLabel::minus_b) = {1.0, -d};
    return m;
  }
};

inline MeasurementAssemblage symmetrize(const MeasurementAssemblage& in) {
  MeasurementAssemblage out;
  for (int zi = 0; zi < 4; ++zi) {
    const FiberLabel z = static_cast<FiberLabel>(zi);
    double c0 = 0.0;
    BlochVector c{};
    for (const DihedralElement& g : DihedralElement::group()) {
      const Effect& src = in.effect(g.inverse().apply(z));
      c0 += src.c0;
      c = c + g.rotate(src.c);
    }
    out.effect(z) = Effect{0.25 * c0, 0.25 * c};
  }
  return out;
}

}  // namespace qincompat
