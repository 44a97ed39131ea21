#include <gtest/gtest.h>

#include "lcfield/ccr.hpp"
#include "lcfield/fit.hpp"
#include "support.hpp"

using namespace lcf;
using namespace lcf::testing;

namespace {

Lattice ccr_lattice(int N) { return square(N, 1.0, Boundary::periodic, 5 * N / 2, 0.4); }

PolyBump pb(double t, double x, double wt, double wx) { return PolyBump{{t, x, 0}, {wt, wx, 0}, 4, 2}; }

// Generators scaled so that sigma is of order one.
SolutionVector gen(const FieldOperator& P, double t, double x, double w = 0.15, double amp = 1000.0) {
  return make_solution(P, bump_form(P.lattice(), 0, pb(t, x, w, w), {amp}));
}

PerturbationField evolvable_bump(const Lattice& L) {
  PolyBump b = pb(0.5, 0.5, 0.15, 0.25);
  PerturbationField a = bump_perturbation(L, 1.0, b, 1, 1), c = bump_perturbation(L, 0.5, b, 0, 0);
  std::vector<Scalar> B = a.comps();
  for (std::size_t i = 0; i < B.size(); ++i)
    for (std::size_t n = 0; n < L.size(); ++n) B[i][n] += c.comps()[i][n];
  return PerturbationField(L, std::move(B), a.box());
}

struct Bench {
  Lattice L;
  GeometryPtr G;
  FieldOperator P;
  explicit Bench(int N)
      : L(ccr_lattice(N)), G(make_geometry(minkowski(L))), P(FieldOperator::klein_gordon(G, 1.0)) {}
};

std::vector<SolutionVector> basis(const FieldOperator& P) {
  return {gen(P, 0.5, 0.3), gen(P, 0.45, 0.55), gen(P, 0.6, 0.75, 0.1), gen(P, 0.35, 0.1, 0.12)};
}

double field_distance(const SolutionVector& a, const SolutionVector& b) {
  return std::max(max_abs(a.generator - b.generator), max_abs(a.solution - b.solution));
}

}  // namespace

TEST(Weyl, UnitElement) {
  Bench s(64);
  SolutionVector u = gen(s.P, 0.5, 0.3);
  WeylElement one = weyl(zero_solution(s.L, s.P.kind(), 0)), a = weyl(u, std::polar(1.0, 0.7));
  for (const WeylElement& w : {weyl_compose(one, a, *s.G), weyl_compose(a, one, *s.G)}) {
    EXPECT_LT(phase_distance(w.phase, a.phase), 1e-15);
    EXPECT_EQ(field_distance(w.generator, u), 0.0);
  }
  EXPECT_THROW(weyl(u, 1.1), Error);
}

TEST(Weyl, InverseAndStar) {
  Bench s(64);
  SolutionVector u = gen(s.P, 0.5, 0.3);
  WeylElement a = weyl(u, std::polar(1.0, -1.3));
  WeylElement as = weyl_star(a);
  EXPECT_EQ(as.phase, std::conj(a.phase));
  WeylElement ass = weyl_star(as);
  EXPECT_EQ(ass.phase, a.phase);
  EXPECT_EQ(field_distance(ass.generator, u), 0.0);
  // a* a = (1, 0) up to exp(i sigma(u, u) / 2), and sigma(u, u) is the antisymmetry defect
  const double suu = symplectic_form(u, u, *s.G);
  WeylElement p = weyl_compose(as, a, *s.G);
  EXPECT_LT(phase_distance(p.phase, half_sigma_phase(-suu)), 1e-14);
  EXPECT_LT(phase_distance(p.phase, 1.0), 1e-3);
  EXPECT_EQ(max_abs(p.generator.solution), 0.0);
  EXPECT_GT(std::abs(symplectic_form(u, gen(s.P, 0.45, 0.55), *s.G)), 0.1);
}

TEST(Weyl, AssociativityOnSeededTriples) {
  Bench s(64);
  std::vector<WeylElement> el = random_elements(basis(s.P), 300, 20261018);
  double worst = 0, smax = 0;
  for (std::size_t i = 0; i < 300; i += 3) {
    const WeylElement &a = el[i], &b = el[i + 1], &c = el[i + 2];
    WeylElement l = weyl_compose(weyl_compose(a, b, *s.G), c, *s.G);
    WeylElement r = weyl_compose(a, weyl_compose(b, c, *s.G), *s.G);
    worst = std::max(worst, phase_distance(l.phase, r.phase));
    smax = std::max(smax, std::abs(symplectic_form(a.generator, b.generator, *s.G)));
  }
  EXPECT_LE(worst, 1e-10);
  EXPECT_GT(smax, 0.5);
}

TEST(Weyl, WordsReduceInBothOrders) {
  Bench s(64);
  std::vector<WeylElement> el = random_elements(basis(s.P), 60, 7);
  for (std::size_t i = 0; i < el.size(); i += 6) {
    std::vector<WeylElement> w(el.begin() + i, el.begin() + i + 6);
    WeylElement l = reduce_left(w, *s.G), r = reduce_right(w, *s.G);
    EXPECT_LE(phase_distance(l.phase, r.phase), 1e-10);
    EXPECT_LT(field_distance(l.generator, r.generator), 1e-9);
  }
  EXPECT_THROW(reduce_left({}, *s.G), Error);
}

TEST(Weyl, PhaseSeesOnlyTheSolution) {
  Bench s(64);
  SolutionVector u = gen(s.P, 0.5, 0.3), v = gen(s.P, 0.45, 0.55);
  // f + N g generates the same solution.
  FormField g = bump_form(s.L, 0, pb(0.55, 0.4, 0.1, 0.1), {1000.0});
  SolutionVector u2{u.kind, u.generator + apply_marching_operator(s.P, g), u.solution};
  for (bool left : {true, false}) {
    Phase p1 = left ? weyl_compose(weyl(u), weyl(v), *s.G).phase : weyl_compose(weyl(v), weyl(u), *s.G).phase;
    Phase p2 = left ? weyl_compose(weyl(u2), weyl(v), *s.G).phase : weyl_compose(weyl(v), weyl(u2), *s.G).phase;
    EXPECT_LT(phase_distance(p1, p2), 1e-10);
  }
}

TEST(Weyl, KindMismatch) {
  Bench s(32);
  FieldOperator Q = FieldOperator::proca(s.G, 1.0);
  WeylElement a = weyl(gen(s.P, 0.5, 0.3));
  WeylElement b = weyl(make_solution(Q, bump_form(s.L, 1, pb(0.5, 0.5, 0.15, 0.15), {1.0, 0.3})));
  EXPECT_THROW(weyl_compose(a, b, *s.G), Error);
}

TEST(Commutator, CausallyDisjointGeneratorsCommute) {
  Bench s(128);
  SolutionVector u = gen(s.P, 0.5, 0.25, 0.05), v = gen(s.P, 0.5, 0.75, 0.05);
  CommutatorCheck c = causal_commutator_check(u, v, *s.G);
  EXPECT_TRUE(c.cone_disjoint);
  EXPECT_TRUE(c.stencil_disjoint);
  EXPECT_TRUE(c.commute);
  EXPECT_LE(c.magnitude, c.tolerance);
  EXPECT_GT(c.tolerance, 0.0);
}

TEST(Commutator, OverlappingConesMatchSine) {
  Bench s(64);
  SolutionVector u = gen(s.P, 0.5, 0.3), v = gen(s.P, 0.45, 0.55);
  CommutatorCheck c = causal_commutator_check(u, v, *s.G);
  EXPECT_FALSE(c.cone_disjoint);
  EXPECT_FALSE(c.commute);
  EXPECT_NEAR(c.magnitude, 2 * std::abs(std::sin(0.5 * c.sigma)), 1e-14);
  EXPECT_GT(c.magnitude, 0.1);
}

TEST(Commutator, SelfCommutatorIsAntisymmetryDefect) {
  std::vector<double> h, m;
  for (int N : {64, 128, 256}) {
    Bench s(N);
    SolutionVector u = gen(s.P, 0.5, 0.3);
    CommutatorCheck c = causal_commutator_check(u, u, *s.G);
    h.push_back(1.0 / N);
    m.push_back(c.magnitude);
  }
  EXPECT_TRUE(check_order(h, m, 1.9).pass);
  EXPECT_LT(m.back(), 1e-3);
}

TEST(Lift, ZeroPerturbationIsIdentity) {
  Bench s(64);
  PerturbationField h = evolvable_bump(s.L).scaled(0);
  SolutionVector u = gen(s.P, 0.5, 0.3);
  WeylElement a = weyl(u, std::polar(1.0, 0.4));
  WeylElement r = rce_lift(a, s.P, h);
  EXPECT_EQ(r.phase, a.phase);
  EXPECT_LT(max_abs(r.generator.solution - u.solution), 1e-12 * max_abs(u.solution));
  // the lifted generator regenerates the lifted solution
  EXPECT_LT(max_abs(causal_propagator(s.P, r.generator.generator) - r.generator.solution),
            1e-12 * max_abs(u.solution));
  LiftDefect d = lift_defect(a, weyl(gen(s.P, 0.45, 0.55)), s.P, h);
  EXPECT_LT(d.homomorphism, 1e-12);
}

TEST(Lift, HomomorphismDefectConverges) {
  std::vector<double> h, hom, sig;
  for (int N : {64, 128, 256}) {
    Bench s(N);
    LiftDefect d = lift_defect(weyl(gen(s.P, 0.5, 0.3)), weyl(gen(s.P, 0.45, 0.55)), s.P, evolvable_bump(s.L).scaled(0.5));
    h.push_back(1.0 / N);
    hom.push_back(d.homomorphism);
    sig.push_back(d.sigma_defect / std::abs(d.sigma));
  }
  EXPECT_GE(fit_order(h, hom), 1.9);
  EXPECT_GE(fit_order(h, sig), 1.9);
  EXPECT_LT(sig[0], 0.02);
}

TEST(Lift, RejectsBadInput) {
  Bench s(32);
  FieldOperator Q = FieldOperator::proca(s.G, 1.0);
  EXPECT_THROW(rce_lift(weyl(gen(s.P, 0.5, 0.3)), Q, evolvable_bump(s.L)), Error);
}
