#pragma once

#include <complex>
#include <random>
#include <vector>

#include "fit.hpp"
#include "rce.hpp"

namespace lcf {

using Phase = std::complex<double>;

inline constexpr double phase_tol = 1e-14;

inline SolutionVector operator+(const SolutionVector& u, const SolutionVector& v) {
  if (u.kind != v.kind) throw Error("kind mismatch in generator sum");
  return {u.kind, u.generator + v.generator, u.solution + v.solution};
}

inline SolutionVector operator*(double a, const SolutionVector& u) { return {u.kind, a * u.generator, a * u.solution}; }

inline SolutionVector operator-(const SolutionVector& u) { return -1.0 * u; }

inline SolutionVector zero_solution(const Lattice& L, OperatorKind kind, int degree) {
  return {kind, FormField(L, degree), FormField(L, degree)};
}

struct WeylElement {
  Phase phase{1.0, 0.0};
  SolutionVector generator;
};

inline WeylElement weyl(const SolutionVector& u, Phase p = 1.0) {
  if (std::abs(std::abs(p) - 1.0) > phase_tol) throw Error("Weyl phase must have unit modulus");
  return {p, u};
}

inline Phase half_sigma_phase(double sigma) { return std::polar(1.0, -0.5 * sigma); }

// (p1, u)(p2, v) = (p1 p2 exp(-i sigma(u, v) / 2), u + v).
inline WeylElement weyl_compose(const WeylElement& a, const WeylElement& b, const Geometry& G) {
  if (a.generator.kind != b.generator.kind) throw Error("kind mismatch in Weyl product");
  Phase p = a.phase * b.phase * half_sigma_phase(symplectic_form(a.generator, b.generator, G));
  return {p / std::abs(p), a.generator + b.generator};
}

inline WeylElement weyl_star(const WeylElement& a) { return {std::conj(a.phase), -a.generator}; }

// Left-to-right and right-to-left reductions of a word.
inline WeylElement reduce_left(const std::vector<WeylElement>& w, const Geometry& G) {
  if (w.empty()) throw Error("empty Weyl word");
  WeylElement r = w.front();
  for (std::size_t i = 1; i < w.size(); ++i) r = weyl_compose(r, w[i], G);
  return r;
}

inline WeylElement reduce_right(const std::vector<WeylElement>& w, const Geometry& G) {
  if (w.empty()) throw Error("empty Weyl word");
  WeylElement r = w.back();
  for (std::size_t i = w.size() - 1; i-- > 0;) r = weyl_compose(w[i], r, G);
  return r;
}

inline double phase_distance(Phase a, Phase b) { return std::abs(a - b); }

// ---------------------------------------------------------------- causality

struct CommutatorCheck {
  double sigma = 0;
  double magnitude = 0;  // |exp(-i sigma/2) - exp(i sigma/2)| = 2 |sin(sigma/2)|
  double tolerance = 0;  // rounding_floor |e f_u| |f_v|
  bool cone_disjoint = false;     // physical cones of the generator supports
  bool stencil_disjoint = false;  // discrete domains of dependence
  bool commute = false;
};

inline CommutatorCheck causal_commutator_check(const SolutionVector& u, const SolutionVector& v, const Geometry& G) {
  const Lattice& L = G.lattice();
  CommutatorCheck c;
  c.sigma = symplectic_form(u, v, G);
  c.magnitude = std::abs(half_sigma_phase(c.sigma) - std::conj(half_sigma_phase(c.sigma)));
  c.tolerance = rounding_floor * interior_norm(u.solution, 0) * interior_norm(v.generator, 0);
  Region Ku = nonzero_region(L, u.generator.c), Kv = nonzero_region(L, v.generator.c);
  Region J = causal_cone(Ku, Direction::future, G.metric()) | causal_cone(Ku, Direction::past, G.metric());
  Region Js = stencil_cone(Ku, Direction::future) | stencil_cone(Ku, Direction::past);
  c.cone_disjoint = (J & Kv).empty();
  c.stencil_disjoint = (Js & Kv).empty();
  c.commute = c.magnitude <= c.tolerance;
  return c;
}

// ---------------------------------------------------------------- RCE lift

// (p, u) -> (p, r_h u). The lifted generator is the past-band source of r_h u.
inline WeylElement rce_lift(const WeylElement& a, const FieldOperator& P, const PerturbationField& h,
                            const RceOptions& opt = {}) {
  if (a.generator.kind != P.kind()) throw Error("kind mismatch in rce_lift");
  RceResult r = classical_rce(P, a.generator.solution, h, opt);
  return {a.phase, {P.kind(), std::move(r.generator), std::move(r.solution)}};
}

struct LiftDefect {
  double sigma = 0, sigma_lifted = 0;
  double sigma_defect = 0;  // |sigma(r u, r v) - sigma(u, v)|
  double homomorphism = 0;  // |phase(R(ab)) - phase(R(a) R(b))|
};

inline LiftDefect lift_defect(const WeylElement& a, const WeylElement& b, const FieldOperator& P,
                              const PerturbationField& h, const RceOptions& opt = {}) {
  const Geometry& G = P.geometry();
  WeylElement ra = rce_lift(a, P, h, opt), rb = rce_lift(b, P, h, opt);
  LiftDefect d;
  d.sigma = symplectic_form(a.generator, b.generator, G);
  d.sigma_lifted = symplectic_form(ra.generator, rb.generator, G);
  d.sigma_defect = std::abs(d.sigma_lifted - d.sigma);
  // r_h is linear, so R(ab) carries the phase of ab unchanged.
  d.homomorphism = phase_distance(weyl_compose(a, b, G).phase, weyl_compose(ra, rb, G).phase);
  return d;
}

// ---------------------------------------------------------------- sampling

// Elements with random phases and random combinations of a basis of generators.
inline std::vector<WeylElement> random_elements(const std::vector<SolutionVector>& basis, std::size_t n,
                                                std::uint64_t seed) {
  if (basis.empty()) throw Error("random_elements needs a nonempty basis");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0), ang(-M_PI, M_PI);
  std::vector<WeylElement> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SolutionVector u = coef(rng) * basis[0];
    for (std::size_t j = 1; j < basis.size(); ++j) u = u + coef(rng) * basis[j];
    out.push_back(weyl(u, std::polar(1.0, ang(rng))));
  }
  return out;
}

}  // namespace lcf
