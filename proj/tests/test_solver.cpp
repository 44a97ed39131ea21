#include <gtest/gtest.h>

#include "lcfield/solver.hpp"
#include "support.hpp"

using namespace lcf;
using namespace lcf::testing;
using std::numbers::pi;

namespace {

// Static curved metric without time-space terms; cone speed stays below one.
MetricField curved(const Lattice& L) {
  std::vector<Scalar> g = minkowski(L).comps();
  const int d = L.dim();
  for (std::size_t n = 0; n < L.size(); ++n) {
    double t = L.coord(n, 0), x = L.coord(n, 1);
    double s = std::sin(2 * pi * x + t), c = std::cos(2 * pi * x - 0.5 * t);
    g[0][n] = -(1 - 0.1 * s * s);
    g[d + 1][n] = 1 + 0.1 * c * c;
    if (d > 2) g[2 * d + 2][n] = 1 + 0.05 * s * s;
  }
  return MetricField(L, std::move(g));
}

PolyBump source_bump(const Lattice& L, double wt = 0.15, double wx = 0.2) {
  PolyBump b;
  b.dim = L.dim();
  b.power = 8;
  b.center = {L.duration() / 2, 0.5, 0.5};
  b.width = {wt, wx, wx};
  return b;
}

FieldOperator kg(const MetricField& g, double m) { return FieldOperator::klein_gordon(make_geometry(g), m); }

}  // namespace

TEST(Operator, ZeroAndKinds) {
  Lattice L = square(16);
  FieldOperator P = kg(minkowski(L), 1.0);
  EXPECT_EQ(max_abs(apply_operator(P, FormField(L, 0))), 0.0);
  EXPECT_THROW(apply_operator(P, FormField(L, 1)), Error);
  EXPECT_THROW(FieldOperator::proca(make_geometry(minkowski(L)), 0.0), Error);
  EXPECT_EQ(FieldOperator::maxwell(make_geometry(minkowski(L))).degree(), 1);
}

TEST(Operator, NullPlaneWave) {
  std::vector<double> h, e;
  for (int N : {32, 64, 128}) {
    Lattice L = square(N);
    FieldOperator P = kg(minkowski(L), 0.0);
    FormField u = scalar_form(L, sample(L, [](double t, double x, double) { return std::sin(2 * pi * (x - t)); }));
    h.push_back(L.h(1));
    e.push_back(interior_max(apply_operator(P, u)));
  }
  EXPECT_GT(fitted_order(h, e), 1.9);
}

TEST(Operator, ProcaSolutionsAreCoclosed) {
  std::mt19937_64 rng(3);
  Lattice L = square(32);
  auto G = make_geometry(curved(L));
  FieldOperator A = FieldOperator::proca(G, 1.5);
  FormField u = random_form(L, 1, rng);
  FormField lhs = codifferential(apply_operator(A, u), *G);
  FormField rhs = 2.25 * codifferential(u, *G);
  EXPECT_LT(max_abs(lhs - rhs) / max_abs(rhs), 1e-12);
}

TEST(Cauchy, ZeroDataZeroSolution) {
  Lattice L = square(32);
  FieldOperator P = kg(curved(L), 0.5);
  FormField u = solve_cauchy(P, FormField(L, 0), zero_data(P, 2), MarchDirection::forward);
  EXPECT_EQ(max_abs(u), 0.0);
}

// d'Alembert: u(t, x) = (G(x - s) + G(x + s)) / 2 with s = t - t0, periodic.
TEST(Cauchy, DAlembertGaussian) {
  std::vector<double> h, e;
  const double sig = 0.08;
  auto G = [&](double x) {
    double v = 0;
    for (int im = -2; im <= 2; ++im) v += std::exp(-std::pow((x + im - 0.5) / sig, 2));
    return v;
  };
  for (int N : {64, 128, 256}) {
    Lattice L = square(N);
    FieldOperator P = kg(minkowski(L), 0.0);
    CauchyData D = zero_data(P, 2);
    for (std::size_t j = 0; j < L.slice_size(); ++j) D.u0[0][j] = G(j * L.h(1));
    FormField u = solve_cauchy(P, FormField(L, 0), D, MarchDirection::forward);
    const double t0 = 2 * L.h(0);
    double err = 0;
    for (std::size_t n = 2 * L.slice_size(); n < L.size(); ++n) {
      double s = L.coord(n, 0) - t0, x = L.coord(n, 1);
      err = std::max(err, std::abs(u.c[0][n] - 0.5 * (G(x - s) + G(x + s))));
    }
    h.push_back(L.h(1));
    e.push_back(err);
  }
  EXPECT_LT(e.back(), 5e-3);
  EXPECT_GT(fitted_order(h, e), 1.9);
}

TEST(Cauchy, BackwardMirrorsForward) {
  Lattice L = square(64);
  FieldOperator P = kg(minkowski(L), 1.0);
  const int Nt = L.n(0);
  CauchyData D = zero_data(P, 2);
  for (std::size_t j = 0; j < L.slice_size(); ++j) D.u0[0][j] = std::exp(-std::pow((j * L.h(1) - 0.5) / 0.1, 2));
  FormField u = solve_cauchy(P, FormField(L, 0), D, MarchDirection::forward);
  CauchyData B = zero_data(P, Nt - 3);
  for (std::size_t j = 0; j < L.slice_size(); ++j) B.u0[0][j] = D.u0[0][j];
  FormField v = solve_cauchy(P, FormField(L, 0), B, MarchDirection::backward);
  // time-reflection symmetry of the flat scheme
  for (int k = 0; k + 2 < Nt - 2; ++k)
    for (std::size_t j = 0; j < L.slice_size(); ++j)
      ASSERT_NEAR(u.c[0][(2 + k) * L.slice_size() + j], v.c[0][(Nt - 3 - k) * L.slice_size() + j], 1e-12);
}

TEST(Cauchy, SupportInsideStencilCone) {
  Lattice L = square(64);
  FieldOperator P = kg(curved(L), 0.3);
  CauchyData D = zero_data(P, 3);
  for (std::size_t j = 0; j < L.slice_size(); ++j) {
    double x = j * L.h(1);
    D.u0[0][j] = std::abs(x - 0.5) < 0.1 ? std::pow(1 - std::pow((x - 0.5) / 0.1, 2), 4) : 0.0;
    D.u1[0][j] = 0.5 * D.u0[0][j];
  }
  FormField u = solve_cauchy(P, FormField(L, 0), D, MarchDirection::forward);
  Region K(L);
  for (std::size_t j = 0; j < L.slice_size(); ++j)
    if (D.u0[0][j] != 0 || D.u1[0][j] != 0) K.set(3 * L.slice_size() + j);
  Region cone = stencil_cone(K, Direction::future);
  for (std::size_t n = 0; n < L.size(); ++n)
    if (!cone[n]) ASSERT_EQ(u.c[0][n], 0.0) << node_label(L, n);
  // the physical cone with a halo holds all but a small dispersive tail
  Region phys = causal_cone(K, Direction::future, P.geometry().metric());
  double out = 0, all = 0;
  for (std::size_t n = 0; n < L.size(); ++n) {
    all = std::max(all, std::abs(u.c[0][n]));
    if (!phys[n]) out = std::max(out, std::abs(u.c[0][n]));
  }
  EXPECT_LT(out / all, 1e-2);
}

TEST(Cauchy, Rejections) {
  Lattice L = square(32);
  std::vector<Scalar> g = minkowski(L).comps();
  for (auto& v : g[3]) v = 0.2;  // cone speed 2.2 > allowed
  FieldOperator fast = kg(MetricField(L, g), 0.0);
  EXPECT_THROW(solve_cauchy(fast, FormField(L, 0), zero_data(fast, 2), MarchDirection::forward), Error);
  std::vector<Scalar> s = minkowski(L).comps();
  for (auto& v : s[1]) v = 0.1;
  FieldOperator shifted = kg(MetricField(L, s), 0.0);
  try {
    solve_cauchy(shifted, FormField(L, 0), zero_data(shifted, 2), MarchDirection::forward);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("time-space"), std::string::npos);
  }
}

TEST(Cauchy, HaloContact) {
  Lattice L = square(32, 1.0, Boundary::support_contained);
  FieldOperator P = kg(minkowski(L), 0.0);
  CauchyData D = zero_data(P, 2);
  D.u0[0][5] = 1.0;
  EXPECT_THROW(solve_cauchy(P, FormField(L, 0), D, MarchDirection::forward), Error);
}

TEST(Cauchy, EnergyConservedOnFlatMetric) {
  for (Boundary b : {Boundary::periodic, Boundary::support_contained}) {
    Lattice L = square(128, 3.0, b, 64);
    FieldOperator P = kg(minkowski(L), 2.0);
    CauchyData D = zero_data(P, 2);
    for (std::size_t j = 0; j < L.slice_size(); ++j) {
      double x = j * L.h(1) - 1.5;
      const double b = x * x < 0.25 ? std::pow(1 - 4 * x * x, 6) : 0.0;
      D.u0[0][j] = b;
      D.u1[0][j] = -x * b;
    }
    FormField u = solve_cauchy(P, FormField(L, 0), D, MarchDirection::forward);
    std::vector<double> E = energy(P, u);
    double lo = 1e300, hi = -1e300;
    for (std::size_t n = 2; n < E.size(); ++n) {
      lo = std::min(lo, E[n]);
      hi = std::max(hi, E[n]);
    }
    EXPECT_GT(lo, 0);
    EXPECT_LT((hi - lo) / hi, 1e-6);
  }
}

TEST(Green, ZeroSourceAndWindow) {
  Lattice L = square(32);
  FieldOperator P = kg(minkowski(L), 1.0);
  EXPECT_EQ(max_abs(green(P, FormField(L, 0), GreenKind::advanced)), 0.0);
  FormField f(L, 0);
  f.c[0][L.node(1, 10)] = 1.0;
  EXPECT_THROW(green(P, f, GreenKind::advanced), Error);
  FieldOperator A = FieldOperator::proca(P.geometry_ptr(), 1.0);
  EXPECT_THROW(green(A, FormField(L, 1), GreenKind::advanced), Error);
}

TEST(Green, ResidualSecondOrder) {
  for (int kind = 0; kind < 2; ++kind) {
    std::vector<double> h, e;
    for (int N : {32, 64, 128}) {
      Lattice L = square(N);
      FieldOperator P = kind == 0 ? kg(curved(L), 1.0) : FieldOperator::box_one(make_geometry(curved(L)), 1.0);
      FormField f = bump_form(L, P.degree(), source_bump(L), {1.0, -0.6});
      for (GreenKind gk : {GreenKind::advanced, GreenKind::retarded}) {
        FormField u = green(P, f, gk);
        double r = interior_norm(apply_operator(P, u) - f) / interior_norm(f);
        if (gk == GreenKind::advanced) {
          h.push_back(L.h(1));
          e.push_back(r);
        }
        // the narrow form is met exactly
        EXPECT_LT(interior_norm(P.principal().apply(u) - f, 1) / interior_norm(f), 1e-10);
      }
    }
    EXPECT_LT(e.back(), 2e-2);
    EXPECT_GT(fitted_order(h, e), 1.9);
  }
}

TEST(Green, LeftInverseOnCompactFunctions) {
  std::vector<double> h, e;
  for (int N : {32, 64, 128}) {
    Lattice L = square(N);
    FieldOperator P = kg(curved(L), 0.7);
    FormField g = bump_form(L, 0, source_bump(L), {1.0});
    FormField ea = green(P, apply_operator(P, g), GreenKind::advanced);
    FormField er = green(P, apply_operator(P, g), GreenKind::retarded);
    h.push_back(L.h(1));
    e.push_back(std::max(max_abs(ea - g), max_abs(er - g)) / max_abs(g));
    // exact for the narrow form
    EXPECT_LT(max_abs(green(P, P.principal().apply(g), GreenKind::advanced) - g), 1e-10);
  }
  EXPECT_GT(fitted_order(h, e), 1.9);
}

TEST(Green, SupportInCones) {
  Lattice L = square(64);
  FieldOperator P = kg(curved(L), 0.5);
  FormField f = bump_form(L, 0, source_bump(L, 0.05, 0.05), {1.0});
  Region K = nonzero_region(L, f.c);
  FormField ua = green(P, f, GreenKind::advanced), ur = green(P, f, GreenKind::retarded);
  Region Sa = stencil_cone(K, Direction::future), Sr = stencil_cone(K, Direction::past);
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!Sa[n]) ASSERT_EQ(ua.c[0][n], 0.0);
    if (!Sr[n]) ASSERT_EQ(ur.c[0][n], 0.0);
  }
}

TEST(Green, UniqueAcrossStartSlices) {
  Lattice L = square(64);
  FieldOperator P = kg(curved(L), 0.5);
  FormField f = bump_form(L, 0, source_bump(L, 0.1), {1.0});
  FormField a = green(P, f, GreenKind::advanced, 0), b = green(P, f, GreenKind::advanced, 3);
  EXPECT_LT(max_abs(a - b), 1e-10);
  FormField c = green(P, f, GreenKind::retarded), d = green(P, f, GreenKind::retarded, L.n(0) - 4);
  EXPECT_LT(max_abs(c - d), 1e-10);
}

// (e^a f, g) - (f, e^r g) and the antisymmetry of the propagator pairing.
TEST(Green, FormalAdjointness) {
  std::vector<double> h, e1, e2;
  for (int N : {32, 64, 128}) {
    Lattice L = square(N);
    FieldOperator P = kg(curved(L), 0.8);
    const Geometry& G = P.geometry();
    PolyBump b1 = source_bump(L, 0.08, 0.15), b2 = b1;
    b1.center[0] = 0.3 * L.duration();
    b2.center[0] = 0.7 * L.duration();
    b2.center[1] = 0.6;
    FormField f = bump_form(L, 0, b1, {1.0}), g = bump_form(L, 0, b2, {1.0});
    double a = global_pairing(green(P, f, GreenKind::advanced), g, G);
    double r = global_pairing(f, green(P, g, GreenKind::retarded), G);
    double s1 = global_pairing(causal_propagator(P, f), g, G), s2 = global_pairing(f, causal_propagator(P, g), G);
    h.push_back(L.h(1));
    e1.push_back(std::abs(a - r) / std::abs(a));
    e2.push_back(std::abs(s1 + s2) / std::abs(s1));
  }
  for (auto* e : {&e1, &e2}) EXPECT_TRUE(fitted_order(h, *e) > 1.9 || e->back() < 1e-11);
}

TEST(Propagator, SolutionsAndKernel) {
  std::vector<double> h, e1, e2;
  for (int N : {32, 64, 128}) {
    Lattice L = square(N);
    FieldOperator P = kg(curved(L), 1.0);
    FormField f = bump_form(L, 0, source_bump(L), {1.0});
    FormField u = causal_propagator(P, f);
    h.push_back(L.h(1));
    e1.push_back(interior_norm(apply_operator(P, u)) / interior_norm(f));
    e2.push_back(interior_norm(causal_propagator(P, apply_operator(P, f))) / interior_norm(f));
  }
  EXPECT_GT(fitted_order(h, e1), 1.9);
  EXPECT_GT(fitted_order(h, e2), 1.9);
}

// e_{Box_1 + m^2} d = d e_{Box_0 + m^2} and e_0 delta = delta e_1.
TEST(Propagator, IntertwinesWithDAndDelta) {
  std::vector<double> h, e1, e2;
  for (int N : {32, 64, 128}) {
    Lattice L = square(N);
    auto G = make_geometry(curved(L));
    FieldOperator P0 = FieldOperator::klein_gordon(G, 0.9), P1 = FieldOperator::box_one(G, 0.9);
    FormField f = bump_form(L, 0, source_bump(L), {1.0});
    FormField th = bump_form(L, 1, source_bump(L), {0.4, 1.0});
    FormField a = causal_propagator(P1, exterior_derivative(f)), b = exterior_derivative(causal_propagator(P0, f));
    FormField c = causal_propagator(P0, codifferential(th, *G)), d = codifferential(causal_propagator(P1, th), *G);
    h.push_back(L.h(1));
    e1.push_back(interior_max(a - b) / interior_max(b));
    e2.push_back(interior_max(c - d) / interior_max(d));
  }
  EXPECT_GT(fitted_order(h, e1), 1.9);
  EXPECT_GT(fitted_order(h, e2), 1.9);
}

TEST(Proca, GreenProperties) {
  std::vector<double> h, e1, e2, e3;
  for (int N : {64, 128, 256}) {
    Lattice L = square(N);
    auto G = make_geometry(curved(L));
    FieldOperator A = FieldOperator::proca(G, 1.2);
    FormField th = bump_form(L, 1, source_bump(L), {1.0, 0.5});
    for (GreenKind k : {GreenKind::advanced, GreenKind::retarded}) {
      FormField u = proca_green(A, th, k);
      double r = interior_norm(apply_operator(A, u) - th) / interior_norm(th);
      if (k == GreenKind::advanced) e1.push_back(r);
    }
    FormField s = causal_propagator(A, th);
    e2.push_back(interior_norm(codifferential(s, *G)) / interior_norm(s));
    FormField g = bump_form(L, 1, source_bump(L, 0.1, 0.15), {-0.3, 1.0});
    e3.push_back(interior_norm(proca_green(A, apply_operator(A, g), GreenKind::advanced) - g) / interior_norm(g));
    h.push_back(L.h(1));
  }
  EXPECT_GT(fitted_order(h, e1), 1.9);
  EXPECT_GT(fitted_order(h, e2), 1.9);
  EXPECT_GT(fitted_order(h, e3), 1.9);
}

TEST(Proca, CoclosedSourceSkipsCorrection) {
  Lattice L = square(32);
  auto G = make_geometry(curved(L));
  FieldOperator A = FieldOperator::proca(G, 1.0), B = FieldOperator::box_one(G, 1.0);
  // delta of a 2-form is coclosed exactly
  FormField beta = bump_form(L, 2, source_bump(L), {1.0});
  FormField th = codifferential(beta, *G);
  EXPECT_LT(max_abs(proca_green(A, th, GreenKind::advanced) - green(B, th, GreenKind::advanced)),
            1e-9 * max_abs(green(B, th, GreenKind::advanced)));
}

TEST(Fundamental, FlatHalfInsideCone) {
  std::vector<double> err;
  for (int N : {64, 128}) {
    Lattice L = square(N, 1.0, Boundary::periodic, N);
    FieldOperator P = kg(minkowski(L), 0.0);
    const std::size_t p = L.node(4, N / 2);
    FormField U = fundamental_solution(P, p, GreenKind::advanced);
    const double band = 0.05;
    double e = 0;
    for (std::size_t n = 0; n < L.size(); ++n) {
      double t = L.coord(n, 0) - L.coord(p, 0), x = std::abs(L.coord(n, 1) - L.coord(p, 1));
      double gap = t - x;
      if (std::abs(gap) < band || t < band) continue;
      e = std::max(e, std::abs(U.c[0][n] - (gap > 0 ? 0.5 : 0.0)));
    }
    err.push_back(e);
  }
  EXPECT_LT(err[1], err[0]);
}

TEST(Fundamental, WeakIdentityAndSupport) {
  std::vector<double> err;
  for (int N : {32, 64, 128}) {
    Lattice L = square(N);
    FieldOperator P = kg(curved(L), 0.5);
    const std::size_t p = L.node(N / 2, N / 2);
    FormField U = fundamental_solution(P, p, GreenKind::advanced);
    FormField w = bump_form(L, 0, source_bump(L, 0.2, 0.3), {1.0});
    err.push_back(std::abs(global_pairing(apply_operator(P, w), U, P.geometry()) - w.c[0][p]));
    Region K(L);
    K.set(p);
    Region S = stencil_cone(K, Direction::future);
    for (std::size_t n = 0; n < L.size(); ++n)
      if (!S[n]) ASSERT_EQ(U.c[0][n], 0.0);
    EXPECT_THROW(fundamental_solution(P, L.node(1, N / 2), GreenKind::advanced), Error);
  }
  EXPECT_GT(fitted_order({1.0 / 32, 1.0 / 64, 1.0 / 128}, err), 1.9);
}
