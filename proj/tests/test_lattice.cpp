#include <gtest/gtest.h>

#include "support.hpp"

using namespace lcf;
using namespace lcf::testing;

TEST(Lattice, CoordinatesAndWindow) {
  LatticeParams p;
  p.n = {64, 64, 1};
  p.h = {1.0 / 64, 1.0 / 64, 1};
  Lattice L = build_lattice(p);
  EXPECT_DOUBLE_EQ(L.duration(), 63.0 / 64.0);
  EXPECT_EQ(L.size(), 64u * 64u);
  std::size_t k = L.node(5, 7);
  EXPECT_DOUBLE_EQ(L.coord(k, 0), 5.0 / 64);
  EXPECT_DOUBLE_EQ(L.coord(k, 1), 7.0 / 64);
}

TEST(Lattice, RejectsBadParameters) {
  LatticeParams p;
  p.n = {4, 64, 1};
  p.h = {0.1, 0.1, 1};
  EXPECT_THROW(
      {
        try {
          build_lattice(p);
        } catch (const Error& e) {
          EXPECT_NE(std::string(e.what()).find("size too small"), std::string::npos);
          throw;
        }
      },
      Error);
  p.n = {16, 16, 1};
  p.h = {0.1, -0.1, 1};
  EXPECT_THROW(build_lattice(p), Error);
  EXPECT_THROW(parse_boundary("reflecting"), Error);
}

TEST(Lattice, HaloContract) {
  Lattice L = square(16, 1.0, Boundary::support_contained);
  FormField w(L, 0);
  w.c[0][L.node(5, 1)] = 1.0;
  EXPECT_THROW(w.check_halo(), Error);
  w.c[0][L.node(5, 1)] = 0.0;
  w.c[0][L.node(5, 2)] = 1.0;
  EXPECT_NO_THROW(w.check_halo());
}

TEST(Metric, InverseOfDiagonalPresets) {
  Lattice L = square(16);
  TensorField gi = inverse_metric(minkowski(L));
  EXPECT_EQ(gi.valence, "uu");
  EXPECT_DOUBLE_EQ(gi({0, 0})[3], -1.0);
  EXPECT_DOUBLE_EQ(gi({1, 1})[3], 1.0);
  EXPECT_DOUBLE_EQ(gi({0, 1})[3], 0.0);
  TensorField ga = inverse_metric(frw_metric(L, [](double) { return 2.0; }));
  EXPECT_DOUBLE_EQ(ga({1, 1})[7], 0.25);
}

TEST(Metric, InverseOfRandomLorentzianSample) {
  std::mt19937_64 rng(7);
  for (Lattice L : {square(16), cube(8)}) {
    MetricField g = smooth_metric(L, rng, 0.2);
    TensorField gi = inverse_metric(g);
    const int d = L.dim();
    double worst = 0;
    for (std::size_t n = 0; n < L.size(); ++n)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0;
          for (int k = 0; k < d; ++k) s += gi.c[i * d + k][n] * g.comp(k, j)[n];
          worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    EXPECT_LT(worst, 1e-12);
  }
}

TEST(Metric, RejectsNonLorentzianAndSingular) {
  Lattice L = square(16);
  std::vector<Scalar> g = minkowski(L).comps();
  g[0][10] = 0.5;
  EXPECT_THROW(MetricField(L, g), Error);
  g = minkowski(L).comps();
  g[3][10] = 1e-12;
  EXPECT_THROW(MetricField(L, g), Error);
}

TEST(Metric, VolumeDensity) {
  Lattice L = square(16);
  EXPECT_DOUBLE_EQ(volume_density(minkowski(L))[5], 1.0);
  std::vector<Scalar> g = minkowski(L).comps();
  for (auto& v : g[0]) v = -4.0;
  EXPECT_DOUBLE_EQ(volume_density(MetricField(L, g))[5], 2.0);
  EXPECT_NEAR(volume_density(frw_metric(L, [](double) { return 1.3; }))[9], 1.3, 1e-15);
}

TEST(Metric, ChristoffelVanishesForConstantMetrics) {
  Lattice L = square(16);
  TensorField G = christoffel(minkowski(L));
  std::vector<Scalar> g = minkowski(L).comps();
  for (auto& v : g[0]) v -= 0.7;
  TensorField G2 = christoffel(MetricField(L, g));
  for (std::size_t c = 0; c < G.c.size(); ++c) {
    EXPECT_EQ(max_abs(G.c[c]), 0.0);
    EXPECT_LT(max_abs(G2.c[c]), 1e-13);
  }
}

// a(t) = 1 + 0.1 t: Gamma^1_01 = a'/a and Gamma^0_11 = a a', both 0.1 at t = 0.
TEST(Metric, ChristoffelFrwAtOrigin) {
  Lattice L = square(32);
  TensorField G = christoffel(frw(L, 0.1));
  std::size_t k = L.node(0, 5);
  EXPECT_NEAR(G({1, 0, 1})[k], 0.1, 1e-12);
  EXPECT_NEAR(G({1, 1, 0})[k], 0.1, 1e-12);
  EXPECT_NEAR(G({0, 1, 1})[k], 0.1, 1e-12);
  std::size_t m = L.node(10, 5);
  double t = L.coord(m, 0), a = 1 + 0.1 * t;
  EXPECT_NEAR(G({1, 0, 1})[m], 0.1 / a, 1e-6);
  EXPECT_NEAR(G({0, 1, 1})[m], a * 0.1, 1e-12);
}

TEST(Metric, ChristoffelExactlySymmetric) {
  std::mt19937_64 rng(3);
  Lattice L = cube(10);
  TensorField G = christoffel(smooth_metric(L, rng));
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (std::size_t n = 0; n < L.size(); ++n) ASSERT_EQ(G({k, i, j})[n], G({k, j, i})[n]);
}

// Symbolic oracle for g = diag(-1, a^2), a = 1 + 0.2 sin(3 t):
// Gamma^1_01 = a'/a, Gamma^0_11 = a a', S = 2 a''/a.
struct FrwOracle {
  static double a(double t) { return 1 + 0.2 * std::sin(3 * t); }
  static double ad(double t) { return 0.6 * std::cos(3 * t); }
  static double add(double t) { return -1.8 * std::sin(3 * t); }
};

TEST(Metric, FrwRefinementOfGammaRicciScalar) {
  std::vector<double> eg, es, er;
  for (int N : {16, 32, 64}) {
    Lattice L = square(N, 1.0, Boundary::periodic, N, 1.0);
    Curvature cv = curvature_ricci_scalar(frw_metric(L, FrwOracle::a));
    TensorField G = christoffel(frw_metric(L, FrwOracle::a));
    // One-sided time stencils drop to first order on the two slices at
    // either end once nested; compare on the interior slices.
    double e1 = 0, e2 = 0, e3 = 0;
    for (std::size_t n = 2 * L.slice_size(); n < (L.n(0) - 2) * L.slice_size(); ++n) {
      double t = L.coord(n, 0);
      double a = FrwOracle::a(t), ad = FrwOracle::ad(t), add = FrwOracle::add(t);
      e1 = std::max({e1, std::abs(G({1, 0, 1})[n] - ad / a), std::abs(G({0, 1, 1})[n] - a * ad)});
      e2 = std::max(e2, std::abs(cv.scalar[n] - 2 * add / a));
      e3 = std::max({e3, std::abs(cv.ricci({0, 0})[n] + add / a), std::abs(cv.ricci({1, 1})[n] - a * add)});
    }
    eg.push_back(e1);
    es.push_back(e2);
    er.push_back(e3);
  }
  for (std::size_t i = 0; i + 1 < eg.size(); ++i) {
    EXPECT_GE(eg[i] / eg[i + 1], 3.5);
    EXPECT_GE(es[i] / es[i + 1], 3.5);
    EXPECT_GE(er[i] / er[i + 1], 3.5);
  }
}

TEST(Metric, FlatCurvatureAndExactContraction) {
  std::mt19937_64 rng(11);
  Lattice L = square(16);
  Curvature flat = curvature_ricci_scalar(minkowski(L));
  EXPECT_EQ(max_abs(flat.scalar), 0.0);
  Curvature cv = curvature_ricci_scalar(smooth_metric(L, rng));
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k)
      for (std::size_t n = 0; n < L.size(); ++n) {
        double s = 0;
        for (int j = 0; j < 2; ++j) s += cv.C({i, j, k, j})[n];
        ASSERT_EQ(s, cv.ricci({i, k})[n]);
      }
  // antisymmetry of C in its first two slots on a constant metric
  std::vector<Scalar> g = minkowski(L).comps();
  for (auto& v : g[3]) v = 2.5;
  Curvature cc = curvature_ricci_scalar(MetricField(L, g));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          EXPECT_LT(max_abs(cc.C({i, j, k, l})) + max_abs(cc.C({j, i, k, l})), 1e-10);
}

TEST(Metric, GeometryRicciMatchesContraction) {
  std::mt19937_64 rng(5);
  Lattice L = square(16);
  MetricField g = smooth_metric(L, rng);
  Curvature cv = curvature_ricci_scalar(g);
  Geometry G(g);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t n = 0; n < L.size(); ++n)
      EXPECT_NEAR(G.ricci().c[c][n], cv.ricci.c[c][n], 1e-9 * (1 + std::abs(cv.ricci.c[c][n])));
}

TEST(Metric, MusicalIsomorphisms) {
  Lattice L = square(16);
  TensorField dt(L, "d");
  std::fill(dt.c[0].begin(), dt.c[0].end(), 1.0);
  TensorField up = raise_lower(dt, 0, Musical::sharp, minkowski(L));
  EXPECT_EQ(up.valence, "u");
  EXPECT_DOUBLE_EQ(up.c[0][4], -1.0);
  EXPECT_DOUBLE_EQ(up.c[1][4], 0.0);

  std::vector<Scalar> g = minkowski(L).comps();
  for (auto& v : g[3]) v = 4.0;
  TensorField dx(L, "d");
  std::fill(dx.c[1].begin(), dx.c[1].end(), 1.0);
  TensorField dxs = raise_lower(dx, 0, Musical::sharp, MetricField(L, g));
  EXPECT_DOUBLE_EQ(dxs.c[0][4], 0.0);
  EXPECT_DOUBLE_EQ(dxs.c[1][4], 0.25);

  std::mt19937_64 rng(9);
  MetricField gr = smooth_metric(L, rng, 0.2);
  TensorField w(L, "dd");
  for (auto& a : w.c) a = random_scalar(L, rng);
  TensorField back = raise_lower(raise_lower(w, 1, Musical::sharp, gr), 1, Musical::flat, gr);
  for (std::size_t c = 0; c < w.c.size(); ++c)
    for (std::size_t n = 0; n < L.size(); ++n) EXPECT_NEAR(back.c[c][n], w.c[c][n], 1e-12);
  EXPECT_THROW(raise_lower(w, 2, Musical::sharp, gr), Error);
  EXPECT_THROW(raise_lower(w, 0, Musical::flat, gr), Error);
}

TEST(Metric, PointwiseLocality) {
  Lattice L = square(16);
  std::vector<Scalar> g = minkowski(L).comps();
  g[3][40] = 1.5;
  Scalar v = volume_density(MetricField(L, g));
  TensorField gi = inverse_metric(MetricField(L, g));
  for (std::size_t n = 0; n < L.size(); ++n)
    if (n != 40) {
      EXPECT_EQ(v[n], 1.0);
      EXPECT_EQ(gi.c[3][n], 1.0);
    }
}

TEST(Metric, ChristoffelDifferentiableInS) {
  // Finite differences in s of Gamma(g + s B) converge at second order.
  std::mt19937_64 rng(21);
  Lattice L = square(16);
  MetricField g = smooth_metric(L, rng);
  PolyBump b{{L.duration() / 2, 0.5, 0}, {0.1, 0.25, 0}, 6, 2};
  PerturbationField B = bump_perturbation(L, 1.0, b, 1, 1);
  auto gam = [&](double s) { return christoffel(metric_plus(g, B, s)); };
  auto fd = [&](double s) {
    TensorField p = gam(s), m = gam(-s);
    double mx = 0, e = 0;
    TensorField p2 = gam(s / 2), m2 = gam(-s / 2);
    for (std::size_t c = 0; c < p.c.size(); ++c)
      for (std::size_t n = 0; n < L.size(); ++n) {
        double d1 = (p.c[c][n] - m.c[c][n]) / (2 * s), d2 = (p2.c[c][n] - m2.c[c][n]) / s;
        e = std::max(e, std::abs(d1 - d2));
        mx = std::max(mx, std::abs(d2));
      }
    return e;
  };
  double e1 = fd(1e-2), e2 = fd(5e-3);
  EXPECT_GT(e1 / e2, 3.5);
}
