#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "lcfield/forms.hpp"

namespace lcf::testing {

inline Lattice square(int N, double L = 1.0, Boundary mode = Boundary::periodic, int Nt = -1,
                      double cfl = 0.5) {
  LatticeParams p;
  p.dim = 2;
  p.n = {Nt > 0 ? Nt : N, N, 1};
  double dx = mode == Boundary::periodic ? L / N : L / (N - 1);
  p.h = {cfl * dx, dx, 1};
  p.mode = mode;
  return Lattice(p);
}

inline Lattice cube(int N, double L = 1.0, Boundary mode = Boundary::periodic, int Nt = -1) {
  LatticeParams p;
  p.dim = 3;
  p.n = {Nt > 0 ? Nt : N, N, N};
  double dx = mode == Boundary::periodic ? L / N : L / (N - 1);
  p.h = {0.5 * dx, dx, dx};
  p.mode = mode;
  return Lattice(p);
}

inline Scalar random_scalar(const Lattice& L, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Scalar f(L.size());
  for (auto& v : f) v = u(rng);
  return f;
}

inline FormField random_form(const Lattice& L, int k, std::mt19937_64& rng) {
  FormField w(L, k);
  for (auto& a : w.c) a = random_scalar(L, rng);
  return w;
}

// Smooth Lorentzian metric: Minkowski plus a few low Fourier modes in every
// component, periodic in space.
inline MetricField smooth_metric(const Lattice& L, std::mt19937_64& rng, double amp = 0.1) {
  const int d = L.dim();
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Scalar> g = minkowski(L).comps();
  const double T = L.duration();
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double a = amp * u(rng), ph = u(rng) * 3, kt = 1 + 2 * std::abs(u(rng));
      std::array<double, 3> Ls{T, L.n(1) * L.h(1), d > 2 ? L.n(2) * L.h(2) : 1.0};
      for (std::size_t n = 0; n < L.size(); ++n) {
        double s = std::sin(kt * L.coord(n, 0) / T + ph);
        for (int ax = 1; ax < d; ++ax) s *= std::cos(2 * std::numbers::pi * L.coord(n, ax) / Ls[ax] + ph * ax);
        g[i * d + j][n] += a * s;
      }
    }
  return MetricField(L, std::move(g));
}

// Compactly supported smooth form: bump(t, x, y) times component weights.
inline FormField bump_form(const Lattice& L, int k, const PolyBump& b, std::vector<double> w) {
  FormField out(L, k);
  for (std::size_t n = 0; n < L.size(); ++n) {
    double v = b.value(node_point(L, n));
    for (int a = 0; a < out.ncomp(); ++a) out.c[a][n] = v * w[a % w.size()];
  }
  return out;
}

inline double max_abs(const Scalar& f) {
  double m = 0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs(const FormField& w) {
  double m = 0;
  for (const auto& a : w.c) m = std::max(m, max_abs(a));
  return m;
}

// Least-squares slope of log(err) against log(h).
inline double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    double x = std::log(h[i]), y = std::log(err[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace lcf::testing
