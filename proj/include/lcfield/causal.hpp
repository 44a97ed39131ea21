#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "metric.hpp"
#include "parallel.hpp"

namespace lcf {

// Node set on a lattice.
struct Region {
  Lattice lat;
  std::vector<std::uint8_t> mask;

  Region() = default;
  explicit Region(const Lattice& L, bool fill = false) : lat(L), mask(L.size(), fill ? 1 : 0) {}

  bool operator[](std::size_t n) const { return mask[n] != 0; }
  void set(std::size_t n, bool v = true) { mask[n] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto m : mask) c += m;
    return c;
  }
  bool empty() const { return count() == 0; }
  bool subset_of(const Region& o) const {
    require_same(lat, o.lat);
    for (std::size_t n = 0; n < mask.size(); ++n)
      if (mask[n] && !o.mask[n]) return false;
    return true;
  }
  Region complement() const {
    Region r(lat);
    for (std::size_t n = 0; n < mask.size(); ++n) r.mask[n] = !mask[n];
    return r;
  }
  Region operator|(const Region& o) const {
    require_same(lat, o.lat);
    Region r(lat);
    for (std::size_t n = 0; n < mask.size(); ++n) r.mask[n] = mask[n] | o.mask[n];
    return r;
  }
  Region operator&(const Region& o) const {
    require_same(lat, o.lat);
    Region r(lat);
    for (std::size_t n = 0; n < mask.size(); ++n) r.mask[n] = mask[n] & o.mask[n];
    return r;
  }
  bool operator==(const Region& o) const { return lat == o.lat && mask == o.mask; }

  // Time slices entirely inside the region.
  std::vector<int> full_slices() const {
    std::vector<int> out;
    const std::size_t S = lat.slice_size();
    for (int it = 0; it < lat.n(0); ++it) {
      bool all = true;
      for (std::size_t j = 0; j < S && all; ++j) all = mask[it * S + j] != 0;
      if (all) out.push_back(it);
    }
    return out;
  }
  // Slices with at least one node.
  std::pair<int, int> time_extent() const {
    int lo = -1, hi = -1;
    const std::size_t S = lat.slice_size();
    for (int it = 0; it < lat.n(0); ++it)
      for (std::size_t j = 0; j < S; ++j)
        if (mask[it * S + j]) {
          if (lo < 0) lo = it;
          hi = it;
          break;
        }
    return {lo, hi};
  }
};

inline Region nonzero_region(const Lattice& L, const std::vector<Scalar>& comps) {
  Region r(L);
  for (const auto& c : comps)
    for (std::size_t n = 0; n < L.size(); ++n)
      if (c[n] != 0.0) r.set(n);
  return r;
}

enum class Direction { future, past };

// Largest coordinate speed dx/dt of a null direction at one point, over all
// spatial directions. Closed form when g_0a = 0, otherwise sampled densely.
inline double cone_speed(const Mat& g) {
  const int d = static_cast<int>(g.rows());
  const double g00 = g(0, 0);
  bool split = true;
  for (int a = 1; a < d; ++a) split = split && g(0, a) == 0.0;
  auto speed = [&](const Vec& e) {
    double b = 0, q = 0;
    for (int a = 1; a < d; ++a) {
      b += g(0, a) * e(a - 1);
      for (int c = 1; c < d; ++c) q += g(a, c) * e(a - 1) * e(c - 1);
    }
    return (std::abs(b) + std::sqrt(b * b - g00 * q)) / q;
  };
  if (d == 2) {
    Vec e(1);
    e(0) = 1;
    return speed(e);
  }
  if (split) {
    Eigen::SelfAdjointEigenSolver<Mat> es(g.block(1, 1, d - 1, d - 1));
    return std::sqrt(-g00 / es.eigenvalues().minCoeff());
  }
  double best = 0;
  const int M = 2048;
  for (int s = 0; s < M; ++s) {
    Vec e(2);
    const double a = std::numbers::pi * s / M;
    e << std::cos(a), std::sin(a);
    best = std::max(best, speed(e));
  }
  return best * (1 + 1e-5);
}

// Max cone speed over each time slice.
inline std::vector<double> slice_speeds(const std::vector<Scalar>& g, const Lattice& L) {
  const int d = L.dim();
  std::vector<double> c(L.n(0), 0.0);
  const std::size_t S = L.slice_size();
  parallel_for(
      L.n(0),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t it = b; it < e; ++it)
          for (std::size_t j = 0; j < S; ++j) {
            Mat m(d, d);
            for (int i = 0; i < d; ++i)
              for (int k = 0; k < d; ++k) m(i, k) = g[i * d + k][it * S + j];
            c[it] = std::max(c[it], cone_speed(m));
          }
      },
      1);
  return c;
}

inline std::vector<double> slice_speeds(const MetricField& g) { return slice_speeds(g.comps(), g.lattice()); }

struct ConeOptions {
  double halo_cells = 1.0;  // outer dilation, in units of the largest spatial spacing
};

namespace detail {

// Spatial coordinate distance between in-slice offsets j1 and j2, with
// periodic wrap where the lattice is periodic.
inline double spatial_distance(const Lattice& L, std::size_t j1, std::size_t j2) {
  double s = 0;
  for (int a = 1; a < L.dim(); ++a) {
    int i1 = L.index(j1, a), i2 = L.index(j2, a);
    int di = std::abs(i1 - i2);
    if (L.periodic(a)) di = std::min(di, L.n(a) - di);
    s += (di * L.h(a)) * (di * L.h(a));
  }
  return std::sqrt(s);
}

}  // namespace detail

// Outer approximation of J_+(K) or J_-(K): a node of slice m lies in the cone
// of a source node on slice s if its spatial distance is within the
// accumulated per-slice reach plus the halo.
inline Region causal_cone(const Region& K, Direction dir, const std::vector<double>& speeds,
                          ConeOptions opt = {}) {
  const Lattice& L = K.lat;
  const std::size_t S = L.slice_size();
  const int Nt = L.n(0);
  double hmax = 0;
  for (int a = 1; a < L.dim(); ++a) hmax = std::max(hmax, L.h(a));
  const double halo = opt.halo_cells * hmax;
  Region out(L);
  for (int s = 0; s < Nt; ++s) {
    // Points of K on slice s that have an in-slice neighbour outside K; all
    // distances to the slice set are realised at these or inside it.
    std::vector<std::size_t> edge;
    bool any = false;
    for (std::size_t j = 0; j < S; ++j) {
      if (!K[s * S + j]) continue;
      any = true;
      bool boundary = false;
      for (int a = 1; a < L.dim() && !boundary; ++a)
        for (int dlt : {-1, 1}) {
          int i = L.index(j, a) + dlt;
          if (i < 0 || i >= L.n(a)) {
            if (!L.periodic(a)) {
              boundary = true;
              break;
            }
            i = (i + L.n(a)) % L.n(a);
          }
          std::size_t nb = j + (i - L.index(j, a)) * L.stride(a);
          if (!K[s * S + nb]) {
            boundary = true;
            break;
          }
        }
      if (boundary) edge.push_back(j);
    }
    if (!any) continue;
    Scalar dist(S);
    parallel_for(S, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        if (K[s * S + j]) {
          dist[j] = 0;
          continue;
        }
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t q : edge) m = std::min(m, detail::spatial_distance(L, j, q));
        dist[j] = m;
      }
    });
    double reach = 0;
    const int step = dir == Direction::future ? 1 : -1;
    for (int m = s; m >= 0 && m < Nt; m += step) {
      if (m != s) reach += std::max(speeds[m], speeds[m - step]) * L.h(0);
      for (std::size_t j = 0; j < S; ++j)
        if (dist[j] <= reach + halo * (1 + 1e-12)) out.set(m * S + j);
    }
  }
  return out;
}

inline Region causal_cone(const Region& K, Direction dir, const MetricField& g, ConeOptions opt = {}) {
  require_same(K.lat, g.lattice());
  return causal_cone(K, dir, slice_speeds(g), opt);
}

// Domain of dependence of the discrete stencils: support spreads by one cell
// per axis per time step (Chebyshev in index space).
inline Region stencil_cone(const Region& K, Direction dir) {
  const Lattice& L = K.lat;
  const std::size_t S = L.slice_size();
  Region out(L);
  auto cheb = [&](std::size_t j1, std::size_t j2) {
    int m = 0;
    for (int a = 1; a < L.dim(); ++a) {
      int di = std::abs(L.index(j1, a) - L.index(j2, a));
      if (L.periodic(a)) di = std::min(di, L.n(a) - di);
      m = std::max(m, di);
    }
    return m;
  };
  for (int s = 0; s < L.n(0); ++s) {
    std::vector<std::size_t> pts;
    for (std::size_t j = 0; j < S; ++j)
      if (K[s * S + j]) pts.push_back(j);
    if (pts.empty()) continue;
    std::vector<int> dist(S);
    parallel_for(S, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        int m = std::numeric_limits<int>::max();
        for (std::size_t q : pts) m = std::min(m, cheb(j, q));
        dist[j] = m;
      }
    });
    const int step = dir == Direction::future ? 1 : -1;
    for (int m = s, k = 0; m >= 0 && m < L.n(0); m += step, ++k)
      for (std::size_t j = 0; j < S; ++j)
        if (dist[j] <= k) out.set(m * S + j);
  }
  return out;
}

// M_+ = M \ J_-(K) and M_- = M \ J_+(K), K the support of h.
struct RceRegions {
  Region plus, minus;
};

inline RceRegions rce_regions(const Region& K, const std::vector<double>& speeds) {
  if (K.empty()) return {Region(K.lat, true), Region(K.lat, true)};
  RceRegions r{causal_cone(K, Direction::past, speeds).complement(),
               causal_cone(K, Direction::future, speeds).complement()};
  if (r.plus.full_slices().empty() || r.minus.full_slices().empty())
    throw Error("perturbation too close to time boundary");
  return r;
}

// Cones use the larger of the cone speeds of g and g + h on each slice.
inline RceRegions rce_regions(const PerturbationField& h, const MetricField& g) {
  require_same(h.lattice(), g.lattice());
  Region K = nonzero_region(g.lattice(), h.comps());
  std::vector<double> c = slice_speeds(g);
  if (!K.empty()) {
    std::vector<double> ch = slice_speeds(metric_plus_comps(g, h, 1.0), g.lattice());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::max(c[i], ch[i]);
  }
  return rce_regions(K, c);
}

// ---------------------------------------------------------------- partitions

inline double smoothstep5(double u) {
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  return u * u * u * (u * (6 * u - 15) + 10);
}

// chi_a rises from 0 to 1 across [t1, t2]; chi_r = 1 - chi_a.
struct PartitionOfUnity {
  Lattice lat;
  double t1 = 0, t2 = 0;
  Scalar chi_a, chi_r;
};

inline PartitionOfUnity partition_of_unity(double t1, double t2, const Lattice& L) {
  const double dt = L.h(0), T = L.duration();
  const double tol = 1e-9 * dt;
  if (!(t1 > 0 && t1 < t2 && t2 < T)) throw Error("partition band must satisfy 0 < t1 < t2 < T");
  if (t1 < 2 * dt - tol || t2 > T - 2 * dt + tol) throw Error("partition band within 2 steps of the window ends");
  if (t2 - t1 < 4 * dt - tol) throw Error("band too narrow: width below 4 time steps");
  PartitionOfUnity p{L, t1, t2, Scalar(L.size()), Scalar(L.size())};
  for (std::size_t n = 0; n < L.size(); ++n) {
    double a = smoothstep5((L.coord(n, 0) - t1) / (t2 - t1));
    p.chi_a[n] = a;
    p.chi_r[n] = 1.0 - a;
  }
  return p;
}

// ---------------------------------------------------------------- admissibility

struct Admissibility {
  bool ok = true;
  std::string reason;
  double c_max = 0;
  explicit operator bool() const { return ok; }
};

// g + h Lorentzian everywhere and dt <= cfl * min(dx) / c_max.
inline Admissibility admissibility_check(const MetricField& g, const PerturbationField& h, double dt, double dx,
                                         double cfl = 0.5) {
  const Lattice& L = g.lattice();
  std::vector<Scalar> gh = metric_plus_comps(g, h, 1.0);
  Admissibility r;
  if (auto bad = lorentzian_violation(L, gh)) {
    r.ok = false;
    r.reason = "signature: " + *bad;
    return r;
  }
  for (double c : slice_speeds(gh, L)) r.c_max = std::max(r.c_max, c);
  if (dt > cfl * dx / r.c_max * (1 + 1e-12)) {
    r.ok = false;
    r.reason = "cfl: dt = " + std::to_string(dt) + " exceeds " + std::to_string(cfl) + " * dx / c_max with c_max = " +
               std::to_string(r.c_max);
  }
  return r;
}

inline Admissibility admissibility_check(const MetricField& g, const PerturbationField& h, double cfl = 0.5) {
  const Lattice& L = g.lattice();
  double dx = L.h(1);
  for (int a = 2; a < L.dim(); ++a) dx = std::min(dx, L.h(a));
  return admissibility_check(g, h, L.h(0), dx, cfl);
}

}  // namespace lcf
