#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace lcf {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

inline std::string node_label(const Lattice& L, std::size_t k) {
  std::ostringstream os;
  os << "(t=" << L.coord(k, 0) << ", x=" << L.coord(k, 1);
  if (L.dim() > 2) os << ", y=" << L.coord(k, 2);
  os << ")";
  return os.str();
}

// Generic component array; valence holds 'u' or 'd' per slot in written
// order and components are row-major over index tuples.
struct TensorField {
  Lattice lat;
  std::string valence;
  std::vector<Scalar> c;

  TensorField() = default;
  TensorField(const Lattice& L, std::string val) : lat(L), valence(std::move(val)) {
    std::size_t n = 1;
    for (std::size_t r = 0; r < valence.size(); ++r) n *= static_cast<std::size_t>(L.dim());
    c.assign(n, Scalar(L.size(), 0.0));
  }
  int rank() const { return static_cast<int>(valence.size()); }
  std::size_t flat(std::initializer_list<int> idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * static_cast<std::size_t>(lat.dim()) + static_cast<std::size_t>(i);
    return f;
  }
  Scalar& operator()(std::initializer_list<int> idx) { return c[flat(idx)]; }
  const Scalar& operator()(std::initializer_list<int> idx) const { return c[flat(idx)]; }
};

// Leading-minor Lorentzian test; returns a description of the first failing
// node, if any.
inline std::optional<std::string> lorentzian_violation(const Lattice& L,
                                                       const std::vector<Scalar>& g) {
  const int d = L.dim();
  for (std::size_t k = 0; k < L.size(); ++k) {
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = g[i * d + j][k];
    double det = m.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-10)
      return "singular metric at node " + node_label(L, k);
    if (!(m(0, 0) < 0)) return "g_tt >= 0 at node " + node_label(L, k);
    for (int r = 1; r < d; ++r)
      if (!(m.block(1, 1, r, r).determinant() > 0))
        return "spatial block not positive-definite at node " + node_label(L, k);
    if (!(det < 0)) return "signature not Lorentzian at node " + node_label(L, k);
  }
  return std::nullopt;
}

// Symmetric (0,2) metric, stored as d*d component arrays with the two halves
// holding identical data.
class MetricField {
 public:
  MetricField() = default;
  MetricField(const Lattice& L, std::vector<Scalar> comps) : lat_(L), g_(std::move(comps)) {
    const int d = L.dim();
    if (static_cast<int>(g_.size()) != d * d) throw Error("metric needs d*d components");
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < i; ++j) g_[i * d + j] = g_[j * d + i];
    if (auto bad = lorentzian_violation(L, g_)) throw Error(*bad);
  }
  const Lattice& lattice() const { return lat_; }
  int dim() const { return lat_.dim(); }
  const Scalar& comp(int i, int j) const { return g_[i * dim() + j]; }
  const std::vector<Scalar>& comps() const { return g_; }
  Mat at(std::size_t k) const {
    const int d = dim();
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = g_[i * d + j][k];
    return m;
  }

 private:
  Lattice lat_;
  std::vector<Scalar> g_;
};

// ---------------------------------------------------------------- bumps

// Compact polynomial bump (1 - q)^p with q = sum ((x_a - c_a) / w_a)^2.
struct PolyBump {
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> width{1, 1, 1};
  int power = 6;
  int dim = 2;

  double q(const std::array<double, 3>& x) const {
    double s = 0;
    for (int a = 0; a < dim; ++a) {
      double u = (x[a] - center[a]) / width[a];
      s += u * u;
    }
    return s;
  }
  double value(const std::array<double, 3>& x) const {
    double s = q(x);
    return s < 1 ? std::pow(1 - s, power) : 0.0;
  }
  double grad(const std::array<double, 3>& x, int i) const {
    double s = q(x);
    if (s >= 1) return 0;
    return -power * std::pow(1 - s, power - 1) * 2 * (x[i] - center[i]) / (width[i] * width[i]);
  }
  double hess(const std::array<double, 3>& x, int i, int j) const {
    double s = q(x);
    if (s >= 1) return 0;
    double wi = width[i] * width[i], wj = width[j] * width[j];
    double v = power * (power - 1) * std::pow(1 - s, power - 2) * 4 * (x[i] - center[i]) *
               (x[j] - center[j]) / (wi * wj);
    if (i == j) v -= power * std::pow(1 - s, power - 1) * 2 / wi;
    return v;
  }
};

inline std::array<double, 3> node_point(const Lattice& L, std::size_t k) {
  return {L.coord(k, 0), L.coord(k, 1), L.dim() > 2 ? L.coord(k, 2) : 0.0};
}

// ---------------------------------------------------------------- presets

inline MetricField minkowski(const Lattice& L) {
  const int d = L.dim();
  std::vector<Scalar> g(d * d, Scalar(L.size(), 0.0));
  for (int i = 0; i < d; ++i) std::fill(g[i * d + i].begin(), g[i * d + i].end(), i == 0 ? -1.0 : 1.0);
  return MetricField(L, std::move(g));
}

// g = -dt^2 + a(t)^2 sum dx_i^2
inline MetricField frw_metric(const Lattice& L, const std::function<double(double)>& a) {
  const int d = L.dim();
  std::vector<Scalar> g(d * d, Scalar(L.size(), 0.0));
  for (std::size_t k = 0; k < L.size(); ++k) {
    double s = a(L.coord(k, 0));
    g[0][k] = -1;
    for (int i = 1; i < d; ++i) g[i * d + i][k] = s * s;
  }
  return MetricField(L, std::move(g));
}

inline MetricField frw(const Lattice& L, double eps) {
  return frw_metric(L, [eps](double t) { return 1 + eps * t; });
}

inline int component_index(const std::string& c) {
  if (c == "t" || c == "tt" || c == "0" || c == "00") return 0;
  if (c == "x" || c == "xx" || c == "1" || c == "11") return 1;
  if (c == "y" || c == "yy" || c == "2" || c == "22") return 2;
  throw Error("unknown metric component '" + c + "'");
}

// Diagonal perturbation of Minkowski by amp * (1 - r^2)^6 in one component.
inline MetricField bump_metric(const Lattice& L, double amp, std::array<double, 3> center,
                               double width, int component) {
  const int d = L.dim();
  if (component < 0 || component >= d) throw Error("bump component out of range");
  PolyBump b{center, {width, width, width}, 6, d};
  std::vector<Scalar> g = minkowski(L).comps();
  for (std::size_t k = 0; k < L.size(); ++k)
    g[component * d + component][k] += amp * b.value(node_point(L, k));
  return MetricField(L, std::move(g));
}

// ---------------------------------------------------------------- pointwise

inline TensorField inverse_metric(const MetricField& g) {
  const Lattice& L = g.lattice();
  const int d = L.dim();
  TensorField out(L, "uu");
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      Mat inv = g.at(k).inverse();  // nonsingular by MetricField's invariant
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out.c[i * d + j][k] = 0.5 * (inv(i, j) + inv(j, i));
    }
  });
  return out;
}

inline Scalar volume_density(const MetricField& g) {
  const Lattice& L = g.lattice();
  Scalar v(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) v[k] = std::sqrt(std::abs(g.at(k).determinant()));
  return v;
}

// Gamma^k_ij = 1/2 g^{kl} (D_i g_lj + D_j g_il - D_l g_ij), stored as "udd"
// with tuple (k, i, j).
inline TensorField christoffel(const MetricField& g, const TensorField& ginv) {
  const Lattice& L = g.lattice();
  const int d = L.dim();
  std::vector<Scalar> dg(d * d * d);  // dg[l][i][j] = D_l g_ij
  for (int l = 0; l < d; ++l)
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        dg[(l * d + i) * d + j] = diff(L, l, g.comp(i, j));
        if (j != i) dg[(l * d + j) * d + i] = dg[(l * d + i) * d + j];
      }
  TensorField G(L, "udd");
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n)
      for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) {
            double s = 0;
            for (int l = 0; l < d; ++l) {
              double t = (dg[(i * d + l) * d + j][n] + dg[(j * d + i) * d + l][n]) -
                         dg[(l * d + i) * d + j][n];
              s += ginv.c[k * d + l][n] * t;
            }
            G.c[(k * d + i) * d + j][n] = 0.5 * s;
            G.c[(k * d + j) * d + i][n] = 0.5 * s;
          }
  });
  return G;
}

inline TensorField christoffel(const MetricField& g) { return christoffel(g, inverse_metric(g)); }

struct Curvature {
  TensorField C;      // C_ijk^l, tuple (i, j, k, l), valence "dddu"
  TensorField ricci;  // R_ik = C_ijk^j
  Scalar scalar;      // S = g^{ik} R_ik
};

// C_ijk^l = D_j Gamma^l_ik - D_i Gamma^l_jk + Gamma^m_ik Gamma^l_jm - Gamma^m_jk Gamma^l_im
inline Curvature curvature_ricci_scalar(const MetricField& g) {
  const Lattice& L = g.lattice();
  const int d = L.dim();
  TensorField gi = inverse_metric(g);
  TensorField G = christoffel(g, gi);
  auto Gam = [&](int l, int i, int k) -> const Scalar& { return G.c[(l * d + i) * d + k]; };
  std::vector<Scalar> dG(d * d * d * d);  // dG[a][l][i][k] = D_a Gamma^l_ik
  for (int a = 0; a < d; ++a)
    for (int l = 0; l < d; ++l)
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) dG[((a * d + l) * d + i) * d + k] = diff(L, a, Gam(l, i, k));
  Curvature out{TensorField(L, "dddu"), TensorField(L, "dd"), Scalar(L.size(), 0.0)};
  for (std::size_t n = 0; n < L.size(); ++n)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            double v = dG[((j * d + l) * d + i) * d + k][n] - dG[((i * d + l) * d + j) * d + k][n];
            for (int m = 0; m < d; ++m)
              v += Gam(m, i, k)[n] * Gam(l, j, m)[n] - Gam(m, j, k)[n] * Gam(l, i, m)[n];
            out.C.c[((i * d + j) * d + k) * d + l][n] = v;
          }
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      for (std::size_t n = 0; n < L.size(); ++n) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += out.C.c[((i * d + j) * d + k) * d + j][n];
        out.ricci.c[i * d + k][n] = s;
      }
  for (std::size_t n = 0; n < L.size(); ++n) {
    double s = 0;
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) s += gi.c[i * d + k][n] * out.ricci.c[i * d + k][n];
    out.scalar[n] = s;
  }
  return out;
}

enum class Musical { sharp, flat };

// Contracts one slot with g^{-1} (sharp, slot must be 'd') or g (flat, slot
// must be 'u').
inline TensorField raise_lower(const TensorField& w, int slot, Musical dir, const MetricField& g) {
  if (slot < 0 || slot >= w.rank()) throw Error("slot out of range");
  const char need = dir == Musical::sharp ? 'd' : 'u';
  if (w.valence[slot] != need) throw Error("slot valence does not match direction");
  const Lattice& L = w.lat;
  const int d = L.dim();
  TensorField gi;
  if (dir == Musical::sharp) gi = inverse_metric(g);
  const std::vector<Scalar>& m = dir == Musical::sharp ? gi.c : g.comps();
  TensorField out = w;
  out.valence[slot] = dir == Musical::sharp ? 'u' : 'd';
  std::size_t inner = 1;
  for (int r = slot + 1; r < w.rank(); ++r) inner *= static_cast<std::size_t>(d);
  const std::size_t total = w.c.size();
  for (std::size_t f = 0; f < total; ++f) {
    int i = static_cast<int>((f / inner) % static_cast<std::size_t>(d));
    std::size_t base = f - static_cast<std::size_t>(i) * inner;
    Scalar& o = out.c[f];
    for (std::size_t n = 0; n < L.size(); ++n) {
      double s = 0;
      for (int j = 0; j < d; ++j) s += m[i * d + j][n] * w.c[base + j * inner][n];
      o[n] = s;
    }
  }
  return out;
}

// ---------------------------------------------------------------- perturbations

struct SupportBox {
  bool empty = true;
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{-1, -1, -1};
  bool contains(const Lattice& L, std::size_t k) const {
    if (empty) return false;
    for (int a = 0; a < L.dim(); ++a) {
      int i = L.index(k, a);
      if (i < lo[a] || i > hi[a]) return false;
    }
    return true;
  }
};

// Compactly supported symmetric h_ij with a declared support box.
class PerturbationField {
 public:
  PerturbationField() = default;
  PerturbationField(const Lattice& L, std::vector<Scalar> comps, SupportBox box)
      : lat_(L), h_(std::move(comps)), box_(box) {
    const int d = L.dim();
    if (static_cast<int>(h_.size()) != d * d) throw Error("perturbation needs d*d components");
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < i; ++j) h_[i * d + j] = h_[j * d + i];
    if (!box_.empty) {
      for (int a = 0; a < d; ++a)
        if (box_.lo[a] < 3 || box_.hi[a] > L.n(a) - 4 || box_.lo[a] > box_.hi[a])
          throw Error("perturbation support box not strictly interior on axis " + std::to_string(a));
    }
    for (std::size_t k = 0; k < L.size(); ++k) {
      if (box_.contains(L, k)) continue;
      for (const auto& c : h_)
        if (c[k] != 0.0) throw Error("perturbation nonzero outside its support box at " + node_label(L, k));
    }
  }
  static PerturbationField zero(const Lattice& L) {
    return PerturbationField(L, std::vector<Scalar>(L.dim() * L.dim(), Scalar(L.size(), 0.0)), {});
  }
  const Lattice& lattice() const { return lat_; }
  const Scalar& comp(int i, int j) const { return h_[i * lat_.dim() + j]; }
  const std::vector<Scalar>& comps() const { return h_; }
  const SupportBox& box() const { return box_; }
  bool has_time_space_terms() const {
    for (int a = 1; a < lat_.dim(); ++a)
      for (double v : comp(0, a))
        if (v != 0.0) return true;
    return false;
  }
  PerturbationField scaled(double s) const {
    std::vector<Scalar> c = h_;
    for (auto& a : c)
      for (auto& v : a) v *= s;
    return PerturbationField(lat_, std::move(c), box_);
  }

 private:
  Lattice lat_;
  std::vector<Scalar> h_;
  SupportBox box_;
};

inline SupportBox box_of_bump(const Lattice& L, const PolyBump& b) {
  SupportBox box;
  box.empty = false;
  for (int a = 0; a < L.dim(); ++a) {
    box.lo[a] = static_cast<int>(std::floor((b.center[a] - b.width[a]) / L.h(a)));
    box.hi[a] = static_cast<int>(std::ceil((b.center[a] + b.width[a]) / L.h(a)));
  }
  return box;
}

// h_ij = h_ji = amp * bump, all other components zero.
inline PerturbationField bump_perturbation(const Lattice& L, double amp, const PolyBump& b, int i, int j) {
  const int d = L.dim();
  std::vector<Scalar> h(d * d, Scalar(L.size(), 0.0));
  Scalar v(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) v[k] = amp * b.value(node_point(L, k));
  h[i * d + j] = v;
  h[j * d + i] = v;
  return PerturbationField(L, std::move(h), box_of_bump(L, b));
}

inline std::vector<Scalar> metric_plus_comps(const MetricField& g, const PerturbationField& h, double s) {
  std::vector<Scalar> c = g.comps();
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t k = 0; k < c[a].size(); ++k) c[a][k] += s * h.comps()[a][k];
  return c;
}

inline MetricField metric_plus(const MetricField& g, const PerturbationField& h, double s = 1.0) {
  require_same(g.lattice(), h.lattice());
  return MetricField(g.lattice(), metric_plus_comps(g, h, s));
}

}  // namespace lcf
