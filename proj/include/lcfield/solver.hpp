#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "causal.hpp"
#include "forms.hpp"

namespace lcf {

enum class OperatorKind { klein_gordon, box_one, proca, maxwell };
enum class GreenKind { advanced, retarded };
enum class MarchDirection { forward, backward };

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::klein_gordon: return "klein_gordon";
    case OperatorKind::box_one: return "box_one";
    case OperatorKind::proca: return "proca";
    case OperatorKind::maxwell: return "maxwell";
  }
  return "?";
}

struct SolverOptions {
  double cfl = 0.5;
  double halo_tol = 1e-10;  // relative size below which halo values are flushed
  double halo_floor = 0;    // absolute size below which halo values are flushed
};

// Wave-type operator on a fixed geometry. Copies share the cached marching
// coefficients.
class FieldOperator {
 public:
  static FieldOperator klein_gordon(GeometryPtr g, double m) { return FieldOperator(OperatorKind::klein_gordon, g, m); }
  static FieldOperator box_one(GeometryPtr g, double m) { return FieldOperator(OperatorKind::box_one, g, m); }
  static FieldOperator proca(GeometryPtr g, double m) {
    if (!(m > 0)) throw Error("proca operator needs mass m > 0");
    return FieldOperator(OperatorKind::proca, g, m);
  }
  static FieldOperator maxwell(GeometryPtr g) { return FieldOperator(OperatorKind::maxwell, g, 0.0); }

  OperatorKind kind() const { return kind_; }
  double mass() const { return m_; }
  const Geometry& geometry() const { return *g_; }
  const GeometryPtr& geometry_ptr() const { return g_; }
  const Lattice& lattice() const { return g_->lattice(); }
  int degree() const { return kind_ == OperatorKind::klein_gordon ? 0 : 1; }
  bool normally_hyperbolic() const { return kind_ == OperatorKind::klein_gordon || kind_ == OperatorKind::box_one; }

  SolverOptions options;

  // Narrow coefficient form of the normally hyperbolic operator used for
  // marching: Box_0 + m^2 for KG, Box_1 + m^2 for the 1-form kinds (m = 0 for
  // Maxwell, whose Green operators act through the Box_1 flow).
  const CoefficientOperator& principal() const {
    std::call_once(cache_->once, [&] {
      cache_->P = kind_ == OperatorKind::klein_gordon ? CoefficientOperator::klein_gordon(*g_, m_)
                                                      : CoefficientOperator::box_one(*g_, m_);
    });
    return *cache_->P;
  }

  // Largest cone speed over the lattice.
  double cone_speed_max() const {
    std::call_once(cache_->speed_once, [&] {
      double c = 0;
      for (double v : slice_speeds(g_->metric())) c = std::max(c, v);
      cache_->c_max = c;
    });
    return cache_->c_max;
  }

 private:
  struct Cache {
    std::once_flag once, speed_once;
    std::optional<CoefficientOperator> P;
    double c_max = 0;
  };
  FieldOperator(OperatorKind k, GeometryPtr g, double m) : kind_(k), g_(std::move(g)), m_(m), cache_(std::make_shared<Cache>()) {
    if (m < 0) throw Error("mass must be non-negative");
  }
  OperatorKind kind_;
  GeometryPtr g_;
  double m_;
  std::shared_ptr<Cache> cache_;
};

// Discrete P u with the module-level calculus: Box_k + m^2, delta d + m^2 or
// delta d.
inline FormField apply_operator(const FieldOperator& P, const FormField& u) {
  if (u.k != P.degree()) throw Error("degree mismatch: operator acts on " + std::to_string(P.degree()) + "-forms");
  const Geometry& G = P.geometry();
  FormField r = P.kind() == OperatorKind::klein_gordon || P.kind() == OperatorKind::box_one
                    ? box_k(u, G)
                    : codifferential(exterior_derivative(u), G);
  if (P.mass() != 0) r += (P.mass() * P.mass()) * u;
  return r;
}

// ---------------------------------------------------------------- marching

namespace detail {

inline void require_evolvable(const FieldOperator& P) {
  const Lattice& L = P.lattice();
  if (P.principal().has_time_space_terms())
    throw Error("time-space metric terms (g^{0a} != 0) are not supported in evolution");
  double dx = L.h(1);
  for (int a = 2; a < L.dim(); ++a) dx = std::min(dx, L.h(a));
  const double c = P.cone_speed_max();
  if (L.h(0) > P.options.cfl * dx / c * (1 + 1e-12))
    throw Error("cfl: dt = " + std::to_string(L.h(0)) + " exceeds " + std::to_string(P.options.cfl) +
                " * dx / c_max with c_max = " + std::to_string(c));
}

// Spatial part of the narrow operator on slice n: everything except the
// -g^{00} D_tt and B^0 D_t terms. Results land in out[a][k] for k on slice n.
class SliceKernel {
 public:
  explicit SliceKernel(const CoefficientOperator& P)
      : P_(P), L_(P.lattice()), d_(P.dim()), nc_(P.ncomp()) {
    const std::size_t S = L_.slice_size();
    first_.assign(nc_ * d_, Scalar(S));
    second_.assign(nc_ * d_ * d_, Scalar(S));
    for (int a = 1; a < d_; ++a)
      for (int b = a + 1; b < d_; ++b)
        for (std::size_t k = 0; k < L_.size(); ++k)
          if (P.gi(a, b, k) != 0.0) mixed_ = true;
  }

  void apply(const FormField& u, int n, std::vector<Scalar>& out) {
    const std::size_t S = L_.slice_size(), b0 = n * S, e0 = b0 + S;
    for (int c = 0; c < nc_; ++c) {
      const double* in = u.c[c].data() + b0;
      for (int a = 1; a < d_; ++a) {
        diff_range(L_, a, in, first_[c * d_ + a].data(), b0, e0, b0);
        diff2_range(L_, a, in, second_[(c * d_ + a) * d_ + a].data(), b0, e0, b0);
      }
      if (mixed_)
        for (int a = 1; a < d_; ++a)
          for (int b = a + 1; b < d_; ++b)
            diff_range(L_, a, first_[c * d_ + b].data(), second_[(c * d_ + a) * d_ + b].data(), b0, e0, b0);
    }
    parallel_for(S, [&](std::size_t bb, std::size_t ee) {
      for (std::size_t k = b0 + bb; k < b0 + ee; ++k)
        for (int a = 0; a < nc_; ++a) {
          double s = 0;
          const std::size_t j0 = k - b0;
          for (int i = 1; i < d_; ++i) {
            s -= P_.gi(i, i, k) * second_[(a * d_ + i) * d_ + i][j0];
            if (mixed_)
              for (int j = i + 1; j < d_; ++j) s -= 2 * P_.gi(i, j, k) * second_[(a * d_ + i) * d_ + j][j0];
          }
          for (int b = 0; b < nc_; ++b) {
            for (int i = 1; i < d_; ++i) s += P_.B(i, a, b, k) * first_[b * d_ + i][j0];
            s += P_.C(a, b, k) * u.c[b][k];
          }
          out[a][k] = s;
        }
    });
  }

 private:
  const CoefficientOperator& P_;
  const Lattice& L_;
  int d_, nc_;
  bool mixed_ = false;
  std::vector<Scalar> first_, second_;
};

inline void finalize_slice(const FieldOperator& P, FormField& u, int n) {
  const Lattice& L = u.lat;
  const std::size_t S = L.slice_size();
  double mx = 0;
  for (const auto& c : u.c)
    for (std::size_t k = n * S; k < (n + 1) * S; ++k) {
      if (!std::isfinite(c[k])) throw Error("non-finite value at slice " + std::to_string(n));
      mx = std::max(mx, std::abs(c[k]));
    }
  if (mx > 1e150) throw Error("overflow at slice " + std::to_string(n));
  if (L.mode() != Boundary::support_contained) return;
  for (auto& c : u.c)
    for (std::size_t k = n * S; k < (n + 1) * S; ++k)
      if (L.in_halo(k) && c[k] != 0.0) {
        if (std::abs(c[k]) > std::max(P.options.halo_tol * mx, P.options.halo_floor))
          throw Error("solution reached the boundary halo at slice " + std::to_string(n) + ", " + node_label(L, k));
        c[k] = 0.0;
      }
}

// Fills slices beyond the two given ones by enforcing the narrow equation
// (P u)^n = f^n at every interior slice n. Time-derivative terms are centred
// and solved pointwise.
inline void march(const FieldOperator& P, const FormField& f, FormField& u, int start, MarchDirection dir) {
  const CoefficientOperator& C = P.principal();
  const Lattice& L = u.lat;
  const int Nt = L.n(0), nc = C.ncomp();
  const std::size_t S = L.slice_size();
  const double dt = L.h(0);
  SliceKernel kernel(C);
  std::vector<Scalar> sp(nc, Scalar(L.size()));
  const bool fwd = dir == MarchDirection::forward;
  const double sgn = fwd ? 1.0 : -1.0;
  // forward: start, start+1 given; backward: start, start-1 given
  for (int n = fwd ? start + 1 : start - 1; fwd ? n + 1 < Nt : n - 1 >= 0; n += fwd ? 1 : -1) {
    const int nn = fwd ? n + 1 : n - 1, np = fwd ? n - 1 : n + 1;
    kernel.apply(u, n, sp);
    parallel_for(S, [&](std::size_t bb, std::size_t ee) {
      Mat M(nc, nc);
      Vec r(nc);
      for (std::size_t j = bb; j < ee; ++j) {
        const std::size_t k = n * S + j, kn = nn * S + j, kp = np * S + j;
        const double w = -C.gi(0, 0, k) / (dt * dt);
        for (int a = 0; a < nc; ++a) {
          double s = f.c[a][k] - sp[a][k] + w * (2 * u.c[a][k] - u.c[a][kp]);
          for (int b = 0; b < nc; ++b) {
            const double B0 = C.B(0, a, b, k) / (2 * dt);
            s += sgn * B0 * u.c[b][kp];
            M(a, b) = (a == b ? w : 0.0) + sgn * B0;
          }
          r(a) = s;
        }
        if (nc == 1) {
          u.c[0][kn] = r(0) / M(0, 0);
        } else {
          Vec x = M.partialPivLu().solve(r);
          for (int a = 0; a < nc; ++a) u.c[a][kn] = x(a);
        }
      }
    });
    finalize_slice(P, u, nn);
  }
}

}  // namespace detail

// The narrow operator inverted by the march, -g^{00} D_tt + B^0 D_t + (spatial
// part), on slices 1..Nt-2; zero on the end slices.
inline FormField apply_marching_operator(const FieldOperator& P, const FormField& u) {
  if (u.k != P.degree()) throw Error("degree mismatch: operator acts on " + std::to_string(P.degree()) + "-forms");
  const CoefficientOperator& C = P.principal();
  const Lattice& L = u.lat;
  const int Nt = L.n(0), nc = C.ncomp();
  const std::size_t S = L.slice_size();
  const double dt = L.h(0);
  detail::SliceKernel kernel(C);
  FormField out(L, P.degree());
  for (int n = 1; n + 1 < Nt; ++n) {
    kernel.apply(u, n, out.c);
    parallel_for(S, [&](std::size_t bb, std::size_t ee) {
      for (std::size_t j = bb; j < ee; ++j) {
        const std::size_t k = n * S + j;
        const double w = -C.gi(0, 0, k) / (dt * dt);
        for (int a = 0; a < nc; ++a) {
          double s = w * (u.c[a][k + S] - 2 * u.c[a][k] + u.c[a][k - S]);
          for (int b = 0; b < nc; ++b) s += C.B(0, a, b, k) / (2 * dt) * (u.c[b][k + S] - u.c[b][k - S]);
          out.c[a][k] += s;
        }
      }
    });
  }
  return out;
}

namespace detail {

inline std::pair<int, int> slice_support(const FormField& f) {
  const Lattice& L = f.lat;
  const std::size_t S = L.slice_size();
  int lo = -1, hi = -1;
  for (int n = 0; n < L.n(0); ++n) {
    bool any = false;
    for (const auto& c : f.c)
      for (std::size_t k = n * S; k < (n + 1) * S && !any; ++k) any = c[k] != 0.0;
    if (any) {
      if (lo < 0) lo = n;
      hi = n;
    }
  }
  return {lo, hi};
}

}  // namespace detail

// Cauchy data on slice n0: value and unit-normal derivative, one slice-sized
// array per component.
struct CauchyData {
  int n0 = 0;
  std::vector<Scalar> u0, u1;
};

inline CauchyData zero_data(const FieldOperator& P, int n0) {
  const int nc = n_components(P.lattice().dim(), P.degree());
  return {n0, std::vector<Scalar>(nc, Scalar(P.lattice().slice_size(), 0.0)),
          std::vector<Scalar>(nc, Scalar(P.lattice().slice_size(), 0.0))};
}

// Marches from Cauchy data on slice n0 in one time direction; slices on the
// other side of n0 are left at zero. The neighbouring slice comes from a
// second-order Taylor step with u_tt taken from the equation.
inline FormField solve_cauchy(const FieldOperator& P, const FormField& f, const CauchyData& data,
                              MarchDirection dir) {
  const Lattice& L = P.lattice();
  require_same(L, f.lat);
  if (f.k != P.degree()) throw Error("degree mismatch between operator and source");
  const int Nt = L.n(0), n0 = data.n0;
  const int nc = n_components(L.dim(), P.degree());
  const std::size_t S = L.slice_size();
  if (static_cast<int>(data.u0.size()) != nc || static_cast<int>(data.u1.size()) != nc)
    throw Error("Cauchy data has the wrong number of components");
  for (int a = 0; a < nc; ++a)
    if (data.u0[a].size() != S || data.u1[a].size() != S) throw Error("Cauchy data must be slice-sized");
  if (n0 < 0 || n0 >= Nt) throw Error("Cauchy slice out of range");
  const bool fwd = dir == MarchDirection::forward;
  if ((fwd && n0 > Nt - 2) || (!fwd && n0 < 1)) throw Error("no room to march from the Cauchy slice");
  detail::require_evolvable(P);
  f.check_halo();

  const CoefficientOperator& C = P.principal();
  FormField u(L, P.degree());
  const double dt = L.h(0);
  for (int a = 0; a < nc; ++a)
    for (std::size_t j = 0; j < S; ++j) u.c[a][n0 * S + j] = data.u0[a][j];
  detail::finalize_slice(P, u, n0);

  // u_t = u1 * sqrt(-g_00), then u_tt from the equation on slice n0.
  std::vector<Scalar> ut(nc, Scalar(S)), sp(nc, Scalar(L.size()));
  const MetricField& g = P.geometry().metric();
  for (int a = 0; a < nc; ++a)
    for (std::size_t j = 0; j < S; ++j) ut[a][j] = data.u1[a][j] * std::sqrt(-g.comp(0, 0)[n0 * S + j]);
  detail::SliceKernel(C).apply(u, n0, sp);
  const int n1 = fwd ? n0 + 1 : n0 - 1;
  const double step = fwd ? dt : -dt;
  for (std::size_t j = 0; j < S; ++j) {
    const std::size_t k = n0 * S + j;
    const double w = -C.gi(0, 0, k);
    for (int a = 0; a < nc; ++a) {
      double s = f.c[a][k] - sp[a][k];
      for (int b = 0; b < nc; ++b) s -= C.B(0, a, b, k) * ut[b][j];
      const double utt = s / w;
      u.c[a][n1 * S + j] = u.c[a][k] + step * ut[a][j] + 0.5 * dt * dt * utt;
    }
  }
  detail::finalize_slice(P, u, n1);
  detail::march(P, f, u, n0, dir);
  return u;
}

namespace detail {

// Green operator of the marching (normally hyperbolic) form, for any kind.
inline FormField green_flow(const FieldOperator& P, const FormField& f, GreenKind kind, int start = -1) {
  const Lattice& L = P.lattice();
  require_same(L, f.lat);
  if (f.k != P.degree()) throw Error("degree mismatch between operator and source");
  const int Nt = L.n(0);
  auto [lo, hi] = slice_support(f);
  FormField u(L, P.degree());
  if (lo < 0) return u;
  if (lo < 2 || hi > Nt - 3)
    throw Error("source support outside the Green window: slices " + std::to_string(lo) + ".." +
                std::to_string(hi) + " not within [2, " + std::to_string(Nt - 3) + "]");
  require_evolvable(P);
  f.check_halo();
  if (kind == GreenKind::advanced) {
    int s = start < 0 ? 0 : start;
    if (s + 1 > lo) throw Error("Green start slice must precede the source");
    march(P, f, u, s, MarchDirection::forward);
  } else {
    int s = start < 0 ? Nt - 1 : start;
    if (s - 1 < hi) throw Error("Green start slice must follow the source");
    march(P, f, u, s, MarchDirection::backward);
  }
  return u;
}

}  // namespace detail

// e^a f (zero before supp f) or e^r f (zero after supp f). `start` selects the
// slice where the zero data is placed (default: the window end).
inline FormField green(const FieldOperator& P, const FormField& f, GreenKind kind, int start = -1) {
  if (!P.normally_hyperbolic())
    throw Error(std::string("green: ") + to_string(P.kind()) + " is not normally hyperbolic; use proca_green or box_one");
  return detail::green_flow(P, f, kind, start);
}

// f^{a/r} = e^{a/r}_{Box_1 + m^2} (id + m^{-2} d delta).
inline FormField proca_green(const FieldOperator& P, const FormField& f, GreenKind kind) {
  if (P.kind() != OperatorKind::proca) throw Error("proca_green needs a proca operator");
  const Geometry& G = P.geometry();
  FormField src = f;
  FormField dd = exterior_derivative(codifferential(f, G));
  src += (1.0 / (P.mass() * P.mass())) * dd;
  return detail::green_flow(P, src, kind);
}

inline FormField causal_propagator(const FieldOperator& P, const FormField& f) {
  if (P.kind() == OperatorKind::proca) return proca_green(P, f, GreenKind::advanced) - proca_green(P, f, GreenKind::retarded);
  if (!P.normally_hyperbolic()) throw Error("causal_propagator: maxwell has no Green operators; use box_one(0)");
  return green(P, f, GreenKind::advanced) - green(P, f, GreenKind::retarded);
}

// Single-node delta at p scaled so that sum(delta * w * sqrt|g|) * cell = w(p).
inline FormField discrete_delta(const FieldOperator& P, std::size_t p, int comp = 0) {
  const Lattice& L = P.lattice();
  for (int a = 0; a < L.dim(); ++a) {
    int i = L.index(p, a);
    int margin = a == 0 ? 3 : (L.mode() == Boundary::support_contained ? Lattice::halo + 3 : 3);
    if (i < margin || i > L.n(a) - 1 - margin) throw Error("node too close to boundary: " + node_label(L, p));
  }
  FormField d(L, P.degree());
  if (comp < 0 || comp >= d.ncomp()) throw Error("component out of range");
  d.c[comp][p] = 1.0 / (L.cell_volume() * P.geometry().vol()[p]);
  return d;
}

inline FormField fundamental_solution(const FieldOperator& P, std::size_t p, GreenKind kind, int comp = 0) {
  return green(P, discrete_delta(P, p, comp), kind);
}

// ---------------------------------------------------------------- diagnostics

// Euclidean component norm over slices [margin, Nt-1-margin], weighted by the
// cell volume.
inline double interior_norm(const FormField& w, int margin = 2) {
  const Lattice& L = w.lat;
  const std::size_t S = L.slice_size();
  double s = 0;
  for (const auto& c : w.c)
    for (std::size_t k = margin * S; k < (L.n(0) - margin) * S; ++k) s += c[k] * c[k];
  return std::sqrt(s * L.cell_volume());
}

inline double interior_max(const FormField& w, int margin = 2) {
  const Lattice& L = w.lat;
  const std::size_t S = L.slice_size();
  double m = 0;
  for (const auto& c : w.c)
    for (std::size_t k = margin * S; k < (L.n(0) - margin) * S; ++k) m = std::max(m, std::abs(c[k]));
  return m;
}

// Discrete energy at half steps n + 1/2 for a scalar field on a constant
// diagonal metric; conserved exactly by the marching scheme there.
inline std::vector<double> energy(const FieldOperator& P, const FormField& u) {
  const Lattice& L = u.lat;
  const Geometry& G = P.geometry();
  const std::size_t S = L.slice_size();
  const double dt = L.h(0), m2 = P.mass() * P.mass(), cell = L.cell_volume() / dt;
  std::vector<double> E;
  for (int n = 0; n + 1 < L.n(0); ++n) {
    double e = 0;
    for (const auto& c : u.c)
      for (std::size_t j = 0; j < S; ++j) {
        const std::size_t k = n * S + j, kn = k + S;
        const double v = (c[kn] - c[k]) / dt;
        double s = -G.gi(0, 0, k) * v * v + m2 * c[kn] * c[k];
        for (int a = 1; a < L.dim(); ++a) {
          const int i = L.index(k, a);
          std::ptrdiff_t off;
          if (i + 1 < L.n(a)) off = static_cast<std::ptrdiff_t>(L.stride(a));
          else if (L.periodic(a)) off = -static_cast<std::ptrdiff_t>((L.n(a) - 1) * L.stride(a));
          else continue;
          const double h = L.h(a);
          s += G.gi(a, a, k) * (c[kn + off] - c[kn]) / h * (c[k + off] - c[k]) / h;
        }
        e += 0.5 * s * G.vol()[k];
      }
    E.push_back(e * cell);
  }
  return E;
}

}  // namespace lcf
