#pragma once

#include <array>
#include <string>
#include <vector>

#include "solver.hpp"

namespace lcf {

// Generator plus its cached solution (e f, f_A f, or e_{Box_1} θ for EM).
struct SolutionVector {
  OperatorKind kind = OperatorKind::klein_gordon;
  FormField generator;
  FormField solution;
};

namespace detail {

// L2 norm of the first differences, used as the scale for coclosedness.
inline double gradient_scale(const FormField& w) {
  double s = 0;
  for (const auto& c : w.c)
    for (int a = 0; a < w.lat.dim(); ++a) {
      Scalar d = diff(w.lat, a, c);
      for (double v : d) s += v * v;
    }
  return std::sqrt(s * w.lat.cell_volume());
}

// L2 norm of the unmixed second differences of every component.
inline double hessian_scale(const FormField& w) {
  double s = 0;
  for (const auto& c : w.c)
    for (int a = 0; a < w.lat.dim(); ++a) {
      Scalar d = diff2(w.lat, a, c);
      for (double v : d) s += v * v;
    }
  return std::sqrt(s * w.lat.cell_volume());
}

inline void require_coclosed(const FormField& th, const Geometry& G, double tol) {
  const double sc = gradient_scale(th);
  if (sc == 0) return;
  const double r = interior_norm(codifferential(th, G), 0) / sc;
  if (r > tol) throw Error("non-coclosed generator: |delta theta| / |D theta| = " + std::to_string(r));
}

inline void require_contained(const Lattice& L) {
  if (L.mode() != Boundary::support_contained)
    throw Error("electromagnetic phase space needs support_contained mode (periodic space has nontrivial H^1)");
}

inline FieldOperator em_flow(const FieldOperator& P) {
  return FieldOperator::box_one(P.geometry_ptr(), 0.0);
}

}  // namespace detail

inline constexpr double coclosed_tol = 1e-8;

inline SolutionVector make_solution(const FieldOperator& P, FormField f) {
  SolutionVector s{P.kind(), std::move(f), {}};
  if (P.kind() == OperatorKind::maxwell) {
    detail::require_contained(P.lattice());
    detail::require_coclosed(s.generator, P.geometry(), coclosed_tol);
    FieldOperator B = detail::em_flow(P);
    s.solution = causal_propagator(B, s.generator);
  } else {
    s.solution = causal_propagator(P, s.generator);
  }
  return s;
}

// sigma(u, v) = (e f_1, f_2)_g.
inline double symplectic_form(const SolutionVector& u, const SolutionVector& v, const Geometry& G) {
  if (u.kind != v.kind) throw Error("kind mismatch in symplectic form");
  return global_pairing(u.solution, v.generator, G);
}

inline double symplectic_form(const FormField& f1, const FormField& f2, const FieldOperator& P) {
  if (f1.k != P.degree() || f2.k != P.degree()) throw Error("kind mismatch in symplectic form");
  if (P.kind() == OperatorKind::maxwell) throw Error("use em_symplectic_form for the electromagnetic field");
  return global_pairing(causal_propagator(P, f1), f2, P.geometry());
}

// sigma([e θ1], [e θ2]) = (e θ1, θ2)_g for coclosed generators.
inline double em_symplectic_form(const FormField& th1, const FormField& th2, const FieldOperator& P) {
  detail::require_contained(P.lattice());
  if (th1.k != 1 || th2.k != 1) throw Error("electromagnetic generators are 1-forms");
  detail::require_coclosed(th1, P.geometry(), coclosed_tol);
  detail::require_coclosed(th2, P.geometry(), coclosed_tol);
  return global_pairing(causal_propagator(detail::em_flow(P), th1), th2, P.geometry());
}

// sigma with an explicit representative of the class of the first argument.
inline double em_symplectic_form(const FormField& rep1, const FormField& th2, const Geometry& G) {
  detail::require_contained(G.lattice());
  detail::require_coclosed(th2, G, coclosed_tol);
  return global_pairing(rep1, th2, G);
}

// ---------------------------------------------------------------- kernel

struct KernelWitness {
  FormField v;        // e^a f
  double ratio = 0;   // |e^a f - e^r f| / |e^a f|
  double residual = 0;  // |P v - f| / |f|
};

inline KernelWitness kernel_witness(const FieldOperator& P, const FormField& f, double tol = 0.25) {
  if (!P.normally_hyperbolic()) throw Error("kernel_witness needs a normally hyperbolic operator");
  KernelWitness w;
  w.v = green(P, f, GreenKind::advanced);
  const double na = interior_norm(w.v), nf = interior_norm(f);
  if (na == 0 && nf == 0) return w;
  FormField er = green(P, f, GreenKind::retarded);
  w.ratio = interior_norm(w.v - er) / na;
  if (w.ratio > tol) throw Error("not in kernel: |e f| / |e^a f| = " + std::to_string(w.ratio));
  w.residual = interior_norm(apply_operator(P, w.v) - f) / nf;
  return w;
}

// ---------------------------------------------------------------- gauge

struct GaugeFix {
  FormField A;       // A + d f
  FormField f;       // gauge function
  double equation_residual = 0;
};

namespace detail {

// Solves delta d f = s for a scalar in the wide (composed) form, f = 0 on
// slices 0..2, enforcing the equation on slices 1..Nt-3. Requires g^{0a} = 0,
// so the newest slice enters only through the time-time term.
inline FormField wide_scalar_march(const FieldOperator& P, const Scalar& s) {
  const Geometry& G = P.geometry();
  const Lattice& L = G.lattice();
  const int d = L.dim(), Nt = L.n(0);
  const std::size_t S = L.slice_size();
  const double dt = L.h(0);
  const Scalar& vol = G.vol();
  FormField u(L, 0);
  Scalar& f = u.c[0];
  std::vector<Scalar> Df(d, Scalar(S)), flux(d, Scalar(S));
  Scalar spat(S), tmp(S);
  auto dtf = [&](int m, std::size_t j) {
    const std::size_t k = m * S + j;
    if (m == 0) return (-3 * f[k] + 4 * f[k + S] - f[k + 2 * S]) / (2 * dt);
    return (f[k + S] - f[k - S]) / (2 * dt);
  };
  for (int n = 1; n + 2 < Nt; ++n) {
    const std::size_t base = n * S;
    for (int a = 1; a < d; ++a) diff_range(L, a, f.data() + base, Df[a].data(), base, base + S, base);
    for (int a = 1; a < d; ++a)
      for (std::size_t j = 0; j < S; ++j) {
        double v = 0;
        for (int b = 1; b < d; ++b) v += G.gi(a, b, base + j) * Df[b][j];
        flux[a][j] = vol[base + j] * v;
      }
    std::fill(spat.begin(), spat.end(), 0.0);
    for (int a = 1; a < d; ++a) {
      diff_range(L, a, flux[a].data(), tmp.data(), base, base + S, base);
      for (std::size_t j = 0; j < S; ++j) spat[j] += tmp[j];
    }
    parallel_for(S, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        const std::size_t k = base + j, km = k - S, kp = k + S;
        const double qm = vol[km] * G.gi(0, 0, km) * dtf(n - 1, j);
        const double rhs = -vol[k] * s[k] - spat[j] + qm / (2 * dt);
        f[kp + S] = f[k] + 4 * dt * dt * rhs / (vol[kp] * G.gi(0, 0, kp));
      }
    });
    finalize_slice(P, u, n + 2);
  }
  return u;
}

}  // namespace detail

// A' = A + d f with Box_0 f = -delta A and zero data at the initial slices.
// The gauge function is marched in the composed form delta d, which makes
// delta A' vanish to rounding on slices 1..Nt-3.
inline GaugeFix lorenz_gauge_fix(const FormField& A, const FieldOperator& P, double tol = 0.05) {
  if (A.k != 1) throw Error("lorenz_gauge_fix acts on 1-forms");
  const Geometry& G = P.geometry();
  GaugeFix out;
  const double hs = detail::hessian_scale(A);
  out.equation_residual = hs == 0 ? 0 : interior_norm(codifferential(exterior_derivative(A), G)) / hs;
  if (out.equation_residual > tol)
    throw Error("field-equation residual too large for gauge fixing: " + std::to_string(out.equation_residual));
  FieldOperator B0 = FieldOperator::klein_gordon(P.geometry_ptr(), 0.0);
  detail::require_evolvable(B0);
  // Far tails of A sit at the flush level; delta divides them by a spacing and
  // the march integrates them twice in time.
  const double T = A.lat.duration();
  B0.options.halo_floor = B0.options.halo_tol * interior_max(A, 0) * T * T / A.lat.h(1);
  FormField src = -1.0 * codifferential(A, G);
  out.f = detail::wide_scalar_march(B0, src.c[0]);
  out.A = A + exterior_derivative(out.f);
  return out;
}

// ---------------------------------------------------------------- translations

// Component-wise shift by whole cells along every axis; periodic spatial axes
// wrap, other axes must keep the support inside the window.
inline FormField translation_pushforward(const FormField& f, std::array<int, 3> shift) {
  const Lattice& L = f.lat;
  FormField out(L, f.k);
  for (std::size_t n = 0; n < L.size(); ++n) {
    bool any = false;
    for (const auto& c : f.c) any = any || c[n] != 0.0;
    if (!any) continue;
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < L.dim(); ++a) {
      int i = L.index(n, a) + shift[a];
      if (L.periodic(a)) i = ((i % L.n(a)) + L.n(a)) % L.n(a);
      else if (i < 0 || i >= L.n(a)) throw Error("shift pushes support out of the interior");
      idx[a] = i;
    }
    std::size_t m = L.node(idx[0], idx[1], idx[2]);
    if (L.in_halo(m)) throw Error("shift pushes support out of the interior");
    for (int a = 0; a < f.ncomp(); ++a) out.c[a][m] = f.c[a][n];
  }
  return out;
}

// ---------------------------------------------------------------- probes

struct ProbeMatrix {
  std::vector<std::vector<double>> sigma;
  double antisymmetry_defect = 0;  // max |s_ij + s_ji|
  double nondegeneracy_margin = 0;  // min_i max_j |s_ij| / defect
};

inline ProbeMatrix probe_matrix(const std::vector<SolutionVector>& probes, const Geometry& G) {
  const std::size_t n = probes.size();
  ProbeMatrix M;
  M.sigma.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) M.sigma[i][j] = symplectic_form(probes[i], probes[j], G);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      M.antisymmetry_defect = std::max(M.antisymmetry_defect, std::abs(M.sigma[i][j] + M.sigma[j][i]));
  M.nondegeneracy_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0;
    for (std::size_t j = 0; j < n; ++j) best = std::max(best, std::abs(M.sigma[i][j]));
    M.nondegeneracy_margin = std::min(M.nondegeneracy_margin, best / std::max(M.antisymmetry_defect, 1e-300));
  }
  return M;
}

}  // namespace lcf
