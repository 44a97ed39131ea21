#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causal.hpp"
#include "symplectic.hpp"

namespace lcf {

// ---------------------------------------------------------------- families

enum class FamilyKind { generic_bump, lie_derivative };

inline const char* to_string(FamilyKind k) { return k == FamilyKind::generic_bump ? "generic_bump" : "lie_derivative"; }

// h^s = s B for |s| <= s_max. The lie kind keeps the lowered generator X_i with
// B_ij = D_i X_j + D_j X_i (constant base metric).
struct PerturbationFamily {
  MetricField g;
  PerturbationField B;
  double s_max = 0;
  FamilyKind kind = FamilyKind::generic_bump;
  std::vector<Scalar> X;

  PerturbationField at(double s) const {
    if (std::abs(s) > s_max * (1 + 1e-12)) throw Error("s outside the declared family interval");
    return B.scaled(s);
  }
};

inline PerturbationFamily make_family(const MetricField& g, PerturbationField B, double s_max, double cfl = 0.5) {
  for (double s : {s_max, -s_max}) {
    Admissibility a = admissibility_check(g, B.scaled(s), cfl);
    if (!a.ok) throw Error("family not admissible at s = " + std::to_string(s) + ": " + a.reason);
  }
  return {g, std::move(B), s_max, FamilyKind::generic_bump, {}};
}

inline bool is_constant(const MetricField& g) {
  for (const auto& c : g.comps())
    for (double v : c)
      if (v != c.front()) return false;
  return true;
}

// X_0 = -d_t Phi, X_a = d_a Phi, so B_00 = -2 Phi_tt, B_0a = 0, B_ab = 2 Phi_ab.
inline PerturbationFamily lie_family(const MetricField& g, const PolyBump& phi, double amp, double s_max,
                                     double cfl = 0.5) {
  const Lattice& L = g.lattice();
  if (!is_constant(g)) throw Error("lie_derivative families need a constant base metric");
  const int d = L.dim();
  std::vector<Scalar> B(d * d, Scalar(L.size(), 0.0)), X(d, Scalar(L.size(), 0.0));
  for (std::size_t k = 0; k < L.size(); ++k) {
    auto p = node_point(L, k);
    for (int a = 0; a < d; ++a) X[a][k] = amp * (a == 0 ? -1.0 : 1.0) * phi.grad(p, a);
    B[0][k] = -2 * amp * phi.hess(p, 0, 0);
    for (int a = 1; a < d; ++a)
      for (int b = 1; b < d; ++b) B[a * d + b][k] = 2 * amp * phi.hess(p, a, b);
  }
  PerturbationFamily f = make_family(g, PerturbationField(L, std::move(B), box_of_bump(L, phi)), s_max, cfl);
  f.kind = FamilyKind::lie_derivative;
  f.X = std::move(X);
  return f;
}

// ---------------------------------------------------------------- Christoffel variation

struct ChristoffelVariation {
  int d = 0;
  std::vector<Scalar> dG;  // (k, i, j)
  std::vector<Scalar> C;   // g^{ij} dGamma^k_ij
  const Scalar& at(int k, int i, int j) const { return dG[(k * d + i) * d + j]; }
};

// Exact linearization of the discrete Christoffel symbols:
// dGamma^k_ij = 1/2 g^{kl}(D_i B_lj + D_j B_il - D_l B_ij) - B^k_m Gamma^m_ij,
// which equals the covariant form 1/2 g^{kl}(nabla_i B_lj + nabla_j B_il - nabla_l B_ij).
inline ChristoffelVariation delta_christoffel(const std::vector<Scalar>& B, const Geometry& G) {
  const Lattice& L = G.lattice();
  const int d = L.dim();
  std::vector<Scalar> dB(d * d * d);  // (l, i, j) = D_l B_ij
  for (int l = 0; l < d; ++l)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) dB[(l * d + i) * d + j] = diff(L, l, B[i * d + j]);
  ChristoffelVariation v;
  v.d = d;
  v.dG.assign(d * d * d, Scalar(L.size(), 0.0));
  v.C.assign(d, Scalar(L.size(), 0.0));
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      double Bu[3][3];  // B^k_m
      for (int k = 0; k < d; ++k)
        for (int m = 0; m < d; ++m) {
          double s = 0;
          for (int l = 0; l < d; ++l) s += G.gi(k, l, n) * B[l * d + m][n];
          Bu[k][m] = s;
        }
      for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            double s = 0;
            for (int l = 0; l < d; ++l)
              s += 0.5 * G.gi(k, l, n) *
                   (dB[(i * d + l) * d + j][n] + dB[(j * d + i) * d + l][n] - dB[(l * d + i) * d + j][n]);
            for (int m = 0; m < d; ++m) s -= Bu[k][m] * G.Gam(m, i, j)[n];
            v.dG[(k * d + i) * d + j][n] = s;
          }
      for (int k = 0; k < d; ++k) {
        double s = 0;
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) s += G.gi(i, j, n) * v.dG[(k * d + i) * d + j][n];
        v.C[k][n] = s;
      }
    }
  });
  return v;
}

inline ChristoffelVariation delta_christoffel(const PerturbationField& B, const Geometry& G) {
  require_same(B.lattice(), G.lattice());
  return delta_christoffel(B.comps(), G);
}

namespace detail {

// nabla_a B_lj = D_a B_lj - Gamma^m_al B_mj - Gamma^m_aj B_lm, tuple (a, l, j).
inline std::vector<Scalar> covariant_derivative_sym(const std::vector<Scalar>& B, const Geometry& G) {
  const Lattice& L = G.lattice();
  const int d = L.dim();
  std::vector<Scalar> out(d * d * d);
  for (int a = 0; a < d; ++a)
    for (int l = 0; l < d; ++l)
      for (int j = 0; j < d; ++j) {
        Scalar s = diff(L, a, B[l * d + j]);
        for (std::size_t n = 0; n < L.size(); ++n)
          for (int m = 0; m < d; ++m) s[n] -= G.Gam(m, a, l)[n] * B[m * d + j][n] + G.Gam(m, a, j)[n] * B[l * d + m][n];
        out[(a * d + l) * d + j] = std::move(s);
      }
  return out;
}

// Full antisymmetric components F_ij of a 2-form, tuple (i, j).
inline std::vector<Scalar> full_two_form(const FormField& F) {
  const Lattice& L = F.lat;
  const int d = L.dim();
  std::vector<Scalar> out(d * d, Scalar(L.size(), 0.0));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const Scalar& c = F.c[subset_pos(d, {i, j})];
      out[i * d + j] = c;
      for (std::size_t n = 0; n < L.size(); ++n) out[j * d + i][n] = -c[n];
    }
  return out;
}

inline double raise2(const Geometry& G, const std::vector<Scalar>& T, int a, int b, std::size_t n) {
  const int d = G.dim();
  double s = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s += G.gi(a, i, n) * G.gi(b, j, n) * T[i * d + j][n];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------- identities

struct IdentityDefects {
  double kg = 0;        // max |(i)| over slices [2, Nt-3]
  double kg_scale = 0;  // max |C^k|
  double proca = 0;     // max |(ii)|
  double proca_scale = 0;
};

// (i)  g^{ij} dGamma^k_ij - g^{jk} nabla^i B_ij + 1/2 g^{kl} D_l(tr B), with the
//      divergence in density form;
// (ii) dGamma^k_aj Pi^a_k - Pi^{al} nabla_a B_lj for an antisymmetric Pi.
inline IdentityDefects geometric_identity_check(const std::vector<Scalar>& B, const Geometry& G,
                                                const std::vector<Scalar>& Pi) {
  const Lattice& L = G.lattice();
  const int d = L.dim();
  const std::size_t S = L.slice_size();
  ChristoffelVariation v = delta_christoffel(B, G);
  const Scalar& vol = G.vol();
  // V^a_j = g^{ai} B_ij, divergence (1/vol) D_a(vol V^a_j) - Gamma^m_aj V^a_m
  std::vector<Scalar> div(d, Scalar(L.size(), 0.0));
  std::vector<Scalar> V(d * d, Scalar(L.size(), 0.0));
  for (int a = 0; a < d; ++a)
    for (int j = 0; j < d; ++j)
      for (std::size_t n = 0; n < L.size(); ++n) {
        double s = 0;
        for (int i = 0; i < d; ++i) s += G.gi(a, i, n) * B[i * d + j][n];
        V[a * d + j][n] = s;
      }
  for (int j = 0; j < d; ++j)
    for (int a = 0; a < d; ++a) {
      Scalar w(L.size());
      for (std::size_t n = 0; n < L.size(); ++n) w[n] = vol[n] * V[a * d + j][n];
      Scalar dw = diff(L, a, w);
      for (std::size_t n = 0; n < L.size(); ++n) {
        double s = dw[n] / vol[n];
        for (int m = 0; m < d; ++m) s -= G.Gam(m, a, j)[n] * V[a * d + m][n];
        div[j][n] += s;
      }
    }
  Scalar tr(L.size(), 0.0);
  for (std::size_t n = 0; n < L.size(); ++n)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) tr[n] += G.gi(i, j, n) * B[i * d + j][n];
  std::vector<Scalar> dtr(d);
  for (int l = 0; l < d; ++l) dtr[l] = diff(L, l, tr);
  std::vector<Scalar> nB = detail::covariant_derivative_sym(B, G);

  IdentityDefects out;
  for (std::size_t n = 2 * S; n < (L.n(0) - 2) * S; ++n)
    for (int k = 0; k < d; ++k) {
      double s = v.C[k][n];
      for (int j = 0; j < d; ++j) s -= G.gi(j, k, n) * div[j][n];
      for (int l = 0; l < d; ++l) s += 0.5 * G.gi(k, l, n) * dtr[l][n];
      out.kg = std::max(out.kg, std::abs(s));
      out.kg_scale = std::max(out.kg_scale, std::abs(v.C[k][n]));

      const int j = k;  // free index of (ii)
      double lhs = 0, rhs = 0;
      for (int kk = 0; kk < d; ++kk)
        for (int a = 0; a < d; ++a) {
          double Pu = 0;  // Pi^a_kk
          for (int b = 0; b < d; ++b) Pu += G.gi(a, b, n) * Pi[b * d + kk][n];
          lhs += v.at(kk, a, j)[n] * Pu;
        }
      for (int a = 0; a < d; ++a)
        for (int l = 0; l < d; ++l) rhs += detail::raise2(G, Pi, a, l, n) * nB[(a * d + l) * d + j][n];
      out.proca = std::max(out.proca, std::abs(lhs - rhs));
      out.proca_scale = std::max(out.proca_scale, std::abs(lhs));
    }
  return out;
}

// ---------------------------------------------------------------- operator variation

inline constexpr double on_shell_tol = 0.1;

// |A phi| against the second-difference scale of phi.
inline double on_shell_residual(const FieldOperator& P, const FormField& phi) {
  const double hs = detail::hessian_scale(phi);
  return hs == 0 ? 0.0 : interior_norm(apply_operator(P, phi)) / hs;
}

// d/ds A[g + sB] phi at s = 0, from delta g^{ij} = -B^{ij}:
//   scalar:  B^{ij} nabla_i nabla_j phi + C^k D_k phi
//   1-form:  B^{ia} nabla_a F_ij + C^k F_kj + F^{al} nabla_a B_lj,  F = d phi
inline FormField delta_operator(const FieldOperator& P, const FormField& phi, const std::vector<Scalar>& B,
                                double tol = on_shell_tol) {
  const Geometry& G = P.geometry();
  const Lattice& L = G.lattice();
  const int d = L.dim();
  if (phi.k != P.degree()) throw Error("degree mismatch between operator and field");
  const double res = on_shell_residual(P, phi);
  if (res > tol) throw Error("off-shell input: residual " + std::to_string(res));
  ChristoffelVariation v = delta_christoffel(B, G);
  FormField out(L, P.degree());
  std::vector<Scalar> Bu(d * d, Scalar(L.size()));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (std::size_t n = 0; n < L.size(); ++n) Bu[i * d + j][n] = detail::raise2(G, B, i, j, n);

  if (P.degree() == 0) {
    const Scalar& f = phi.c[0];
    std::vector<Scalar> Df(d);
    for (int k = 0; k < d; ++k) Df[k] = diff(L, k, f);
    Scalar& o = out.c[0];
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        Scalar h = diff_ij(L, i, j, f);
        const double w = i == j ? 1.0 : 2.0;
        for (std::size_t n = 0; n < L.size(); ++n) {
          if (Bu[i * d + j][n] == 0.0) continue;
          double s = h[n];
          for (int k = 0; k < d; ++k) s -= G.Gam(k, i, j)[n] * Df[k][n];
          o[n] += w * Bu[i * d + j][n] * s;
        }
      }
    for (std::size_t n = 0; n < L.size(); ++n)
      for (int k = 0; k < d; ++k) o[n] += v.C[k][n] * Df[k][n];
    return out;
  }

  std::vector<Scalar> F = detail::full_two_form(exterior_derivative(phi));
  std::vector<Scalar> nB = detail::covariant_derivative_sym(B, G);
  // nabla_a F_ij, tuple (a, i, j)
  std::vector<Scalar> nF(d * d * d);
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Scalar s = diff(L, a, F[i * d + j]);
        for (std::size_t n = 0; n < L.size(); ++n)
          for (int k = 0; k < d; ++k) s[n] -= G.Gam(k, a, i)[n] * F[k * d + j][n] + G.Gam(k, a, j)[n] * F[i * d + k][n];
        nF[(a * d + i) * d + j] = std::move(s);
      }
  for (int j = 0; j < d; ++j) {
    Scalar& o = out.c[j];
    for (std::size_t n = 0; n < L.size(); ++n) {
      double s = 0;
      for (int i = 0; i < d; ++i)
        for (int a = 0; a < d; ++a) s += Bu[i * d + a][n] * nF[(a * d + i) * d + j][n];
      for (int k = 0; k < d; ++k) s += v.C[k][n] * F[k * d + j][n];
      for (int a = 0; a < d; ++a)
        for (int l = 0; l < d; ++l) s += detail::raise2(G, F, a, l, n) * nB[(a * d + l) * d + j][n];
      o[n] = s;
    }
  }
  return out;
}

inline FormField delta_operator(const FieldOperator& P, const FormField& phi, const PerturbationField& B,
                                double tol = on_shell_tol) {
  return delta_operator(P, phi, B.comps(), tol);
}

// ---------------------------------------------------------------- stress tensors

// Symmetric T^{ij}(phi, zeta), stored as d*d arrays with T[i*d+j] == T[j*d+i].
struct PolarizedStressTensor {
  Lattice lat;
  std::vector<Scalar> T;
  const Scalar& at(int i, int j) const { return T[i * lat.dim() + j]; }
};

inline PolarizedStressTensor stress_energy_polarized(const FieldOperator& P, const FormField& phi,
                                                     const FormField& zeta) {
  const Geometry& G = P.geometry();
  const Lattice& L = G.lattice();
  const int d = L.dim();
  if (phi.k != P.degree() || zeta.k != P.degree()) throw Error("degree mismatch in stress tensor");
  const double m2 = P.mass() * P.mass();
  PolarizedStressTensor out{L, std::vector<Scalar>(d * d, Scalar(L.size(), 0.0))};

  if (P.degree() == 0) {
    std::vector<Scalar> Dp(d), Dz(d);
    for (int k = 0; k < d; ++k) {
      Dp[k] = diff(L, k, phi.c[0]);
      Dz[k] = diff(L, k, zeta.c[0]);
    }
    parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t n = b; n < e; ++n) {
        double up[3] = {0, 0, 0}, uz[3] = {0, 0, 0}, dot = 0;
        for (int i = 0; i < d; ++i)
          for (int a = 0; a < d; ++a) {
            up[i] += G.gi(i, a, n) * Dp[a][n];
            uz[i] += G.gi(i, a, n) * Dz[a][n];
          }
        for (int a = 0; a < d; ++a) dot += up[a] * Dz[a][n];
        const double lag = dot + m2 * phi.c[0][n] * zeta.c[0][n];
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) {
            double t = 0.5 * (up[i] * uz[j] + up[j] * uz[i]) - 0.5 * G.gi(i, j, n) * lag;
            out.T[i * d + j][n] = t;
            out.T[j * d + i][n] = t;
          }
      }
    });
    return out;
  }

  std::vector<Scalar> F = detail::full_two_form(exterior_derivative(phi));
  std::vector<Scalar> H = detail::full_two_form(exterior_derivative(zeta));
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      double Hu[3][3], Fm[3][3], pu[3] = {0, 0, 0}, zu[3] = {0, 0, 0};
      for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) {
          Hu[a][c] = detail::raise2(G, H, a, c, n);
          double fm = 0;  // F^a_c
          for (int q = 0; q < d; ++q) fm += G.gi(a, q, n) * F[q * d + c][n];
          Fm[a][c] = fm;
        }
      for (int a = 0; a < d; ++a)
        for (int q = 0; q < d; ++q) {
          pu[a] += G.gi(a, q, n) * phi.c[q][n];
          zu[a] += G.gi(a, q, n) * zeta.c[q][n];
        }
      double FH = 0, pz = 0;
      for (int a = 0; a < d; ++a) {
        pz += pu[a] * zeta.c[a][n];
        for (int c = 0; c < d; ++c) FH += F[a * d + c][n] * Hu[a][c];
      }
      const double lag = 0.5 * FH + m2 * pz;
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
          double s = 0;
          for (int c = 0; c < d; ++c) s += Fm[i][c] * Hu[j][c] + Fm[j][c] * Hu[i][c];
          double t = 0.5 * s + 0.5 * m2 * (pu[i] * zu[j] + pu[j] * zu[i]) - 0.5 * G.gi(i, j, n) * lag;
          out.T[i * d + j][n] = t;
          out.T[j * d + i][n] = t;
        }
    }
  });
  return out;
}

// (1/vol) D_i(vol T^{ij}) + Gamma^j_ik T^{ik}
inline std::vector<Scalar> stress_divergence(const PolarizedStressTensor& T, const Geometry& G) {
  const Lattice& L = G.lattice();
  const int d = L.dim();
  const Scalar& vol = G.vol();
  std::vector<Scalar> out(d, Scalar(L.size(), 0.0));
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      Scalar w(L.size());
      for (std::size_t n = 0; n < L.size(); ++n) w[n] = vol[n] * T.at(i, j)[n];
      Scalar dw = diff(L, i, w);
      for (std::size_t n = 0; n < L.size(); ++n) out[j][n] += dw[n] / vol[n];
    }
    for (std::size_t n = 0; n < L.size(); ++n)
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) out[j][n] += G.Gam(j, i, k)[n] * T.at(i, k)[n];
  }
  return out;
}

// Discrete action 1/2 (<d phi, d phi> + m^2 <phi, phi>) integrated with the volume form.
inline double field_action(const FieldOperator& P, const FormField& phi) {
  const Geometry& G = P.geometry();
  FormField dp = exterior_derivative(phi);
  return 0.5 * (global_pairing(dp, dp, G) + P.mass() * P.mass() * global_pairing(phi, phi, G));
}

// -int B_ij T^{ij} dmu
inline double stress_pairing(const std::vector<Scalar>& B, const PolarizedStressTensor& T, const Geometry& G) {
  const Lattice& L = G.lattice();
  const int d = L.dim();
  double s = 0;
  for (std::size_t n = 0; n < L.size(); ++n) {
    double v = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) v += B[i * d + j][n] * T.T[i * d + j][n];
    s += v * G.vol()[n];
  }
  return -s * L.cell_volume();
}

// ---------------------------------------------------------------- balance

struct Balance {
  double L = 0, R = 0, defect = 0;
};

inline double defect_floor(const Lattice& L) { return 1e-14 * L.size() * L.cell_volume(); }

// L = int <zeta, d/ds A[h] phi> dmu, R = -int B_ij T^{ij}(phi, zeta) dmu.
inline Balance balance_check(const FieldOperator& P, const FormField& phi, const FormField& zeta,
                             const std::vector<Scalar>& B, double tol = on_shell_tol) {
  const Geometry& G = P.geometry();
  Balance b;
  b.L = global_pairing(zeta, delta_operator(P, phi, B, tol), G);
  b.R = stress_pairing(B, stress_energy_polarized(P, phi, zeta), G);
  b.defect = std::abs(b.L - b.R) / std::max({std::abs(b.L), std::abs(b.R), defect_floor(G.lattice())});
  return b;
}

inline Balance balance_check(const FieldOperator& P, const FormField& phi, const FormField& zeta,
                             const PerturbationField& B, double tol = on_shell_tol) {
  return balance_check(P, phi, zeta, B.comps(), tol);
}

// ---------------------------------------------------------------- relative Cauchy evolution

struct RceOptions {
  double band_fraction = 0.25;  // band width as a fraction of each gap
  // Electromagnetic output: the e_{Box_1} representative is Lorenz up to O(h^2).
  // An explicit fix marches a retarded gauge function from the window start,
  // which needs a box wider than the support of A grown by the full duration.
  bool lorenz_fix = false;
  double gauge_tol = 0.25;  // field-equation residual accepted by the fix
};

struct RceBands {
  double plus_t1 = 0, plus_t2 = 0, minus_t1 = 0, minus_t2 = 0;
};

struct RceResult {
  FormField solution;
  FormField generator;  // past-band source; the flow operator's e maps it to solution
  RceBands bands;
};

namespace detail {

inline FieldOperator same_kind(const FieldOperator& P, GeometryPtr g) {
  switch (P.kind()) {
    case OperatorKind::klein_gordon: return FieldOperator::klein_gordon(g, P.mass());
    case OperatorKind::box_one: return FieldOperator::box_one(g, P.mass());
    case OperatorKind::proca: return FieldOperator::proca(g, P.mass());
    case OperatorKind::maxwell: return FieldOperator::maxwell(g);
  }
  throw Error("unknown operator kind");
}

// Solution generated by f: e f, f_A f, or e_{Box_1} f for the electromagnetic field.
inline FormField propagate(const FieldOperator& P, const FormField& f) {
  if (P.kind() == OperatorKind::maxwell) return causal_propagator(em_flow(P), f);
  return causal_propagator(P, f);
}

inline void keep_slices(FormField& f, int lo, int hi) {
  const Lattice& L = f.lat;
  const std::size_t S = L.slice_size();
  lo = std::max(lo, 0);
  hi = std::min(hi, L.n(0) - 1);
  for (auto& c : f.c)
    for (int n = 0; n < L.n(0); ++n)
      if (n < lo || n > hi) std::fill(c.begin() + n * S, c.begin() + (n + 1) * S, 0.0);
}

// N(chi u) with N the marching operator, kept on the slab of the band plus the
// stencil reach. Off the band N(chi u) = chi N u, which vanishes to rounding for
// marched solutions and is an O(h^2) residual otherwise.
inline FormField band_source(const FieldOperator& P, const FormField& u, const PartitionOfUnity& p) {
  const Lattice& L = u.lat;
  FormField s = apply_marching_operator(P, times(p.chi_a, u));
  const double dt = L.h(0);
  keep_slices(s, static_cast<int>(std::floor(p.t1 / dt)) - 2, static_cast<int>(std::ceil(p.t2 / dt)) + 2);
  // the stencil reaches into the halo from flushed neighbours
  if (L.mode() == Boundary::support_contained)
    for (auto& c : s.c)
      for (std::size_t n = 0; n < L.size(); ++n)
        if (L.in_halo(n)) c[n] = 0.0;
  return s;
}

// Normally hyperbolic operator whose Green operators realize the composition:
// f_A A = e_{Box_1 + m^2}(Box_1 + m^2) for Proca since delta delta = 0, and
// Box_1 for the electromagnetic field (the two differ by a gauge term).
inline FieldOperator flow_operator(const FieldOperator& P) {
  if (P.kind() == OperatorKind::proca || P.kind() == OperatorKind::maxwell) {
    FieldOperator B = FieldOperator::box_one(P.geometry_ptr(), P.mass());
    B.options = P.options;
    return B;
  }
  return P;
}

inline PartitionOfUnity band_in(double a, double b, double frac, const Lattice& L, const char* which) {
  const double gap = b - a, w = frac * gap;
  if (w < 4 * L.h(0))
    throw Error(std::string("invalid slabs: ") + which + " gap of " + std::to_string(gap) + " too short for a band");
  const double c = a + 0.5 * gap;
  return partition_of_unity(c - 0.5 * w, c + 0.5 * w, L);
}

}  // namespace detail

// Regions come from the declared support box of h, so every member of a family
// h^s (including s = 0) gets the same bands.
inline RceRegions box_regions(const PerturbationField& h, const MetricField& g) {
  const Lattice& L = g.lattice();
  if (h.box().empty) return rce_regions(h, g);
  Region K(L);
  for (std::size_t n = 0; n < L.size(); ++n)
    if (h.box().contains(L, n)) K.set(n);
  std::vector<double> c = slice_speeds(g);
  std::vector<double> ch = slice_speeds(metric_plus_comps(g, h, 1.0), L);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::max(c[i], ch[i]);
  return rce_regions(K, c);
}

inline RceBands rce_bands(const PerturbationField& h, const MetricField& g, const RceOptions& opt = {}) {
  const Lattice& L = g.lattice();
  RceRegions reg = box_regions(h, g);
  const double dt = L.h(0);
  auto fp = reg.plus.full_slices(), fm = reg.minus.full_slices();
  const double p0 = fp.front() * dt, p1 = (L.n(0) - 3) * dt;
  const double m0 = 2 * dt, m1 = fm.back() * dt;
  PartitionOfUnity up = detail::band_in(p0, p1, opt.band_fraction, L, "future");
  PartitionOfUnity lo = detail::band_in(m0, m1, opt.band_fraction, L, "past");
  return {up.t1, up.t2, lo.t1, lo.t2};
}

// r_h phi = e A[h](chi_- e_h A(chi_+ phi)), chi = 0 before and 1 after each band.
inline RceResult classical_rce(const FieldOperator& P, const FormField& phi, const PerturbationField& h,
                               const RceOptions& opt = {}) {
  const Geometry& G = P.geometry();
  const Lattice& L = G.lattice();
  require_same(L, h.lattice());
  Admissibility adm = admissibility_check(G.metric(), h, P.options.cfl);
  if (!adm.ok) throw Error("perturbed metric rejected: " + adm.reason);
  RceResult out;
  out.bands = rce_bands(h, G.metric(), opt);
  PartitionOfUnity up = partition_of_unity(out.bands.plus_t1, out.bands.plus_t2, L);
  PartitionOfUnity lo = partition_of_unity(out.bands.minus_t1, out.bands.minus_t2, L);
  FieldOperator Pb = detail::flow_operator(P);
  FieldOperator Ph = detail::same_kind(Pb, make_geometry(metric_plus(G.metric(), h)));
  Ph.options = P.options;
  FormField psi = causal_propagator(Ph, detail::band_source(Pb, phi, up));
  out.generator = detail::band_source(Ph, psi, lo);
  out.solution = causal_propagator(Pb, out.generator);
  if (P.kind() == OperatorKind::maxwell && opt.lorenz_fix) out.solution = lorenz_gauge_fix(out.solution, P, opt.gauge_tol).A;
  return out;
}

// e_A(d/ds A[h^s] phi).
inline FormField rce_derivative_analytic(const FieldOperator& P, const FormField& phi, const std::vector<Scalar>& B,
                                         double tol = on_shell_tol) {
  return detail::propagate(P, delta_operator(P, phi, B, tol));
}

inline FormField rce_derivative_analytic(const FieldOperator& P, const FormField& phi, const PerturbationField& B,
                                         double tol = on_shell_tol) {
  return rce_derivative_analytic(P, phi, B.comps(), tol);
}

}  // namespace lcf
