#pragma once

#include <cmath>
#include <vector>

#include "geometry.hpp"

namespace lcf {

// Degree-k form: one component array per sorted index tuple. Degree -1 is
// the zero space (no components), used for the codifferential of 0-forms.
struct FormField {
  Lattice lat;
  int k = 0;
  std::vector<Scalar> c;

  FormField() = default;
  FormField(const Lattice& L, int degree) : lat(L), k(degree) {
    if (degree < -1 || degree > L.dim()) throw Error("form degree out of range");
    c.assign(std::max(0, n_components(L.dim(), degree)), Scalar(L.size(), 0.0));
  }
  int ncomp() const { return static_cast<int>(c.size()); }

  // Enforces the zero-halo contract in support_contained mode.
  void check_halo() const {
    if (lat.mode() != Boundary::support_contained) return;
    for (const auto& a : c)
      for (std::size_t n = 0; n < lat.size(); ++n)
        if (a[n] != 0.0 && lat.in_halo(n))
          throw Error("field nonzero in the boundary halo at " + node_label(lat, n));
  }

  FormField& operator+=(const FormField& o) {
    check_same(o);
    for (int a = 0; a < ncomp(); ++a)
      for (std::size_t n = 0; n < lat.size(); ++n) c[a][n] += o.c[a][n];
    return *this;
  }
  FormField& operator-=(const FormField& o) {
    check_same(o);
    for (int a = 0; a < ncomp(); ++a)
      for (std::size_t n = 0; n < lat.size(); ++n) c[a][n] -= o.c[a][n];
    return *this;
  }
  FormField& operator*=(double s) {
    for (auto& a : c)
      for (auto& v : a) v *= s;
    return *this;
  }
  void check_same(const FormField& o) const {
    require_same(lat, o.lat);
    if (k != o.k) throw Error("degree mismatch");
  }
};

inline FormField operator+(FormField a, const FormField& b) { return a += b; }
inline FormField operator-(FormField a, const FormField& b) { return a -= b; }
inline FormField operator*(double s, FormField a) { return a *= s; }

inline FormField scalar_form(const Lattice& L, Scalar f) {
  FormField w(L, 0);
  w.c[0] = std::move(f);
  return w;
}

// Pointwise product with a scalar field.
inline FormField times(const Scalar& chi, FormField w) {
  for (auto& a : w.c)
    for (std::size_t n = 0; n < a.size(); ++n) a[n] *= chi[n];
  return w;
}

// (dw)_I = sum_p (-1)^p D_{I_p} w_{I without I_p}
inline FormField exterior_derivative(const FormField& w) {
  const Lattice& L = w.lat;
  const int d = L.dim();
  if (w.k == d) throw Error("top degree: exterior derivative of a " + std::to_string(d) + "-form");
  FormField out(L, w.k + 1);
  if (w.k < 0) return out;
  const auto& I = subsets(d, w.k + 1);
  for (std::size_t r = 0; r < I.size(); ++r) {
    Scalar& o = out.c[r];
    for (std::size_t p = 0; p < I[r].size(); ++p) {
      std::vector<int> rest;
      for (std::size_t q = 0; q < I[r].size(); ++q)
        if (q != p) rest.push_back(I[r][q]);
      Scalar dv = diff(L, I[r][p], w.c[subset_pos(d, rest)]);
      const double sg = p % 2 ? -1.0 : 1.0;
      for (std::size_t n = 0; n < L.size(); ++n) o[n] += sg * dv[n];
    }
  }
  return out;
}

inline FormField hodge_star(const FormField& w, const Geometry& G) {
  require_same(w.lat, G.lattice());
  const int d = G.dim();
  FormField out(w.lat, d - w.k);
  const auto& S = G.star(w.k);
  const int rows = out.ncomp(), cols = w.ncomp();
  parallel_for(w.lat.size(), [&](std::size_t b, std::size_t e) {
    for (int r = 0; r < rows; ++r)
      for (std::size_t n = b; n < e; ++n) {
        double s = 0;
        for (int q = 0; q < cols; ++q) s += S[r * cols + q][n] * w.c[q][n];
        out.c[r][n] = s;
      }
  });
  return out;
}

// Inverse star on degree-q forms: s (-1)^{q(d-q)} *, with s = -1.
inline FormField hodge_star_inverse(const FormField& w, const Geometry& G) {
  const int d = G.dim(), q = w.k;
  const double sign = -((q * (d - q)) % 2 ? -1.0 : 1.0);
  return sign * hodge_star(w, G);
}

// delta = (-1)^k *^{-1} d *; on 0-forms returns the empty degree -1 form.
inline FormField codifferential(const FormField& w, const Geometry& G) {
  if (w.k <= 0) return FormField(w.lat, -1);
  FormField r = hodge_star_inverse(exterior_derivative(hodge_star(w, G)), G);
  if (w.k % 2) r *= -1.0;
  return r;
}

// Box_k = d delta + delta d.
inline FormField box_k(const FormField& w, const Geometry& G) {
  FormField a = w.k > 0 ? exterior_derivative(codifferential(w, G)) : FormField(w.lat, w.k);
  if (w.k < G.dim()) a += codifferential(exterior_derivative(w), G);
  return a;
}

// Pointwise <w, v>_g times sqrt|g|.
inline Scalar fiber_density(const FormField& w, const FormField& v, const Geometry& G) {
  w.check_same(v);
  const auto& Gm = G.gram(w.k);
  const int C = w.ncomp();
  Scalar out(w.lat.size(), 0.0);
  for (std::size_t n = 0; n < w.lat.size(); ++n) {
    double s = 0;
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < C; ++b) s += w.c[a][n] * Gm[a * C + b][n] * v.c[b][n];
    out[n] = s * G.vol()[n];
  }
  return out;
}

// (w, v)_g = sum over nodes of <w, v>_g sqrt|g| times the cell volume.
inline double global_pairing(const FormField& w, const FormField& v, const Geometry& G) {
  if (w.k != v.k) throw Error("degree mismatch in pairing");
  Scalar f = fiber_density(w, v, G);
  double s = 0;
  for (double x : f) s += x;
  return s * w.lat.cell_volume();
}

// ---------------------------------------------------------------- coefficient form

// (P u)_a = -g^{ij} D2_ij u_a + B^k_ab D_k u_b + C_ab u_b with narrow
// diagonal second differences. Built for Box_0 + m^2 (one component) and the
// Lichnerowicz form of Box_1 + m^2 (d components).
class CoefficientOperator {
 public:
  static CoefficientOperator klein_gordon(const Geometry& G, double m) {
    CoefficientOperator P(G, 1);
    const int d = G.dim();
    for (std::size_t n = 0; n < P.lat_.size(); ++n) {
      for (int k = 0; k < d; ++k) {
        double s = 0;
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) s += G.gi(i, j, n) * G.Gam(k, i, j)[n];
        P.B_[k][n] = s;
      }
      P.C_[0][n] = m * m;
    }
    return P;
  }

  // -nabla^l nabla_l w_i + R_il g^{lp} w_p + m^2 w_i
  static CoefficientOperator box_one(const Geometry& G, double m) {
    const int d = G.dim();
    CoefficientOperator P(G, d);
    const Lattice& L = G.lattice();
    const TensorField& R = G.ricci();
    // g^{lm} D_l Gamma^p_mi
    std::vector<Scalar> dGam(d * d, Scalar(L.size(), 0.0));
    for (int p = 0; p < d; ++p)
      for (int mm = 0; mm < d; ++mm)
        for (int i = 0; i < d; ++i)
          for (int l = 0; l < d; ++l) {
            Scalar t = diff(L, l, G.Gam(p, mm, i));
            for (std::size_t n = 0; n < L.size(); ++n) dGam[i * d + p][n] += G.gi(l, mm, n) * t[n];
          }
    for (std::size_t n = 0; n < L.size(); ++n) {
      std::array<double, 3> trG{0, 0, 0};  // g^{lm} Gamma^k_lm
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          for (int mm = 0; mm < d; ++mm) trG[k] += G.gi(l, mm, n) * G.Gam(k, l, mm)[n];
      for (int i = 0; i < d; ++i)
        for (int p = 0; p < d; ++p) {
          for (int k = 0; k < d; ++k) {
            double s = 0;
            for (int mm = 0; mm < d; ++mm) s += 2 * G.gi(k, mm, n) * G.Gam(p, mm, i)[n];
            if (i == p) s += trG[k];
            P.B_[(k * d + i) * d + p][n] = s;
          }
          double c = dGam[i * d + p][n];
          for (int q = 0; q < d; ++q) {
            c -= trG[q] * G.Gam(p, q, i)[n];
            for (int l = 0; l < d; ++l)
              for (int mm = 0; mm < d; ++mm)
                c -= G.gi(l, mm, n) * G.Gam(q, l, i)[n] * G.Gam(p, mm, q)[n];
          }
          for (int l = 0; l < d; ++l) c += R.c[i * d + l][n] * G.gi(l, p, n);
          if (i == p) c += m * m;
          P.C_[i * d + p][n] = c;
        }
    }
    return P;
  }

  const Lattice& lattice() const { return lat_; }
  int ncomp() const { return nc_; }
  int dim() const { return d_; }
  double gi(int i, int j, std::size_t n) const { return ginv_[i * d_ + j][n]; }
  double B(int k, int a, int b, std::size_t n) const { return B_[(k * nc_ + a) * nc_ + b][n]; }
  double C(int a, int b, std::size_t n) const { return C_[a * nc_ + b][n]; }
  bool has_time_space_terms() const {
    for (int a = 1; a < d_; ++a)
      for (double v : ginv_[a])
        if (std::abs(v) > 1e-14) return true;
    return false;
  }

  // Full-lattice application; the time axis uses the one-sided stencils on
  // the first and last slice.
  FormField apply(const FormField& u) const {
    if (u.ncomp() != nc_) throw Error("degree mismatch for coefficient operator");
    require_same(u.lat, lat_);
    const Lattice& L = lat_;
    FormField out(L, u.k);
    for (int b = 0; b < nc_; ++b) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) {
          Scalar s = diff_ij(L, i, j, u.c[b]);
          const double f = i == j ? 1.0 : 2.0;
          for (std::size_t n = 0; n < L.size(); ++n) out.c[b][n] -= f * gi(i, j, n) * s[n];
        }
      for (int k = 0; k < d_; ++k) {
        Scalar s = diff(L, k, u.c[b]);
        for (int a = 0; a < nc_; ++a)
          for (std::size_t n = 0; n < L.size(); ++n) out.c[a][n] += B(k, a, b, n) * s[n];
      }
      for (int a = 0; a < nc_; ++a)
        for (std::size_t n = 0; n < L.size(); ++n) out.c[a][n] += C(a, b, n) * u.c[b][n];
    }
    return out;
  }

 private:
  CoefficientOperator(const Geometry& G, int nc)
      : lat_(G.lattice()), d_(G.dim()), nc_(nc), ginv_(G.ginv().c),
        B_(G.dim() * nc * nc, Scalar(G.lattice().size(), 0.0)),
        C_(nc * nc, Scalar(G.lattice().size(), 0.0)) {}

  Lattice lat_;
  int d_, nc_;
  std::vector<Scalar> ginv_, B_, C_;
};

inline FormField lichnerowicz_box(const FormField& w, const Geometry& G) {
  if (w.k != 1) throw Error("lichnerowicz_box acts on 1-forms");
  return CoefficientOperator::box_one(G, 0.0).apply(w);
}

}  // namespace lcf
