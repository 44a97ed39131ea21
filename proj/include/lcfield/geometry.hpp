#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "metric.hpp"

namespace lcf {

// Sorted k-subsets of {0, ..., d-1} in lexicographic order.
inline const std::vector<std::vector<int>>& subsets(int d, int k) {
  static const auto table = [] {
    std::array<std::array<std::vector<std::vector<int>>, 4>, 4> t;
    for (int dd = 0; dd <= 3; ++dd)
      for (int mask = 0; mask < (1 << dd); ++mask) {
        std::vector<int> s;
        for (int i = 0; i < dd; ++i)
          if (mask & (1 << i)) s.push_back(i);
        t[dd][s.size()].push_back(s);
      }
    for (auto& row : t)
      for (auto& v : row) std::sort(v.begin(), v.end());
    return t;
  }();
  static const std::vector<std::vector<int>> none;
  if (k < 0 || k > d) return none;
  return table[d][k];
}

inline int n_components(int d, int k) { return static_cast<int>(subsets(d, k).size()); }

inline int subset_pos(int d, const std::vector<int>& s) {
  const auto& all = subsets(d, static_cast<int>(s.size()));
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i] == s) return static_cast<int>(i);
  throw Error("not a sorted subset");
}

inline std::vector<int> complement(int d, const std::vector<int>& s) {
  std::vector<int> c;
  for (int i = 0; i < d; ++i)
    if (std::find(s.begin(), s.end(), i) == s.end()) c.push_back(i);
  return c;
}

// Sign of the permutation sorting the concatenation (a, b).
inline int perm_sign(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> v(a);
  v.insert(v.end(), b.begin(), b.end());
  int inv = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j)
      if (v[i] > v[j]) ++inv;
  return inv % 2 ? -1 : 1;
}

inline double minor_det(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  const int k = static_cast<int>(rows.size());
  if (k == 0) return 1.0;
  Mat s(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) s(i, j) = m(rows[i], cols[j]);
  return s.determinant();
}

// Gram-Schmidt frame of g: timelike leg first, columns are the frame vectors
// in coordinate components, upper triangular with positive diagonal.
inline Mat orthonormal_frame(const Mat& g) {
  const int d = static_cast<int>(g.rows());
  Mat E = Mat::Zero(d, d);
  for (int A = 0; A < d; ++A) {
    Vec v = Vec::Zero(d);
    v(A) = 1;
    for (int B = 0; B < A; ++B) {
      double eta = B == 0 ? -1.0 : 1.0;
      v -= eta * (v.transpose() * g * E.col(B))(0, 0) * E.col(B);
    }
    double n2 = (v.transpose() * g * v)(0, 0);
    E.col(A) = v / std::sqrt(std::abs(n2));
  }
  return E;
}

// Matrix of the Hodge star on k-forms at one point: rows index (d-k)-subsets,
// columns k-subsets, both in coordinate components.
inline Mat hodge_matrix(const Mat& g, int k) {
  const int d = static_cast<int>(g.rows());
  const Mat E = orthonormal_frame(g);
  const Mat Th = E.inverse();
  const auto& K = subsets(d, k);
  const auto& Q = subsets(d, d - k);
  Mat ME(K.size(), K.size()), P = Mat::Zero(Q.size(), K.size()), MT(Q.size(), Q.size());
  for (std::size_t a = 0; a < K.size(); ++a)
    for (std::size_t j = 0; j < K.size(); ++j) ME(a, j) = minor_det(E, K[j], K[a]);
  for (std::size_t a = 0; a < K.size(); ++a) {
    double eta = (std::find(K[a].begin(), K[a].end(), 0) != K[a].end()) ? -1.0 : 1.0;
    auto B = complement(d, K[a]);
    P(subset_pos(d, B), a) = eta * perm_sign(K[a], B);
  }
  for (std::size_t j = 0; j < Q.size(); ++j)
    for (std::size_t b = 0; b < Q.size(); ++b) MT(j, b) = minor_det(Th, Q[b], Q[j]);
  return MT * P * ME;
}

// Pointwise geometric data derived from a metric. Expensive pieces are built
// on first use; the object is immutable from the caller's point of view.
class Geometry {
 public:
  explicit Geometry(MetricField g)
      : g_(std::move(g)), ginv_(inverse_metric(g_)), vol_(volume_density(g_)),
        gamma_(christoffel(g_, ginv_)) {}

  const MetricField& metric() const { return g_; }
  const Lattice& lattice() const { return g_.lattice(); }
  int dim() const { return g_.dim(); }
  const TensorField& ginv() const { return ginv_; }
  double gi(int i, int j, std::size_t n) const { return ginv_.c[i * dim() + j][n]; }
  const Scalar& vol() const { return vol_; }
  const TensorField& gamma() const { return gamma_; }
  const Scalar& Gam(int k, int i, int j) const { return gamma_.c[(k * dim() + i) * dim() + j]; }

  // Star on k-forms: entry [r * n_components(d, k) + c].
  const std::vector<Scalar>& star(int k) const {
    std::call_once(star_once_[k], [&] {
      const int d = dim();
      const int rows = n_components(d, d - k), cols = n_components(d, k);
      auto& S = star_[k];
      S.assign(rows * cols, Scalar(lattice().size()));
      parallel_for(lattice().size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
          Mat m = hodge_matrix(g_.at(n), k);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) S[r * cols + c][n] = m(r, c);
        }
      });
    });
    return star_[k];
  }

  // Induced inner product on k-forms: entry [J * C + K] = det(g^{-1}[J, K]).
  const std::vector<Scalar>& gram(int k) const {
    std::call_once(gram_once_[k], [&] {
      const int d = dim();
      const auto& K = subsets(d, k);
      const int C = static_cast<int>(K.size());
      auto& G = gram_[k];
      G.assign(C * C, Scalar(lattice().size()));
      parallel_for(lattice().size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
          Mat gi(d, d);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) gi(i, j) = ginv_.c[i * d + j][n];
          for (int a = 0; a < C; ++a)
            for (int c = 0; c < C; ++c) G[a * C + c][n] = minor_det(gi, K[a], K[c]);
        }
      });
    });
    return gram_[k];
  }

  // R_ik = D_j Gamma^j_ik - D_i Gamma^j_jk + Gamma^m_ik Gamma^j_jm - Gamma^m_jk Gamma^j_im
  const TensorField& ricci() const {
    std::call_once(ricci_once_, [&] {
      const Lattice& L = lattice();
      const int d = dim();
      ricci_ = TensorField(L, "dd");
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
          Scalar& R = ricci_.c[i * d + k];
          for (int j = 0; j < d; ++j) {
            Scalar a = diff(L, j, Gam(j, i, k));
            Scalar b = diff(L, i, Gam(j, j, k));
            for (std::size_t n = 0; n < L.size(); ++n) R[n] += a[n] - b[n];
          }
          for (std::size_t n = 0; n < L.size(); ++n)
            for (int j = 0; j < d; ++j)
              for (int m = 0; m < d; ++m)
                R[n] += Gam(m, i, k)[n] * Gam(j, j, m)[n] - Gam(m, j, k)[n] * Gam(j, i, m)[n];
        }
    });
    return ricci_;
  }

 private:
  MetricField g_;
  TensorField ginv_;
  Scalar vol_;
  TensorField gamma_;
  mutable std::array<std::once_flag, 4> star_once_, gram_once_;
  mutable std::array<std::vector<Scalar>, 4> star_, gram_;
  mutable std::once_flag ricci_once_;
  mutable TensorField ricci_;
};

using GeometryPtr = std::shared_ptr<const Geometry>;

inline GeometryPtr make_geometry(MetricField g) { return std::make_shared<const Geometry>(std::move(g)); }

}  // namespace lcf
