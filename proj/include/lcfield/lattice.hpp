#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "parallel.hpp"

namespace lcf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Boundary { periodic, support_contained };

inline Boundary parse_boundary(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "support_contained") return Boundary::support_contained;
  throw Error("unknown boundary mode '" + s + "'");
}

inline const char* to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "support_contained";
}

struct LatticeParams {
  int dim = 2;                      // spacetime dimension (2 or 3)
  std::array<int, 3> n{8, 8, 1};    // N_t, N_x, N_y
  std::array<double, 3> h{1, 1, 1}; // dt, dx, dy
  Boundary mode = Boundary::periodic;
};

// Discretised chart R_t x (box or torus)^n. Nodes are stored row-major
// over (t, x[, y]) so every time slice is a contiguous block.
class Lattice {
 public:
  static constexpr int halo = 2;

  Lattice() = default;
  explicit Lattice(const LatticeParams& p) : p_(p) {
    if (p.dim != 2 && p.dim != 3) throw Error("spacetime dimension must be 2 or 3");
    for (int a = 0; a < p.dim; ++a) {
      if (p.n[a] < 8) throw Error("size too small: axis " + std::to_string(a) + " has " +
                                  std::to_string(p.n[a]) + " < 8 nodes");
      if (!(p.h[a] > 0)) throw Error("non-positive spacing on axis " + std::to_string(a));
    }
    if (p.dim == 2) { p_.n[2] = 1; p_.h[2] = 1; }
    stride_[2] = 1;
    stride_[1] = static_cast<std::size_t>(p_.n[2]);
    stride_[0] = stride_[1] * static_cast<std::size_t>(p_.n[1]);
    size_ = stride_[0] * static_cast<std::size_t>(p_.n[0]);
  }

  int dim() const { return p_.dim; }
  int n(int axis) const { return p_.n[axis]; }
  double h(int axis) const { return p_.h[axis]; }
  Boundary mode() const { return p_.mode; }
  const LatticeParams& params() const { return p_; }

  std::size_t size() const { return size_; }
  std::size_t slice_size() const { return stride_[0]; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  bool periodic(int axis) const { return axis > 0 && p_.mode == Boundary::periodic; }

  double duration() const { return (p_.n[0] - 1) * p_.h[0]; }
  double cell_volume() const {
    double v = 1;
    for (int a = 0; a < p_.dim; ++a) v *= p_.h[a];
    return v;
  }

  int index(std::size_t node, int axis) const {
    return static_cast<int>((node / stride_[axis]) % static_cast<std::size_t>(p_.n[axis]));
  }
  double coord(std::size_t node, int axis) const { return index(node, axis) * p_.h[axis]; }
  std::size_t node(int it, int ix, int iy = 0) const {
    return it * stride_[0] + ix * stride_[1] + iy * stride_[2];
  }

  // True for nodes inside the reserved zero halo (support_contained only).
  bool in_halo(std::size_t node) const {
    if (p_.mode != Boundary::support_contained) return false;
    for (int a = 1; a < p_.dim; ++a) {
      int i = index(node, a);
      if (i < halo || i > p_.n[a] - 1 - halo) return true;
    }
    return false;
  }

  bool operator==(const Lattice& o) const {
    return p_.dim == o.p_.dim && p_.n == o.p_.n && p_.h == o.p_.h && p_.mode == o.p_.mode;
  }

 private:
  LatticeParams p_{};
  std::array<std::size_t, 3> stride_{1, 1, 1};
  std::size_t size_ = 0;
};

inline Lattice build_lattice(const LatticeParams& p) { return Lattice(p); }

using Scalar = std::vector<double>;

inline void require_same(const Lattice& a, const Lattice& b) {
  if (!(a == b)) throw Error("lattice mismatch");
}

// Centred first difference along one axis for nodes in [b, e). Periodic axes
// wrap; other ends use the second-order one-sided stencil. Arrays are indexed
// from node `base` (nonzero for slice-sized buffers on spatial axes).
inline void diff_range(const Lattice& L, int axis, const double* in, double* out,
                       std::size_t b, std::size_t e, std::size_t base = 0) {
  in -= base;
  out -= base;
  const std::size_t s = L.stride(axis);
  const int N = L.n(axis);
  const double c = 0.5 / L.h(axis);
  const bool per = L.periodic(axis);
  for (std::size_t k = b; k < e; ++k) {
    int i = L.index(k, axis);
    if (i > 0 && i < N - 1) {
      out[k] = (in[k + s] - in[k - s]) * c;
    } else if (per) {
      std::size_t kp = i == N - 1 ? k - (N - 1) * s : k + s;
      std::size_t km = i == 0 ? k + (N - 1) * s : k - s;
      out[k] = (in[kp] - in[km]) * c;
    } else if (i == 0) {
      out[k] = (-3 * in[k] + 4 * in[k + s] - in[k + 2 * s]) * c;
    } else {
      out[k] = (3 * in[k] - 4 * in[k - s] + in[k - 2 * s]) * c;
    }
  }
}

// Narrow second difference along one axis; one-sided four-point stencil at
// non-periodic ends.
inline void diff2_range(const Lattice& L, int axis, const double* in, double* out,
                        std::size_t b, std::size_t e, std::size_t base = 0) {
  in -= base;
  out -= base;
  const std::size_t s = L.stride(axis);
  const int N = L.n(axis);
  const double c = 1.0 / (L.h(axis) * L.h(axis));
  const bool per = L.periodic(axis);
  for (std::size_t k = b; k < e; ++k) {
    int i = L.index(k, axis);
    if (i > 0 && i < N - 1) {
      out[k] = (in[k + s] - 2 * in[k] + in[k - s]) * c;
    } else if (per) {
      std::size_t kp = i == N - 1 ? k - (N - 1) * s : k + s;
      std::size_t km = i == 0 ? k + (N - 1) * s : k - s;
      out[k] = (in[kp] - 2 * in[k] + in[km]) * c;
    } else if (i == 0) {
      out[k] = (2 * in[k] - 5 * in[k + s] + 4 * in[k + 2 * s] - in[k + 3 * s]) * c;
    } else {
      out[k] = (2 * in[k] - 5 * in[k - s] + 4 * in[k - 2 * s] - in[k - 3 * s]) * c;
    }
  }
}

inline Scalar diff(const Lattice& L, int axis, const Scalar& f) {
  Scalar out(f.size());
  parallel_for(f.size(), [&](std::size_t b, std::size_t e) {
    diff_range(L, axis, f.data(), out.data(), b, e);
  });
  return out;
}

inline Scalar diff2(const Lattice& L, int axis, const Scalar& f) {
  Scalar out(f.size());
  parallel_for(f.size(), [&](std::size_t b, std::size_t e) {
    diff2_range(L, axis, f.data(), out.data(), b, e);
  });
  return out;
}

// Second derivative: narrow stencil on the diagonal, product of centred
// differences off it.
inline Scalar diff_ij(const Lattice& L, int i, int j, const Scalar& f) {
  if (i == j) return diff2(L, i, f);
  return diff(L, i, diff(L, j, f));
}

// Samples fn(t, x, y) at every node.
template <class Fn>
Scalar sample(const Lattice& L, Fn&& fn) {
  Scalar out(L.size());
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      out[k] = fn(L.coord(k, 0), L.coord(k, 1), L.dim() > 2 ? L.coord(k, 2) : 0.0);
  });
  return out;
}

}  // namespace lcf
