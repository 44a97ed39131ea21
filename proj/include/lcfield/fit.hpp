#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lcf {

// Least-squares slope of log(err) against log(h).
inline double fit_order(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw std::invalid_argument("fit_order needs matching series of length >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(std::max(std::abs(err[i]), 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline constexpr double rounding_floor = 1e-10;

// True when every level already sits at rounding level, so no order is measurable.
inline bool at_floor(const std::vector<double>& err, double floor = rounding_floor) {
  for (double e : err)
    if (std::abs(e) > floor) return false;
  return true;
}

struct OrderCheck {
  double order = 0;
  bool floor = false;
  bool pass = false;
};

inline OrderCheck check_order(const std::vector<double>& h, const std::vector<double>& err, double min_order,
                              double floor = rounding_floor) {
  OrderCheck c;
  c.floor = at_floor(err, floor);
  c.order = c.floor ? std::numeric_limits<double>::infinity() : fit_order(h, err);
  c.pass = c.floor || c.order >= min_order;
  return c;
}

// e(h) = a + c h^p through three levels with a common refinement ratio.
struct Richardson {
  double order = 0, asymptote = 0;
};

inline Richardson richardson(const std::vector<double>& h, const std::vector<double>& e) {
  if (h.size() != 3 || e.size() != 3) throw std::invalid_argument("richardson needs three levels");
  const double r1 = h[0] / h[1], r2 = h[1] / h[2];
  if (std::abs(r1 - r2) > 1e-9 * r1) throw std::invalid_argument("richardson needs a constant refinement ratio");
  const double d1 = e[0] - e[1], d2 = e[1] - e[2];
  Richardson out;
  if (d1 == 0 || d2 == 0 || d1 * d2 < 0) {
    out.order = std::numeric_limits<double>::quiet_NaN();
    out.asymptote = e[2];
    return out;
  }
  out.order = std::log(d1 / d2) / std::log(r1);
  const double q = std::pow(r1, out.order);
  out.asymptote = e[2] - d2 / (q - 1);
  return out;
}

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit needs matching series of length >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0 ? 1.0 : sxy * sxy / (sxx * syy);
  return f;
}

}  // namespace lcf
