#pragma once

/// \file quadrature.hpp
/// Box quadrature for cell averages of potentials, including cells that touch
/// a point singularity of |z|^{-s}.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "hardy/error.hpp"
#include "hardy/grid.hpp"

namespace hardy::quad {

/// Full node/weight list of the 7-point Gauss-Legendre rule on [-1, 1].
inline const std::vector<std::pair<double, double>>& gauss7() {
  static const auto rule = [] {
    using G = boost::math::quadrature::gauss<double, 7>;
    std::vector<std::pair<double, double>> r;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.emplace_back(x[i], w[i]);
      if (x[i] != 0.0) r.emplace_back(-x[i], w[i]);
    }
    return r;
  }();
  return rule;
}

/// Tensor Gauss-Legendre integral of f over the box [lo, hi] in R^d.
template <class F>
double gauss_box(F&& f, std::span<const double> lo, std::span<const double> hi) {
  const int d = static_cast<int>(lo.size());
  const auto& rule = gauss7();
  const int q = static_cast<int>(rule.size());
  std::array<int, kMaxDim> idx{};
  std::array<double, kMaxDim> x{};
  double jac = 1.0;
  for (int k = 0; k < d; ++k) jac *= 0.5 * (hi[k] - lo[k]);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      const auto& [t, wt] = rule[idx[k]];
      x[k] = 0.5 * (lo[k] + hi[k]) + 0.5 * (hi[k] - lo[k]) * t;
      w *= wt;
    }
    total += w * f(std::span<const double>(x.data(), d));
    int k = d - 1;
    for (; k >= 0; --k) {
      if (++idx[k] < q) break;
      idx[k] = 0;
    }
    if (k < 0) break;
  }
  return total * jac;
}

namespace detail {

inline double power_at(std::span<const double> x, double s) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::pow(r2, -0.5 * s);
}

/// Integral of |z|^{-s} over a box that stays away from the origin; the box is
/// bisected until its longest edge is below its distance to the origin.
inline double regular_box(std::vector<double> lo, std::vector<double> hi, double s, int depth) {
  const int d = static_cast<int>(lo.size());
  double dist2 = 0.0, longest = 0.0;
  int axis = 0;
  for (int k = 0; k < d; ++k) {
    const double nearest = std::clamp(0.0, lo[k], hi[k]);
    dist2 += nearest * nearest;
    if (hi[k] - lo[k] > longest) {
      longest = hi[k] - lo[k];
      axis = k;
    }
  }
  if (2.0 * longest <= std::sqrt(dist2) || depth >= 14) {
    return gauss_box([s](std::span<const double> x) { return power_at(x, s); }, lo, hi);
  }
  const double mid = 0.5 * (lo[axis] + hi[axis]);
  auto hi_a = hi;
  hi_a[axis] = mid;
  auto lo_b = lo;
  lo_b[axis] = mid;
  return regular_box(lo, hi_a, s, depth + 1) + regular_box(lo_b, hi, s, depth + 1);
}

/// Integral of |z|^{-s} over [0,1]^d by self-similarity: the cube is its own
/// half-size copy plus a regular remainder.
inline double unit_corner_cube(int d, double s) {
  static std::mutex mu;
  static std::map<std::pair<int, double>, double> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find({d, s}); it != cache.end()) return it->second;
  double rest = 0.0;
  for (unsigned corner = 1; corner < (1u << d); ++corner) {
    std::vector<double> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      const bool up = (corner >> k) & 1u;
      lo[k] = up ? 0.5 : 0.0;
      hi[k] = up ? 1.0 : 0.5;
    }
    rest += regular_box(lo, hi, s, 0);
  }
  const double value = rest / (1.0 - std::pow(2.0, s - d));
  cache[{d, s}] = value;
  return value;
}

/// Integral of |z|^{-s} over the box prod [0, w_k].
inline double corner_box(const std::vector<double>& w, double s) {
  const int d = static_cast<int>(w.size());
  const double c = *std::min_element(w.begin(), w.end());
  if (c <= 0.0) return 0.0;
  double total = std::pow(c, d - s) * unit_corner_cube(d, s);
  // Remaining pieces: every axis split into [0,c] and [c,w_k]; any piece with
  // at least one upper part is at distance >= c from the origin.
  for (unsigned corner = 1; corner < (1u << d); ++corner) {
    std::vector<double> lo(d), hi(d);
    bool empty = false;
    for (int k = 0; k < d; ++k) {
      const bool up = (corner >> k) & 1u;
      lo[k] = up ? c : 0.0;
      hi[k] = up ? w[k] : c;
      if (hi[k] <= lo[k]) empty = true;
    }
    if (!empty) total += regular_box(lo, hi, s, 0);
  }
  return total;
}

}  // namespace detail

/// Integral of |z - a|^{-s} over the box [lo, hi] in R^d, exact up to
/// quadrature error when a lies in the closed box. Requires s < d.
inline double power_box_integral(std::span<const double> lo, std::span<const double> hi, std::span<const double> a,
                                 double s) {
  const int d = static_cast<int>(lo.size());
  require(s < d, "|z|^{-s} is not locally integrable for s >= d");
  bool contains = true;
  for (int k = 0; k < d; ++k) contains = contains && a[k] >= lo[k] && a[k] <= hi[k];
  if (!contains) {
    std::vector<double> l(d), h(d);
    for (int k = 0; k < d; ++k) {
      l[k] = lo[k] - a[k];
      h[k] = hi[k] - a[k];
    }
    return detail::regular_box(l, h, s, 0);
  }
  double total = 0.0;
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    std::vector<double> w(d);
    bool empty = false;
    for (int k = 0; k < d; ++k) {
      const bool up = (corner >> k) & 1u;
      w[k] = up ? hi[k] - a[k] : a[k] - lo[k];
      if (w[k] <= 0.0) empty = true;
    }
    if (!empty) total += detail::corner_box(w, s);
  }
  return total;
}

}  // namespace hardy::quad
