#pragma once

/// \file grid.hpp
/// Uniform Cartesian cell grids over boxes in R^N, functions on them and the
/// discrete p-Dirichlet energy that every solver in the library minimizes.
///
/// Values live at cell centers. Functions are stored on the whole box and are
/// hard zeros on cells outside the domain mask, so a function on Omega is its
/// own zero extension. What happens beyond the faces of the box is decided per
/// face by a Closure:
///
///   zero       the lattice continues with zero values (Dirichlet data on the
///              ghost layer one cell beyond the box),
///   far_field  the box is a window onto an unbounded domain; the outside is
///              replaced by the p-harmonic tail |x - c|^{(p-N)/(p-1)} through a
///              Robin term on the face,
///   one_sided  no ghost layer; the last forward difference is replaced by a
///              backward one (an open boundary, used for consistency checks).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardy/error.hpp"

namespace hardy {

inline constexpr int kMaxDim = 6;

using Point = std::vector<double>;
using Mask = std::vector<std::uint8_t>;

enum class Closure { zero, far_field, one_sided };

inline std::string to_string(Closure c) {
  switch (c) {
    case Closure::zero: return "zero";
    case Closure::far_field: return "far_field";
    case Closure::one_sided: return "one_sided";
  }
  return "?";
}

inline Closure closure_from_string(const std::string& s) {
  if (s == "zero" || s == "dirichlet") return Closure::zero;
  if (s == "far_field") return Closure::far_field;
  if (s == "one_sided") return Closure::one_sided;
  throw InvalidInput("unknown closure '" + s + "'");
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
  return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

class GridDomain {
 public:
  GridDomain(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> cells)
      : lo_(std::move(lo)), hi_(std::move(hi)), cells_(std::move(cells)) {
    const auto n = lo_.size();
    require(n >= 1 && n <= static_cast<std::size_t>(kMaxDim), "grid dimension must be in [1, 6]");
    require(hi_.size() == n && cells_.size() == n, "box_lo, box_hi and cells_per_axis must have equal length");
    h_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      require(cells_[k] > 0, "cells_per_axis must be positive");
      require(std::isfinite(lo_[k]) && std::isfinite(hi_[k]), "box corners must be finite");
      h_[k] = (hi_[k] - lo_[k]) / static_cast<double>(cells_[k]);
      require(h_[k] > 0.0, "box_hi must exceed box_lo on every axis");
    }
    strides_.assign(n, 1);
    for (std::size_t k = n - 1; k > 0; --k) strides_[k - 1] = strides_[k] * cells_[k];
    size_ = strides_[0] * cells_[0];
    mask_.assign(size_, 1);
    closure_.fill(Closure::zero);
    far_field_center_.resize(n);
    for (std::size_t k = 0; k < n; ++k) far_field_center_[k] = 0.5 * (lo_[k] + hi_[k]);
  }

  /// Grid whose zero ghost layer sits exactly on the faces of [lo, hi]: the
  /// `interior` cell centers per axis are lo + j*h, j = 1..interior, with
  /// h = (hi - lo)/(interior + 1). This is the natural grid for the Dirichlet
  /// problem on the box itself.
  static GridDomain node_aligned(const std::vector<double>& lo, const std::vector<double>& hi,
                                 const std::vector<std::size_t>& interior) {
    require(lo.size() == hi.size() && lo.size() == interior.size(), "mismatched box description");
    std::vector<double> blo(lo.size()), bhi(lo.size());
    for (std::size_t k = 0; k < lo.size(); ++k) {
      require(interior[k] > 0, "interior cell count must be positive");
      const double h = (hi[k] - lo[k]) / static_cast<double>(interior[k] + 1);
      blo[k] = lo[k] + 0.5 * h;
      bhi[k] = hi[k] - 0.5 * h;
    }
    return GridDomain(blo, bhi, interior);
  }

  static GridDomain node_aligned_cube(int dim, double lo, double hi, std::size_t interior) {
    return node_aligned(std::vector<double>(dim, lo), std::vector<double>(dim, hi),
                        std::vector<std::size_t>(dim, interior));
  }

  int dim() const { return static_cast<int>(lo_.size()); }
  std::size_t size() const { return size_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  const std::vector<std::size_t>& cells() const { return cells_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  double spacing(int k) const { return h_[k]; }
  const std::vector<double>& spacings() const { return h_; }
  double min_spacing() const { return *std::min_element(h_.begin(), h_.end()); }
  double max_spacing() const { return *std::max_element(h_.begin(), h_.end()); }
  double cell_volume() const {
    return std::accumulate(h_.begin(), h_.end(), 1.0, std::multiplies<>());
  }

  const Mask& mask() const { return mask_; }
  bool inside(std::size_t i) const { return mask_[i] != 0; }
  std::size_t masked_count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  }
  void set_mask(Mask m) {
    require(m.size() == size_, "mask must have one entry per cell");
    for (auto& b : m) b = b ? 1 : 0;
    mask_ = std::move(m);
  }
  /// Keeps only cells whose centers satisfy the predicate.
  template <class Pred>
  void restrict_mask(Pred&& in_domain) {
    Point x(dim());
    for (std::size_t i = 0; i < size_; ++i) {
      center(i, x);
      if (!in_domain(std::as_const(x))) mask_[i] = 0;
    }
  }

  Closure closure(int axis, bool upper) const { return closure_[2 * axis + (upper ? 1 : 0)]; }
  void set_closure(int axis, bool upper, Closure c) { closure_[2 * axis + (upper ? 1 : 0)] = c; }
  void set_closure(Closure c) {
    for (int k = 0; k < dim(); ++k) {
      set_closure(k, false, c);
      set_closure(k, true, c);
    }
  }
  /// True when every face is closed by zeros, i.e. Omega is the (bounded) masked region.
  bool bounded() const {
    for (int k = 0; k < dim(); ++k)
      if (closure(k, false) != Closure::zero || closure(k, true) != Closure::zero) return false;
    return true;
  }
  bool has_far_field() const {
    for (int k = 0; k < dim(); ++k)
      if (closure(k, false) == Closure::far_field || closure(k, true) == Closure::far_field) return true;
    return false;
  }
  const Point& far_field_center() const { return far_field_center_; }
  void set_far_field_center(Point c) {
    require(static_cast<int>(c.size()) == dim(), "far-field center has wrong dimension");
    for (int k = 0; k < dim(); ++k)
      require(c[k] > lo_[k] && c[k] < hi_[k], "far-field center must lie strictly inside the box");
    far_field_center_ = std::move(c);
  }

  void multi_index(std::size_t i, std::span<std::size_t> out) const {
    for (int k = 0; k < dim(); ++k) {
      out[k] = i / strides_[k];
      i -= out[k] * strides_[k];
    }
  }
  std::size_t flat_index(std::span<const std::size_t> c) const {
    std::size_t i = 0;
    for (int k = 0; k < dim(); ++k) i += c[k] * strides_[k];
    return i;
  }
  void center(std::size_t i, Point& x) const {
    x.resize(dim());
    for (int k = 0; k < dim(); ++k) {
      const std::size_t ck = i / strides_[k];
      i -= ck * strides_[k];
      x[k] = lo_[k] + (static_cast<double>(ck) + 0.5) * h_[k];
    }
  }
  Point center(std::size_t i) const {
    Point x;
    center(i, x);
    return x;
  }
  std::optional<std::size_t> cell_containing(std::span<const double> x) const {
    std::size_t i = 0;
    for (int k = 0; k < dim(); ++k) {
      const double t = (x[k] - lo_[k]) / h_[k];
      if (t < 0.0 || t >= static_cast<double>(cells_[k])) return std::nullopt;
      i += static_cast<std::size_t>(t) * strides_[k];
    }
    return i;
  }
  /// Half of the shortest box edge.
  double inner_radius() const {
    double r = 1e300;
    for (int k = 0; k < dim(); ++k) r = std::min(r, 0.5 * (hi_[k] - lo_[k]));
    return r;
  }

  /// Same box, roughly half the cells per axis; the mask is sampled at the
  /// coarse centers. Used to build initial guesses.
  GridDomain coarsened() const {
    std::vector<std::size_t> c(cells_.size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = std::max<std::size_t>(1, (cells_[k] + 1) / 2);
    GridDomain out(lo_, hi_, c);
    out.closure_ = closure_;
    out.far_field_center_ = far_field_center_;
    Point x;
    for (std::size_t i = 0; i < out.size_; ++i) {
      out.center(i, x);
      const auto j = cell_containing(x);
      out.mask_[i] = j ? mask_[*j] : 0;
    }
    return out;
  }

  bool same_geometry(const GridDomain& o) const {
    return lo_ == o.lo_ && hi_ == o.hi_ && cells_ == o.cells_;
  }
  friend bool operator==(const GridDomain& a, const GridDomain& b) {
    return a.same_geometry(b) && a.mask_ == b.mask_ && a.closure_ == b.closure_ &&
           a.far_field_center_ == b.far_field_center_;
  }

 private:
  std::vector<double> lo_, hi_, h_;
  std::vector<std::size_t> cells_, strides_;
  std::size_t size_ = 0;
  Mask mask_;
  std::array<Closure, 2 * kMaxDim> closure_{};
  Point far_field_center_;
};

using DomainPtr = std::shared_ptr<const GridDomain>;

inline DomainPtr share(GridDomain d) { return std::make_shared<const GridDomain>(std::move(d)); }

inline bool same_domain(const DomainPtr& a, const DomainPtr& b) { return a == b || *a == *b; }

/// Real values per cell. Masked-false cells are forced to zero on construction.
class GridFunction {
 public:
  explicit GridFunction(DomainPtr domain) : domain_(std::move(domain)), values_(domain_->size(), 0.0) {}

  GridFunction(DomainPtr domain, std::vector<double> values)
      : domain_(std::move(domain)), values_(std::move(values)) {
    require(values_.size() == domain_->size(), "grid function needs one value per cell");
    const auto& m = domain_->mask();
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!m[i]) {
        values_[i] = 0.0;
      } else if (!std::isfinite(values_[i])) {
        throw InvalidInput("grid function has a non-finite value at cell " + std::to_string(i));
      }
    }
  }

  template <class F>
  static GridFunction from_function(DomainPtr domain, F&& f) {
    std::vector<double> v(domain->size(), 0.0);
    Point x;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!domain->inside(i)) continue;
      domain->center(i, x);
      v[i] = f(std::as_const(x));
    }
    return GridFunction(std::move(domain), std::move(v));
  }

  const GridDomain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  GridFunction scaled(double c) const {
    GridFunction out = *this;
    for (auto& v : out.values_) v *= c;
    return out;
  }
  GridFunction abs() const {
    GridFunction out = *this;
    for (auto& v : out.values_) v = std::fabs(v);
    return out;
  }
  GridFunction positive_part() const {
    GridFunction out = *this;
    for (auto& v : out.values_) v = std::max(v, 0.0);
    return out;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    return m;
  }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }

 private:
  DomainPtr domain_;
  std::vector<double> values_;
};

inline void check_finite(const GridFunction& f, const char* what) {
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!std::isfinite(f[i])) throw InvalidInput(std::string(what) + " has a non-finite value");
}

/// A boolean cell set F inside Omega.
class CompactSet {
 public:
  CompactSet(DomainPtr domain, Mask member) : domain_(std::move(domain)), member_(std::move(member)) {
    require(member_.size() == domain_->size(), "compact set needs one flag per cell");
    for (std::size_t i = 0; i < member_.size(); ++i) {
      member_[i] = member_[i] ? 1 : 0;
      require(!member_[i] || domain_->inside(i), "compact set must lie inside the domain mask");
    }
  }

  /// Cells of Omega whose centers lie in the closed ball B_r(x).
  static CompactSet ball(DomainPtr domain, const Point& x, double r) {
    Mask m(domain->size(), 0);
    Point c;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!domain->inside(i)) continue;
      domain->center(i, c);
      m[i] = distance(c, x) <= r ? 1 : 0;
    }
    return CompactSet(std::move(domain), std::move(m));
  }

  template <class Pred>
  static CompactSet where(DomainPtr domain, Pred&& pred) {
    Mask m(domain->size(), 0);
    Point c;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!domain->inside(i)) continue;
      domain->center(i, c);
      m[i] = pred(i, std::as_const(c)) ? 1 : 0;
    }
    return CompactSet(std::move(domain), std::move(m));
  }

  const GridDomain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  const Mask& member() const { return member_; }
  bool contains(std::size_t i) const { return member_[i] != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(member_.begin(), member_.end(), std::uint8_t{1}));
  }
  bool empty() const { return count() == 0; }
  double measure() const { return static_cast<double>(count()) * domain_->cell_volume(); }

  /// F is compactly contained in Omega: no member cell touches a masked-false
  /// cell or a zero-closed face of the box.
  bool compactly_contained() const {
    const auto& d = *domain_;
    std::array<std::size_t, kMaxDim> c{};
    for (std::size_t i = 0; i < member_.size(); ++i) {
      if (!member_[i]) continue;
      d.multi_index(i, c);
      for (int k = 0; k < d.dim(); ++k) {
        const auto s = d.strides()[k];
        if (c[k] == 0) {
          if (d.closure(k, false) == Closure::zero) return false;
        } else if (!d.inside(i - s)) {
          return false;
        }
        if (c[k] + 1 == d.cells()[k]) {
          if (d.closure(k, true) == Closure::zero) return false;
        } else if (!d.inside(i + s)) {
          return false;
        }
      }
    }
    return true;
  }

  /// Removes member cells adjacent to the complement of Omega.
  CompactSet trimmed() const {
    const auto& d = *domain_;
    Mask m = member_;
    std::array<std::size_t, kMaxDim> c{};
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!member_[i]) continue;
      d.multi_index(i, c);
      for (int k = 0; k < d.dim() && m[i]; ++k) {
        const auto s = d.strides()[k];
        const bool lo_bad = c[k] == 0 ? d.closure(k, false) == Closure::zero : !d.inside(i - s);
        const bool hi_bad = c[k] + 1 == d.cells()[k] ? d.closure(k, true) == Closure::zero : !d.inside(i + s);
        if (lo_bad || hi_bad) m[i] = 0;
      }
    }
    return CompactSet(domain_, std::move(m));
  }

  CompactSet intersect(const CompactSet& o) const {
    Mask m(member_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = member_[i] && o.member_[i];
    return CompactSet(domain_, std::move(m));
  }
  CompactSet unite(const CompactSet& o) const {
    Mask m(member_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = member_[i] || o.member_[i];
    return CompactSet(domain_, std::move(m));
  }
  bool subset_of(const CompactSet& o) const {
    for (std::size_t i = 0; i < member_.size(); ++i)
      if (member_[i] && !o.member_[i]) return false;
    return true;
  }

 private:
  DomainPtr domain_;
  Mask member_;
};

/// Discrete p-Dirichlet energy sum_cells |grad_h u|^p * vol with forward
/// differences, plus the face terms dictated by each face closure.
class DirichletEnergy {
 public:
  explicit DirichletEnergy(const GridDomain& d) : d_(&d) {
    for (int k = 0; k < d.dim(); ++k) inv_h_[k] = 1.0 / d.spacing(k);
  }

  double value(std::span<const double> u, double p) const { return evaluate(u, p, 0.0, {}); }

  /// Returns the (unregularized) energy and writes the gradient of the
  /// regularized energy, where |grad u|^{p-2} is replaced by
  /// (|grad u|^2 + eps^2)^{(p-2)/2}.
  double value_and_gradient(std::span<const double> u, double p, double eps, std::span<double> grad) const {
    return evaluate(u, p, eps, grad);
  }

 private:
  double robin_coefficient(std::span<const std::size_t> c, int axis, bool upper, double p) const {
    const auto& d = *d_;
    const int n = d.dim();
    const auto& ctr = d.far_field_center();
    double r2 = 0.0, normal_part = 0.0;
    for (int k = 0; k < n; ++k) {
      double xk = d.lo()[k] + (static_cast<double>(c[k]) + 0.5) * d.spacing(k);
      if (k == axis) xk = upper ? d.hi()[k] : d.lo()[k];
      const double dx = xk - ctr[k];
      r2 += dx * dx;
      if (k == axis) normal_part = upper ? dx : -dx;
    }
    const double r = std::sqrt(r2);
    const double gamma = (n - p) / (p - 1.0);
    return std::pow(gamma / r, p - 1.0) * normal_part / r;
  }

  double evaluate(std::span<const double> u, double p, double eps, std::span<double> grad) const {
    const auto& d = *d_;
    const int n = d.dim();
    const std::size_t size = d.size();
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    const bool quadratic = p == 2.0;
    const double eps2 = eps * eps;
    const double half_p = 0.5 * p, half_pm2 = 0.5 * (p - 2.0);

    std::array<Closure, kMaxDim> lower{}, upper{};
    std::array<std::size_t, kMaxDim> stride{}, cells{};
    bool any_lower_face = false, any_far = false;
    for (int k = 0; k < n; ++k) {
      lower[k] = d.closure(k, false);
      upper[k] = d.closure(k, true);
      stride[k] = d.strides()[k];
      cells[k] = d.cells()[k];
      any_lower_face = any_lower_face || lower[k] != Closure::one_sided;
      any_far = any_far || lower[k] == Closure::far_field || upper[k] == Closure::far_field;
    }

    auto powp = [&](double a) { return quadratic ? a * a : std::pow(std::fabs(a), p); };
    auto dpowp = [&](double a) {  // d/da |a|^p, regularized
      return quadratic ? 2.0 * a : p * a * std::pow(a * a + eps2, half_pm2);
    };

    std::array<std::size_t, kMaxDim> c{};
    std::array<double, kMaxDim> df{};
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      const double ui = u[i];
      double s2 = 0.0;
      for (int k = 0; k < n; ++k) {
        double dk;
        if (c[k] + 1 < cells[k]) {
          dk = (u[i + stride[k]] - ui) * inv_h_[k];
        } else if (upper[k] == Closure::zero) {
          dk = -ui * inv_h_[k];
        } else if (upper[k] == Closure::one_sided && cells[k] > 1) {
          dk = (ui - u[i - stride[k]]) * inv_h_[k];
        } else {
          dk = 0.0;
        }
        df[k] = dk;
        s2 += dk * dk;
      }
      if (s2 > 0.0) {
        total += quadratic ? s2 : std::pow(s2, half_p);
        if (want_grad) {
          const double a = quadratic ? 2.0 : p * std::pow(s2 + eps2, half_pm2);
          for (int k = 0; k < n; ++k) {
            const double f = a * df[k] * inv_h_[k];
            if (f == 0.0) continue;
            if (c[k] + 1 < cells[k]) {
              grad[i] -= f;
              grad[i + stride[k]] += f;
            } else if (upper[k] == Closure::zero) {
              grad[i] -= f;
            } else if (upper[k] == Closure::one_sided) {
              grad[i] += f;
              grad[i - stride[k]] -= f;
            }
          }
        }
      }
      if ((any_lower_face || any_far) && ui != 0.0) {
        for (int k = 0; k < n; ++k) {
          if (c[k] == 0) {
            if (lower[k] == Closure::zero) {
              const double dk = ui * inv_h_[k];
              total += powp(dk);
              if (want_grad) grad[i] += dpowp(dk) * inv_h_[k];
            } else if (lower[k] == Closure::far_field) {
              const double beta = robin_coefficient(c, k, false, p);
              total += beta * powp(ui) * inv_h_[k];
              if (want_grad) grad[i] += beta * dpowp(ui) * inv_h_[k];
            }
          }
          if (c[k] + 1 == cells[k] && upper[k] == Closure::far_field) {
            const double beta = robin_coefficient(c, k, true, p);
            total += beta * powp(ui) * inv_h_[k];
            if (want_grad) grad[i] += beta * dpowp(ui) * inv_h_[k];
          }
        }
      }
      for (int k = n - 1; k >= 0; --k) {
        if (++c[k] < cells[k]) break;
        c[k] = 0;
      }
    }
    const double vol = d.cell_volume();
    if (want_grad)
      for (auto& g : grad) g *= vol;
    return total * vol;
  }

  const GridDomain* d_;
  std::array<double, kMaxDim> inv_h_{};
};

/// sum_cells g |u|^p vol and its gradient p g |u|^{p-2} u vol.
inline double weighted_mass(std::span<const double> g, std::span<const double> u, double p, double vol,
                            std::span<double> grad = {}) {
  double total = 0.0;
  const bool quadratic = p == 2.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::fabs(u[i]);
    if (g[i] == 0.0 || a == 0.0) {
      if (!grad.empty()) grad[i] = 0.0;
      continue;
    }
    const double ap1 = quadratic ? a : std::pow(a, p - 1.0);
    total += g[i] * ap1 * a;
    if (!grad.empty()) grad[i] = p * g[i] * ap1 * (u[i] < 0.0 ? -1.0 : 1.0) * vol;
  }
  return total * vol;
}

/// Integral of |grad_h u|^p over the grid, the discrete counterpart of the
/// right-hand side of the Hardy-Sobolev inequality.
inline double gradient_p_energy(const GridFunction& u, double p) {
  require(p > 1.0, "gradient_p_energy needs p > 1");
  check_finite(u, "u");
  return DirichletEnergy(u.domain()).value(u.values(), p);
}

/// sum_cells g |u|^p h^N.
inline double integrate_weighted(const GridFunction& g, const GridFunction& u, double p) {
  require(same_domain(g.domain_ptr(), u.domain_ptr()), "integrate_weighted: g and u live on different domains");
  require(p > 0.0, "integrate_weighted needs p > 0");
  return weighted_mass(g.values(), u.values(), p, g.domain().cell_volume());
}

/// Integral of g over the cells of F.
inline double integrate_over(const GridFunction& g, const CompactSet& F) {
  require(same_domain(g.domain_ptr(), F.domain_ptr()), "integrate_over: g and F live on different domains");
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (F.contains(i)) s += g[i];
  return s * g.domain().cell_volume();
}

// ---------------------------------------------------------------------------
// Transfer between grids.

/// Multilinear interpolation of cell-centered values of `src` at the cell
/// centers of `dst`. Outside the source box values are held constant.
inline std::vector<double> interpolate(const GridDomain& src, std::span<const double> values, const GridDomain& dst) {
  require(src.dim() == dst.dim(), "interpolate: dimension mismatch");
  const int n = src.dim();
  std::vector<double> out(dst.size(), 0.0);
  Point x;
  std::array<std::size_t, kMaxDim> i0{};
  std::array<double, kMaxDim> w{};
  for (std::size_t j = 0; j < dst.size(); ++j) {
    if (!dst.inside(j)) continue;
    dst.center(j, x);
    for (int k = 0; k < n; ++k) {
      const double t = std::clamp((x[k] - src.lo()[k]) / src.spacing(k) - 0.5, 0.0,
                                  static_cast<double>(src.cells()[k] - 1));
      const auto f = static_cast<std::size_t>(std::floor(t));
      i0[k] = std::min(f, src.cells()[k] - 1);
      w[k] = t - static_cast<double>(i0[k]);
    }
    double acc = 0.0;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
      double wt = 1.0;
      std::size_t idx = 0;
      for (int k = 0; k < n; ++k) {
        const bool up = (corner >> k) & 1u;
        std::size_t ck = i0[k] + (up ? 1 : 0);
        if (ck >= src.cells()[k]) ck = src.cells()[k] - 1;
        wt *= up ? w[k] : 1.0 - w[k];
        idx += ck * src.strides()[k];
      }
      if (wt != 0.0) acc += wt * values[idx];
    }
    out[j] = acc;
  }
  return out;
}

/// Averages fine values into the coarse cells containing their centers.
inline std::vector<double> bin_average(const GridDomain& fine, std::span<const double> values, const GridDomain& coarse) {
  std::vector<double> sum(coarse.size(), 0.0), count(coarse.size(), 0.0);
  Point x;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    fine.center(i, x);
    if (const auto j = coarse.cell_containing(x)) {
      sum[*j] += values[i];
      count[*j] += 1.0;
    }
  }
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] = count[j] > 0 ? sum[j] / count[j] : 0.0;
  return sum;
}

/// Nearest-cell sampling of a mask onto another grid over the same region.
inline Mask sample_mask(const GridDomain& src, const Mask& m, const GridDomain& dst) {
  Mask out(dst.size(), 0);
  Point x;
  for (std::size_t j = 0; j < dst.size(); ++j) {
    dst.center(j, x);
    if (const auto i = src.cell_containing(x)) out[j] = m[*i] && dst.inside(j);
  }
  return out;
}

/// A sub-box of a grid with the same spacing. Faces that coincide with faces
/// of the parent box keep the parent's closure; cut faces get a far-field
/// closure centered at `center`.
struct Window {
  GridDomain domain;
  std::vector<std::size_t> origin;  // parent multi-index of the window's first cell

  std::size_t parent_index(std::size_t i, const GridDomain& parent) const {
    std::array<std::size_t, kMaxDim> c{};
    domain.multi_index(i, c);
    for (int k = 0; k < domain.dim(); ++k) c[k] += origin[k];
    return parent.flat_index(std::span<const std::size_t>(c.data(), domain.dim()));
  }
  template <class T>
  std::vector<T> restrict_values(const GridDomain& parent, std::span<const T> v) const {
    std::vector<T> out(domain.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[parent_index(i, parent)];
    return out;
  }
};

inline Window make_window(const GridDomain& parent, const Point& center, double half_width,
                          Closure cut_closure = Closure::far_field) {
  const int n = parent.dim();
  std::vector<double> lo(n), hi(n);
  std::vector<std::size_t> cells(n), origin(n);
  std::array<bool, kMaxDim> at_lo{}, at_hi{};
  for (int k = 0; k < n; ++k) {
    const double h = parent.spacing(k);
    const double a = (center[k] - half_width - parent.lo()[k]) / h - 0.5;
    const double b = (center[k] + half_width - parent.lo()[k]) / h - 0.5;
    const auto last = static_cast<long>(parent.cells()[k]) - 1;
    long i0 = std::max(0L, static_cast<long>(std::ceil(a - 1e-9)));
    long i1 = std::min(last, static_cast<long>(std::floor(b + 1e-9)));
    if (i1 < i0) {
      i0 = std::clamp(static_cast<long>(std::lround(0.5 * (a + b))), 0L, last);
      i1 = i0;
    }
    origin[k] = static_cast<std::size_t>(i0);
    cells[k] = static_cast<std::size_t>(i1 - i0 + 1);
    lo[k] = parent.lo()[k] + static_cast<double>(i0) * h;
    hi[k] = lo[k] + static_cast<double>(cells[k]) * h;
    at_lo[k] = i0 == 0;
    at_hi[k] = i1 == last;
  }
  GridDomain w(lo, hi, cells);
  Window out{std::move(w), std::move(origin)};
  Mask m(out.domain.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = parent.mask()[out.parent_index(i, parent)];
  out.domain.set_mask(std::move(m));
  for (int k = 0; k < n; ++k) {
    out.domain.set_closure(k, false, at_lo[k] ? parent.closure(k, false) : cut_closure);
    out.domain.set_closure(k, true, at_hi[k] ? parent.closure(k, true) : cut_closure);
  }
  if (out.domain.has_far_field()) {
    Point c = center;
    for (int k = 0; k < n; ++k) {
      const double margin = 0.25 * out.domain.spacing(k);
      c[k] = std::clamp(c[k], out.domain.lo()[k] + margin, out.domain.hi()[k] - margin);
    }
    out.domain.set_far_field_center(std::move(c));
  }
  return out;
}

}  // namespace hardy
