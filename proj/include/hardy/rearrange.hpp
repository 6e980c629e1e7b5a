#pragma once

/// \file rearrange.hpp
/// Distribution functions, decreasing rearrangements f*, the maximal function
/// f** and Schwarz symmetrization of grid functions.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hardy/error.hpp"
#include "hardy/grid.hpp"

namespace hardy {

/// Right-continuous nonincreasing step function on [0, inf): levels[0] on
/// [0, t_1), levels[i] on [t_i, t_{i+1}), levels[k] on [t_k, inf).
class StepFunction {
 public:
  StepFunction() : levels_{0.0} {}
  StepFunction(std::vector<double> breakpoints, std::vector<double> levels)
      : t_(std::move(breakpoints)), levels_(std::move(levels)) {
    require(levels_.size() == t_.size() + 1, "step function needs one more level than breakpoints");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      require(std::isfinite(t_[i]) && t_[i] > 0.0, "breakpoints must be finite and positive");
      require(i == 0 || t_[i] > t_[i - 1], "breakpoints must be strictly increasing");
    }
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      require(std::isfinite(levels_[i]) && levels_[i] >= 0.0, "levels must be finite and nonnegative");
      require(i == 0 || levels_[i] <= levels_[i - 1], "levels must be nonincreasing");
    }
  }

  const std::vector<double>& breakpoints() const { return t_; }
  const std::vector<double>& levels() const { return levels_; }
  std::size_t segments() const { return levels_.size(); }
  /// Start of segment i (0 for the first).
  double start(std::size_t i) const { return i == 0 ? 0.0 : t_[i - 1]; }
  /// End of segment i (infinity for the last).
  double end(std::size_t i) const { return i < t_.size() ? t_[i] : std::numeric_limits<double>::infinity(); }

  double operator()(double t) const {
    const auto i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
    return levels_[i];
  }

  /// Measure of the support, infinite when the last level is positive.
  double support_measure() const {
    if (levels_.back() > 0.0) return std::numeric_limits<double>::infinity();
    std::size_t i = levels_.size() - 1;
    while (i > 0 && levels_[i - 1] == 0.0) --i;
    return start(i);
  }

  /// Integral of phi(level) over [0, inf) with phi(0) = 0.
  template <class Phi>
  double integrate(Phi&& phi) const {
    double s = 0.0;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i] == 0.0) continue;
      if (i + 1 == levels_.size()) return std::numeric_limits<double>::infinity();
      s += phi(levels_[i]) * (end(i) - start(i));
    }
    return s;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "t_start,level\n";
    for (std::size_t i = 0; i < levels_.size(); ++i) out << start(i) << ',' << levels_[i] << '\n';
    return out.str();
  }

  static StepFunction from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    require(line.rfind("t_start", 0) == 0, "step function CSV needs a 't_start,level' header");
    std::vector<double> t, v;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      require(comma != std::string::npos, "malformed step function row '" + line + "'");
      const double a = std::stod(line.substr(0, comma)), b = std::stod(line.substr(comma + 1));
      if (v.empty()) {
        require(a == 0.0, "first step must start at 0");
      } else {
        t.push_back(a);
      }
      v.push_back(b);
    }
    require(!v.empty(), "empty step function CSV");
    return StepFunction(std::move(t), std::move(v));
  }

  friend bool operator==(const StepFunction& a, const StepFunction& b) {
    return a.t_ == b.t_ && a.levels_ == b.levels_;
  }

 private:
  std::vector<double> t_;
  std::vector<double> levels_;
};

namespace detail {

/// |f| on the mask, sorted descending (stable on ties, so by cell index).
inline std::vector<double> sorted_abs_values(const GridFunction& f) {
  std::vector<double> v;
  v.reserve(f.domain().masked_count());
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.domain().inside(i)) v.push_back(std::fabs(f[i]));
  std::stable_sort(v.begin(), v.end(), std::greater<>());
  return v;
}

/// Step function with value sorted[j] on [j m, (j+1) m), equal runs merged.
inline StepFunction steps_from_sorted(const std::vector<double>& sorted, double m) {
  std::vector<double> t, v;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    if (sorted[j] == 0.0) break;
    if (v.empty()) {
      v.push_back(sorted[j]);
    } else if (sorted[j] != v.back()) {
      t.push_back(static_cast<double>(j) * m);
      v.push_back(sorted[j]);
    }
  }
  if (v.empty()) return StepFunction();
  std::size_t positive = 0;
  while (positive < sorted.size() && sorted[positive] > 0.0) ++positive;
  t.push_back(static_cast<double>(positive) * m);
  v.push_back(0.0);
  return StepFunction(std::move(t), std::move(v));
}

}  // namespace detail

/// alpha_f(s) = |{ |f| > s }| as a step function of s.
inline StepFunction distribution(const GridFunction& f) {
  check_finite(f, "f");
  const auto sorted = detail::sorted_abs_values(f);
  const double m = f.domain().cell_volume();
  // Distinct positive values ascending are the jumps; alpha on [s_j, s_{j+1})
  // is the measure of cells with value > s_j.
  std::vector<double> t, v;
  std::size_t above = 0;
  while (above < sorted.size() && sorted[above] > 0.0) ++above;
  v.push_back(static_cast<double>(above) * m);
  std::size_t j = above;
  while (j > 0) {
    const double s = sorted[j - 1];
    std::size_t k = j;
    while (k > 0 && sorted[k - 1] == s) --k;
    t.push_back(s);
    v.push_back(static_cast<double>(k) * m);
    j = k;
  }
  return StepFunction(std::move(t), std::move(v));
}

/// f*, the sorted |f| values each occupying one cell of measure.
inline StepFunction decreasing_rearrangement(const GridFunction& f) {
  check_finite(f, "f");
  return detail::steps_from_sorted(detail::sorted_abs_values(f), f.domain().cell_volume());
}

/// Distribution function of a decreasing step function viewed as a function
/// on (0, inf); needs bounded support.
inline StepFunction distribution(const StepFunction& fstar) {
  const auto& v = fstar.levels();
  require(v.back() == 0.0, "distribution of a step function with unbounded support is infinite");
  std::size_t z = 0;
  while (v[z] > 0.0) ++z;
  std::vector<double> t, a{fstar.start(z)};
  std::size_t j = z;
  while (j > 0) {
    const double s = v[j - 1];
    std::size_t k = j;
    while (k > 0 && v[k - 1] == s) --k;
    t.push_back(s);
    a.push_back(fstar.start(k));
    j = k;
  }
  return StepFunction(std::move(t), std::move(a));
}

/// f**(t) = (1/t) int_0^t f*, evaluated exactly at query points.
class MaximalFunction {
 public:
  explicit MaximalFunction(StepFunction fstar) : f_(std::move(fstar)) {
    prefix_.resize(f_.segments());
    double acc = 0.0;
    for (std::size_t i = 0; i < f_.segments(); ++i) {
      prefix_[i] = acc;
      if (i + 1 < f_.segments()) acc += f_.levels()[i] * (f_.end(i) - f_.start(i));
    }
  }
  double operator()(double t) const {
    if (!(t > 0.0)) throw InvalidInput("f** is defined for t > 0 only");
    const auto& bp = f_.breakpoints();
    const auto i = static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), t) - bp.begin());
    return (prefix_[i] + f_.levels()[i] * (t - f_.start(i))) / t;
  }
  std::vector<double> operator()(const std::vector<double>& ts) const {
    std::vector<double> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) out[i] = (*this)(ts[i]);
    return out;
  }
  const StepFunction& fstar() const { return f_; }
  /// int_0^{start of segment i} f*.
  double prefix(std::size_t i) const { return prefix_[i]; }

 private:
  StepFunction f_;
  std::vector<double> prefix_;
};

inline MaximalFunction maximal_function(const StepFunction& fstar) { return MaximalFunction(fstar); }

struct Symmetrization {
  GridFunction u;
  /// max over the levels of f of |alpha_{u}(s) - alpha_f(s)|, the measure
  /// misassigned by the cell-center rule.
  double measure_error;
};

/// Schwarz symmetrization: the cell at center x gets f*(omega_N |x|^N).
inline Symmetrization schwarz_symmetrization(const GridFunction& f, const DomainPtr& target) {
  check_finite(f, "f");
  const auto& t = *target;
  const int n = t.dim();
  require(n == f.domain().dim(), "target dimension differs from f");
  for (int k = 0; k < n; ++k)
    require(std::fabs(t.lo()[k] + t.hi()[k]) <= 1e-9 * (t.hi()[k] - t.lo()[k]), "target box must be centered at the origin");
  const auto fstar = decreasing_rearrangement(f);
  const double support = fstar.support_measure();
  const double omega = unit_ball_volume(n);
  const double radius = std::pow(support / omega, 1.0 / n);
  require(radius <= t.inner_radius(), "target box is too small to contain the ball of measure |supp f|");
  auto u = GridFunction::from_function(target, [&](const Point& x) {
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    return fstar(omega * std::pow(r2, 0.5 * n));
  });
  // Compare distribution functions at every level of f.
  const auto af = distribution(f), au = distribution(u);
  double err = 0.0;
  for (double s : af.breakpoints()) {
    const double below = std::nextafter(s, 0.0);
    err = std::max({err, std::fabs(af(s) - au(s)), std::fabs(af(below) - au(below))});
  }
  err = std::max(err, std::fabs(af(0.0) - au(0.0)));
  return {std::move(u), err};
}

/// int_0^inf f* g* dt - int f g dx for nonnegative f, g on a common domain.
inline double hardy_littlewood_gap(const GridFunction& f, const GridFunction& g) {
  require(same_domain(f.domain_ptr(), g.domain_ptr()), "hardy_littlewood_gap: f and g live on different domains");
  check_finite(f, "f");
  check_finite(g, "g");
  for (std::size_t i = 0; i < f.size(); ++i)
    require(f[i] >= 0.0 && g[i] >= 0.0, "hardy_littlewood_gap needs nonnegative f and g");
  const auto fs = detail::sorted_abs_values(f), gs = detail::sorted_abs_values(g);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t j = 0; j < fs.size(); ++j) lhs += fs[j] * gs[j];
  for (std::size_t i = 0; i < f.size(); ++i) rhs += f[i] * g[i];
  return (lhs - rhs) * f.domain().cell_volume();
}

}  // namespace hardy
