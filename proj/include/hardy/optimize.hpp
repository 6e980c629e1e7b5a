#pragma once

/// \file optimize.hpp
/// Accelerated projected gradient descent with backtracking, shared by the
/// capacity and Rayleigh solvers.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "hardy/error.hpp"

namespace hardy {

struct SolverConfig {
  int max_iters = 20000;
  /// Multiplies the solver's natural first step (about 1/Lipschitz).
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  double tol_rel_energy = 1e-7;
  std::uint64_t seed = 0;
  /// Accepted steps over which the relative decrease is measured.
  int window = 25;
  /// Solve on a coarsened grid first and interpolate.
  bool nested = true;

  void validate() const {
    require(max_iters > 0, "max_iters must be positive");
    require(initial_step > 0.0, "initial_step must be positive");
    require(shrink > 0.0 && shrink < 1.0, "shrink must lie in (0, 1)");
    require(sufficient_decrease > 0.0 && sufficient_decrease <= 0.5, "sufficient_decrease must lie in (0, 1/2]");
    require(tol_rel_energy > 0.0, "tol_rel_energy must be positive");
    require(window > 0, "window must be positive");
  }
};

inline void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = {{"max_iters", c.max_iters}, {"initial_step", c.initial_step}, {"shrink", c.shrink},
       {"sufficient_decrease", c.sufficient_decrease}, {"tol_rel_energy", c.tol_rel_energy},
       {"seed", c.seed}, {"window", c.window}, {"nested", c.nested}};
}

inline void from_json(const nlohmann::json& j, SolverConfig& c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "max_iters") c.max_iters = value.get<int>();
    else if (key == "initial_step") c.initial_step = value.get<double>();
    else if (key == "shrink") c.shrink = value.get<double>();
    else if (key == "sufficient_decrease") c.sufficient_decrease = value.get<double>();
    else if (key == "tol_rel_energy") c.tol_rel_energy = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "window") c.window = value.get<int>();
    else if (key == "nested") c.nested = value.get<bool>();
    else throw InvalidInput("unknown solver option '" + key + "'");
  }
  c.validate();
}

struct DescentResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Objective after every accepted step, starting with the initial point.
  std::vector<double> history;
};

/// Objective: writes the gradient and returns the value.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;
/// Projection onto the feasible set, in place.
using Projection = std::function<void(std::span<double>)>;
/// Rescales an accepted iterate in place and returns the factor c (x <- c x).
/// Only valid for objectives that are invariant under the rescaling.
using Normalization = std::function<double(std::span<double>)>;
/// Called after every accepted step with the iteration count and iterate.
using Observer = std::function<void(int, std::span<const double>, double)>;

/// Monotone accelerated projected gradient. Trial points z = P(y - t grad f(y))
/// are accepted once f(z) <= f(y) + <grad f(y), z - y> + |z - y|^2/(2t) and
/// f(z) <= f(y) - sigma |z - y|^2 / t, shrinking t otherwise. Momentum restarts whenever a step would raise f
/// above the last accepted value, so accepted values never increase. Stops
/// when the relative decrease over `window` accepted steps falls below
/// tol_rel_energy.
inline DescentResult projected_descent(std::vector<double> x, const Objective& f, const Projection& project,
                                       const SolverConfig& cfg, double step, const Normalization& normalize = {},
                                       const Observer& observe = {}) {
  cfg.validate();
  require(step > 0.0 && std::isfinite(step), "initial step must be positive");
  const std::size_t n = x.size();
  std::vector<double> gx(n), y(n), gy(n), z(n), gz(n), prev(n);
  project(x);
  if (normalize) normalize(x);
  double fx = f(x, gx);
  require(std::isfinite(fx), "objective is not finite at the initial point");

  DescentResult out;
  out.history.push_back(fx);
  y = x;
  gy = gx;
  double fy = fx, theta = 1.0, t = step * cfg.initial_step;
  const double grow = std::pow(cfg.shrink, -0.125);
  int shrinks_in_a_row = 0;
  bool at_x = true;  // y coincides with the last accepted point

  for (int it = 1; it <= cfg.max_iters; ++it) {
    double fz = 0.0;
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) z[i] = y[i] - t * gy[i];
      project(z);
      fz = f(z, gz);
      double lin = 0.0, quad = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = z[i] - y[i];
        lin += gy[i] * d;
        quad += d * d;
      }
      // The step no longer moves the point: nothing left to gain from y.
      if (quad == 0.0) {
        fz = std::max(fz, fx + std::fabs(fx) + 1.0);
        break;
      }
      const double slack = 1e-15 * std::fabs(fy);
      if (std::isfinite(fz) && fz <= fy + lin + quad / (2.0 * t) + slack &&
          fz <= fy - cfg.sufficient_decrease * quad / t + slack)
        break;
      t *= cfg.shrink;
      if (++shrinks_in_a_row > 200) throw SolverFailure("backtracking failed to find a descent step");
    }
    shrinks_in_a_row = 0;
    if (fz > fx) {
      // Without momentum this is round-off stagnation.
      if (at_x) {
        out.converged = true;
        break;
      }
      // Momentum overshoot: restart from the last accepted point.
      at_x = true;
      theta = 1.0;
      y = x;
      gy = gx;
      fy = fx;
      continue;
    }
    prev.swap(x);
    x.swap(z);
    gx.swap(gz);
    fx = fz;
    if (normalize) {
      const double c = normalize(x);
      for (auto& g : gx) g /= c;
    }
    out.history.push_back(fx);
    out.iterations = it;
    if (observe) observe(it, x, fx);

    const auto k = out.history.size() - 1;
    if (k >= static_cast<std::size_t>(cfg.window)) {
      const double old = out.history[k - cfg.window];
      if (old - fx <= cfg.tol_rel_energy * std::fabs(fx)) {
        out.converged = true;
        break;
      }
    }
    if (fx == 0.0) {
      out.converged = true;
      break;
    }

    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double beta = (theta - 1.0) / theta_next;
    theta = theta_next;
    if (beta > 0.0) {
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + beta * (x[i] - prev[i]);
      project(y);
      fy = f(y, gy);
      at_x = false;
      if (!std::isfinite(fy)) {
        at_x = true;
        theta = 1.0;
        y = x;
        gy = gx;
        fy = fx;
      }
    } else {
      at_x = true;
      y = x;
      gy = gx;
      fy = fx;
    }
    t *= grow;
  }
  out.x = std::move(x);
  out.value = fx;
  return out;
}

}  // namespace hardy
