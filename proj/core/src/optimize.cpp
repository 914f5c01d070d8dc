#include "openscr/optimize.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace openscr {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 50;

bool feasible(double v, const Vector& g) { return std::isfinite(v) && g.allFinite(); }

}  // namespace

OptimizeResult maximize_bfgs(const Objective& f, Vector x0, const OptimizeControls& controls) {
  const auto n = x0.size();
  OptimizeResult r;
  r.x = std::move(x0);
  r.value = f(r.x, r.gradient);
  if (!feasible(r.value, r.gradient)) {
    r.message = "objective is not finite at the starting point";
    return r;
  }
  if (n == 0) {
    r.converged = true;
    r.message = "no free parameters";
    return r;
  }

  Matrix h = Matrix::Identity(n, n);
  bool scaled = false;
  double last_change = std::numeric_limits<double>::infinity();
  int resets = 0;

  for (;;) {
    const double gnorm = r.gradient.lpNorm<Eigen::Infinity>();
    const bool small_change = r.iterations == 0 || last_change <= controls.relative_tolerance;
    if (gnorm < controls.gradient_tolerance && small_change) {
      r.converged = true;
      r.message = "converged";
      return r;
    }
    if (r.iterations >= controls.max_iterations) {
      r.message = fmt::format("iteration limit {} reached (gradient norm {:.3g})", controls.max_iterations, gnorm);
      return r;
    }

    Vector d = h * r.gradient;
    double slope = r.gradient.dot(d);
    if (!(slope > 0.0)) {
      h.setIdentity();
      d = r.gradient;
      slope = r.gradient.dot(d);
    }
    double t = 1.0;
    const double longest = d.lpNorm<Eigen::Infinity>();
    if (longest * t > controls.max_step) t = controls.max_step / longest;

    Vector x_new, g_new;
    double v_new = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int b = 0; b < kMaxBacktracks; ++b) {
      x_new = r.x + t * d;
      v_new = f(x_new, g_new);
      if (feasible(v_new, g_new) && v_new >= r.value + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (gnorm < controls.gradient_tolerance) {
        // No further ascent possible at machine precision.
        r.converged = true;
        r.message = "converged (line search exhausted)";
        return r;
      }
      if (resets++ < 2) {
        h.setIdentity();
        scaled = false;
        continue;
      }
      r.message = fmt::format("line search failed (gradient norm {:.3g})", gnorm);
      return r;
    }

    const Vector s = x_new - r.x;
    const Vector y = r.gradient - g_new;  // gradient change of -f
    last_change = std::abs(v_new - r.value) / std::max(1.0, std::abs(r.value));
    r.x = std::move(x_new);
    r.value = v_new;
    r.gradient = std::move(g_new);
    ++r.iterations;
    r.trace.push_back(r.value);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h = Matrix::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = h * y;
      h += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
}

Matrix hessian_from_gradient(const std::function<Vector(const Vector&)>& grad, const Vector& x, double step) {
  const auto n = x.size();
  Matrix hess(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = step * std::max(1.0, std::abs(x(j)));
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vector gp = grad(xp);
    const Vector gm = grad(xm);
    if (!gp.allFinite() || !gm.allFinite()) throw NumericalError("gradient not finite while forming the Hessian");
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace openscr
