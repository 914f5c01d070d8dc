#pragma once

#include <functional>
#include <string>
#include <vector>

#include "openscr/common.hpp"

namespace openscr {

struct OptimizeControls {
  int max_iterations = 500;
  double gradient_tolerance = 1e-4;  ///< infinity norm
  double relative_tolerance = 1e-9;  ///< relative change in the objective
  double max_step = 5.0;             ///< largest coordinate move per iteration
};

struct OptimizeResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> trace;  ///< objective after each iteration
};

/// Returns f(x) and writes its gradient; -inf marks an infeasible point.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// BFGS ascent with a backtracking Armijo line search. Converges when the
/// gradient's infinity norm is below tolerance and the last step changed the
/// objective by less than relative_tolerance (or no step was needed).
OptimizeResult maximize_bfgs(const Objective& f, Vector x0, const OptimizeControls& controls = {});

/// Symmetrized central-difference Jacobian of a gradient function.
Matrix hessian_from_gradient(const std::function<Vector(const Vector&)>& grad, const Vector& x, double step = 1e-4);

}  // namespace openscr
