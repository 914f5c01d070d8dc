#pragma once

#include <optional>
#include <string>
#include <vector>

#include "openscr/design.hpp"
#include "openscr/likelihood.hpp"
#include "openscr/optimize.hpp"

namespace openscr {

/// Data plus covariates: everything needed to fit any ModelSpec.
struct ModelData {
  ScrData scr;
  CovariateFrames frames;
  std::vector<Point> traps;  ///< meters, used for starting values
};

struct FitControls {
  OptimizeControls optimizer;
  bool compute_vcov = true;
};

struct FitResult {
  ModelSpec spec;
  std::vector<std::string> names;
  Vector theta;
  Matrix vcov;  ///< empty unless has_vcov
  bool has_vcov = false;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
  std::vector<double> trace;

  int n_params() const { return static_cast<int>(theta.size()); }
};

/// -2 loglik + 2 q with q the full working-parameter count.
double aic(double loglik, int n_params);
double aic(const FitResult& fit);

/// w_i = exp(-delta_i / 2) / sum_j exp(-delta_j / 2).
std::vector<double> aic_weights(const std::vector<double>& aics);

/// Data-driven starting values; non-intercept coefficients are zero.
Vector default_start(const ParamMap& map, const ModelData& data);

/// Copies coefficients whose names match `previous` into `start`.
Vector warm_start(const ParamMap& map, const FitResult& previous, Vector start);

/// Maximum likelihood fit. Non-convergence and a singular Hessian are
/// reported through the result flags rather than thrown.
FitResult maximize(const ModelSpec& spec, const ModelData& data, const std::optional<Vector>& theta0 = std::nullopt,
                   const FitControls& controls = {});

/// Same, warm-started from a related fit.
FitResult maximize_from(const ModelSpec& spec, const ModelData& data, const FitResult& previous,
                        const FitControls& controls = {});

}  // namespace openscr
