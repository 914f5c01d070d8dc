#pragma once

#include <string>
#include <vector>

#include "openscr/common.hpp"

namespace openscr {

/// Reduced-rank thin plate regression spline basis evaluated at a point
/// set. `columns` holds `df` columns: the polynomial null space
/// (1, x[, y]) followed by the df - (d + 1) leading eigen-directions of the
/// radial kernel, constrained orthogonal to the null space.
struct SplineBasis {
  int dim = 1;
  int df = 0;
  std::vector<std::string> variables;
  Matrix columns;

  int null_space_dim() const { return dim + 1; }

  /// Columns for use next to a separate intercept: the constant column is
  /// dropped and the rest are centered to sum to zero over the points.
  /// Result has df - 1 columns.
  Matrix centered() const;
};

/// Builds the basis at `points` (n x d, d in {1, 2}). 1-D uses the m = 2
/// kernel r^3, 2-D uses r^2 log r. Coordinates are centered and isotropically
/// rescaled before the kernel is formed, which leaves fitted values
/// unchanged under rotation and translation of the inputs.
///
/// Throws ValidationError when df is below d + 1, exceeds the number of
/// distinct points, or the kernel's retained eigenvalues fall below a
/// relative tolerance of 1e-10.
SplineBasis tprs_basis(const Matrix& points, int df, std::vector<std::string> variables = {});

}  // namespace openscr
