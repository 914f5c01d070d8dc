#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "openscr/common.hpp"
#include "openscr/covariates.hpp"
#include "openscr/formula.hpp"

namespace openscr {

/// Model parameters, in working-vector order.
enum class Param { lambda = 0, sigma = 1, gamma = 2, phi = 3, D = 4 };
inline constexpr std::array<Param, 5> kAllParams{Param::lambda, Param::sigma, Param::gamma, Param::phi, Param::D};

std::string_view param_name(Param p);
Param param_from_name(std::string_view name);

enum class Link { log, logit };

/// log for lambda, sigma, gamma and D; logit for phi.
Link link_of(Param p);
double apply_link(Link link, double value);
double inverse_link(Link link, double eta);

/// Formula per parameter.
struct ModelSpec {
  std::array<Formula, 5> formulas;

  Formula& operator[](Param p) { return formulas[static_cast<std::size_t>(p)]; }
  const Formula& operator[](Param p) const { return formulas[static_cast<std::size_t>(p)]; }

  /// `lambda ~ ...; sigma ~ ...; ...`
  std::string describe() const;
  /// Smooth-term df values in parameter then term order.
  std::vector<int> smoothing_parameters() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Covariates available to each parameter's formula.
///  - detection: one row per (trap j, primary k), row = k * n_traps + j;
///    lambda and sigma are constant over secondaries within a primary.
///  - dynamics: one row per interval k = 1..K-1 (gamma, phi).
///  - density: one row per mesh point.
struct CovariateFrames {
  int n_traps = 0;
  int n_primaries = 0;
  CovariateTable detection;
  CovariateTable dynamics;
  CovariateTable density;

  const CovariateTable& for_param(Param p) const;
};

/// Trap covariates are repeated over primaries and joined by `primary`
/// (factor "1".."K") and `time` (years from the first primary's mid-point).
/// Interval rows carry the `time` and `primary` of the primary that opens
/// the interval.
CovariateFrames make_frames(const CovariateTable& traps, std::span<const double> midpoint_years,
                            const CovariateTable& mesh);

struct TermSlice {
  std::string label;
  int offset = 0;  ///< relative to the parameter's first coefficient
  int size = 0;
};

/// Linear predictor bookkeeping for one parameter: eta = X * theta[offset:offset+cols].
struct ParameterDesign {
  Param param = Param::lambda;
  Link link = Link::log;
  Matrix X;
  int offset = 0;
  std::vector<std::string> coef_names;
  std::vector<TermSlice> terms;

  int n_coef() const { return static_cast<int>(X.cols()); }
  int n_units() const { return static_cast<int>(X.rows()); }
};

/// Maps a flat working-scale vector to per-parameter linear predictors.
/// Parameters with no evaluation units (gamma, phi when K = 1) carry no
/// coefficients.
class ParamMap {
 public:
  static ParamMap build(const ModelSpec& spec, const CovariateFrames& frames);

  const ParameterDesign& operator[](Param p) const { return designs_[static_cast<std::size_t>(p)]; }
  int size() const { return size_; }
  int n_traps() const { return n_traps_; }
  int n_primaries() const { return n_primaries_; }
  /// "lambda.(Intercept)", "lambda.stratum[Island]", "D.s(x,y,20).3", ...
  std::vector<std::string> names() const;
  Vector slice(const Vector& theta, Param p) const;
  /// Inverse of slice(): writes each parameter block back into one vector.
  Vector assemble(const std::array<Vector, 5>& blocks) const;

 private:
  std::array<ParameterDesign, 5> designs_;
  int size_ = 0;
  int n_traps_ = 0;
  int n_primaries_ = 0;
};

/// Natural-scale parameter fields. lambda/sigma are indexed k * n_traps + j.
template <class T>
struct NaturalFields {
  int n_traps = 0;
  int n_primaries = 0;
  std::vector<T> lambda;
  std::vector<T> sigma;
  std::vector<T> gamma;  ///< per interval, K - 1 entries
  std::vector<T> phi;    ///< per interval, K - 1 entries
  std::vector<T> D;      ///< per mesh point

  const T& lambda_at(int j, int k) const { return lambda[static_cast<std::size_t>(k) * n_traps + j]; }
  const T& sigma_at(int j, int k) const { return sigma[static_cast<std::size_t>(k) * n_traps + j]; }
};

using Fields = NaturalFields<double>;

/// field = inverse_link(X * theta_slice) for every parameter. Throws
/// NumericalError naming the parameter and unit when a linear predictor is
/// not finite.
Fields expand_params(const Vector& theta, const ParamMap& map);

/// Intercept-only fields for K primaries, J traps and M mesh points.
Fields constant_fields(int n_traps, int n_primaries, int n_mesh, double lambda, double sigma, double gamma,
                       double phi, double D);

}  // namespace openscr
