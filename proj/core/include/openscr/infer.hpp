#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "openscr/select.hpp"

namespace openscr {

/// One model-averaging bootstrap replicate. Population quantities are on
/// the marked scale.
struct BootstrapDraw {
  int model = 0;
  Vector theta;
  std::vector<double> D;           ///< superpopulation density per mesh point
  std::vector<double> gamma;       ///< per interval
  std::vector<double> phi;         ///< per interval
  std::vector<double> beta;        ///< per primary
  std::vector<double> multiplier;  ///< c_k, D_k = c_k D
  double superpopulation = 0.0;    ///< sum a D
  std::vector<double> abundance;   ///< c_k sum a D
  std::vector<double> mean_lambda; ///< per primary, averaged over traps
  std::vector<double> mean_sigma;
};

struct BootstrapDraws {
  std::vector<BootstrapDraw> draws;
  std::uint64_t seed = 0;
  std::vector<int> model_counts;
  int size() const { return static_cast<int>(draws.size()); }
};

/// Eigen-factor of a covariance, clamping negative eigenvalues to zero.
/// Throws NumericalError when the repair changes the trace by more than 1%.
Matrix covariance_factor(const Matrix& vcov);

/// Draw i uses stream (seed, i): model ~ weights, theta ~ N(theta_hat, vcov).
BootstrapDraws model_average_bootstrap(const CandidateSet& candidates, const ModelData& data, int n_draws,
                                       std::uint64_t seed);

/// Natural-scale quantities for one working vector.
BootstrapDraw derive_draw(const ParamMap& map, const Vector& theta, const ModelData& data);

/// Linear-interpolation quantile (order statistics x_(1..n), h = (n - 1) p).
double quantile(std::vector<double> values, double p);
/// (Q3 - Q1) / median; +inf when the median is zero.
double iqd(std::span<const double> values);

struct Interval {
  double mean = 0.0;
  double lcl = 0.0;  ///< 2.5% quantile
  double ucl = 0.0;  ///< 97.5% quantile
};

Interval summarize(std::span<const double> values);

struct RegionOfInference {
  std::vector<double> iqd;
  std::vector<char> keep;
  int kept() const;
};

/// IQD of the density draws at every mesh point; keep = IQD < threshold.
RegionOfInference iqd_region(const BootstrapDraws& draws, double threshold);

struct DensitySummary {
  std::vector<Interval> density;   ///< whole-population density per mesh point
  std::vector<double> cv;          ///< sd / mean per mesh point
  std::vector<Interval> abundance; ///< whole-population N_k within the region
  Interval superpopulation;
};

DensitySummary summarize_density(const BootstrapDraws& draws, std::span<const double> area, double marked_proportion,
                                 const RegionOfInference* region = nullptr);

struct SalinityBand {
  int band = 0;  ///< label x covers [x - 0.5, x + 0.5)
  double area = 0.0;
  int n_points = 0;
  std::vector<Interval> density;    ///< per primary
  std::vector<Interval> abundance;  ///< per primary
};

/// Band x holds kept points with salinity in [x - width/2, x + width/2).
std::vector<SalinityBand> salinity_bands(const BootstrapDraws& draws, std::span<const double> salinity,
                                         std::span<const double> area, double marked_proportion,
                                         const RegionOfInference* region = nullptr, double width = 1.0);

/// Per-interval survival and recruits per year (beta_{k+1} N-bar / delta_k,
/// whole-population scale).
struct DynamicsSummary {
  std::vector<Interval> phi;
  std::vector<Interval> gamma;
  std::vector<Interval> recruits_per_year;
};

DynamicsSummary summarize_dynamics(const BootstrapDraws& draws, std::span<const double> delta, double marked_proportion);

struct DetectionSummary {
  std::vector<Interval> lambda;  ///< per primary
  std::vector<Interval> sigma;
};

DetectionSummary summarize_detection(const BootstrapDraws& draws);

}  // namespace openscr
