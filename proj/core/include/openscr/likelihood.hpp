#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "openscr/common.hpp"
#include "openscr/design.hpp"
#include "openscr/mesh.hpp"
#include "openscr/survey.hpp"

namespace openscr {

/// Hazard half-normal encounter rate: lambda * exp(-r^2 / (2 sigma^2)).
double encounter_rate(double lambda, double sigma, double r);

/// Detection quantities for one mesh point and one secondary occasion.
struct OccasionDetection {
  double hazard = 0.0;  ///< E = sum_j e_j u_j
  double p = 0.0;       ///< 1 - exp(-E)
  std::vector<double> alloc;  ///< e_j u_j / E; all zero when E = 0
};

/// Inputs of the detection model: natural-scale lambda/sigma per
/// (trap, primary), effort and trap-to-mesh distances (meters).
struct DetectionField {
  const Fields& fields;
  const EffortArray& effort;
  const Matrix& distances;
};

OccasionDetection occasion_detection(const DetectionField& det, int m, int k, int l);

/// Entry probabilities beta_1..beta_K from per-interval entry rates and
/// interval lengths (years). beta_1 = exp(-sum gamma delta); later entries
/// share 1 - beta_1 in proportion to gamma_{k-1} delta_{k-1}.
std::vector<double> entry_probs(std::span<const double> gamma, std::span<const double> delta);

/// Per-interval dynamics on the natural scale.
struct StateModel {
  std::vector<double> gamma;
  std::vector<double> phi;
  std::vector<double> delta;
};

enum State { kBefore = 0, kDuring = 1, kAfter = 2 };

/// Markov chain over {B, D, A}: initial distribution and one transition
/// matrix per interval (rows = from-state).
struct TransitionModel {
  std::vector<double> beta;
  std::array<double, 3> initial{};
  std::vector<Eigen::Matrix3d> steps;
  std::vector<double> entry_conditional;  ///< b_k = beta_{k+1} / (1 - sum_{m<=k} beta_m)
  std::vector<double> survival;           ///< phi_k^delta_k
};

TransitionModel state_machine(const StateModel& state);
/// Same chain from entry probabilities and per-interval survival phi^delta.
TransitionModel transitions_from(std::span<const double> beta, std::span<const double> survival);

/// Pr(omega_i | activity center at mesh point m), computed with a
/// log-domain forward recursion over primaries.
double individual_probability(const CaptureHistories& histories, int i, int m, const DetectionField& det,
                              const TransitionModel& transitions);
double individual_log_probability(const CaptureHistories& histories, int i, int m, const DetectionField& det,
                                  const TransitionModel& transitions);

struct Detection {
  int primary = 0;
  int secondary = 0;  ///< within primary
  int flat = 0;       ///< flat secondary index
  int trap = 0;
};

/// Distinct capture history with its multiplicity.
struct HistoryPattern {
  std::vector<Detection> detections;  ///< ordered by flat secondary
  int count = 0;
  std::string first_id;
};

/// Everything the likelihood needs apart from the parameters.
struct ScrData {
  int n_traps = 0;
  int n_primaries = 0;
  int n_mesh = 0;
  std::vector<double> delta;
  Matrix dist2;  ///< squared trap-to-mesh distances, n_traps x n_mesh (m^2)
  std::vector<double> area;  ///< mesh cell areas (km^2)
  EffortArray effort;
  std::vector<HistoryPattern> patterns;
  int n_individuals = 0;

  std::vector<int> layout() const { return effort.layout(); }
  double total_area() const;
};

/// Collapses identical histories and validates them against the effort.
ScrData make_scr_data(const Matrix& distances, std::vector<double> area, EffortArray effort, std::vector<double> delta,
                      const CaptureHistories& histories);
ScrData make_scr_data(const TrapArray& traps, const Mesh& mesh, const RobustDesign& design,
                      const CaptureHistories& histories);

/// Per-mesh-point detection summaries.
struct DetectabilitySurface {
  std::vector<double> p_dot;  ///< probability of at least one detection
};

DetectabilitySurface detectability(const Fields& fields, const ScrData& data);

/// Poisson point-process log-likelihood (additive constants dropped):
///   -sum_m a_m D_m p.(x_m) + sum_i log(sum_m a_m D_m Pr(omega_i | x_m)).
/// Throws NumericalError naming the first individual whose history has
/// probability zero under every mesh point.
double total_loglik(const Fields& fields, const ScrData& data);

/// The same sum from its pieces: per-mesh a_m D_m, p.(x_m), and one row of
/// Pr(omega_i | x_m) per individual.
double point_process_loglik(std::span<const double> aD, std::span<const double> p_dot,
                            const std::vector<std::vector<double>>& history_probs);

/// Density per primary: D_1 = beta_1 D; D_k = phi_{k-1}^delta_{k-1} D_{k-1} + beta_k D.
struct DerivedDensity {
  std::vector<double> multiplier;  ///< c_k with D_k = c_k D
  std::vector<std::vector<double>> density;  ///< D_k[m]
  std::vector<double> abundance;   ///< N_k / marked_proportion
  double superpopulation = 0.0;    ///< N-bar / marked_proportion
};

DerivedDensity derived_density(const StateModel& state, std::span<const double> D, std::span<const double> area,
                               double marked_proportion = 1.0);

/// Occasion multipliers c_k alone.
std::vector<double> occasion_multipliers(const StateModel& state);

/// Working-scale objective: theta -> log-likelihood through a ParamMap.
class LogLikelihood {
 public:
  LogLikelihood(const ScrData& data, ParamMap map) : data_(&data), map_(std::move(map)) {}

  const ParamMap& map() const { return map_; }
  const ScrData& data() const { return *data_; }
  int dim() const { return map_.size(); }

  /// Returns -inf instead of throwing on infeasible parameters.
  double value(const Vector& theta) const;
  /// Exact gradient by forward-mode automatic differentiation.
  Vector gradient(const Vector& theta) const;
  /// Value and gradient together.
  double value_and_gradient(const Vector& theta, Vector& grad) const;

 private:
  const ScrData* data_;
  ParamMap map_;
};

}  // namespace openscr
