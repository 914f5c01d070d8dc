#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "openscr/infer.hpp"

namespace openscr {

/// Simulates detected individuals' histories under the observed effort:
/// N ~ Poisson(sum a D), centers proportional to a D, entry primary ~ beta,
/// survival per interval ~ Bernoulli(phi^delta), then per alive secondary a
/// detection with probability p and a trap drawn in proportion to e_j u_j.
/// Only detected individuals are returned, with ids "sim1", "sim2", ...
CaptureHistories simulate_dataset(const Fields& fields, const ScrData& data, std::mt19937_64& rng);
CaptureHistories simulate_dataset(const Fields& fields, const ScrData& data, std::uint64_t seed);

struct GofStatistics {
  std::vector<double> first_seen;   ///< individuals first detected per primary
  double t_between = 0.0;           ///< mean (last - first) detected primary
  std::vector<double> trap_counts;  ///< distinct individuals ever detected per trap
};

GofStatistics test_statistics(const CaptureHistories& histories, int n_traps);

/// Mean of per-trap values within each group (e.g. stratum of the trap).
std::vector<double> group_means(const std::vector<double>& per_trap, const std::vector<int>& group, int n_groups);

/// Mid-rank fraction r = (#below + (#equal + 1) / 2) / (n + 1) and the
/// two-sided p = min(1, 2 min(r, 1 - r)).
double rank_fraction(double observed, const std::vector<double>& simulated);
double two_sided_p(double observed, const std::vector<double>& simulated);

struct GofComponent {
  std::string label;
  double observed = 0.0;
  std::vector<double> simulated;
  double p_value = 1.0;
  double lower = 0.0;  ///< 2.5% envelope
  double upper = 0.0;  ///< 97.5% envelope
};

/// A scalar statistic is judged on its own envelope. A vector statistic is
/// judged by a Pearson-type discrepancy sum_c (x_c - mean_c)^2 / var_c
/// against the simulated discrepancies, one-sided (large is bad).
struct GofTest {
  std::string name;
  std::vector<GofComponent> components;
  double observed_discrepancy = 0.0;
  std::vector<double> simulated_discrepancy;
  double p_value = 1.0;
  bool inside_envelope = true;
};

struct GofReport {
  int n_sims = 0;
  std::uint64_t seed = 0;
  bool fixed_parameters = false;
  std::vector<GofTest> tests;  ///< first_seen, t_between, trap_counts
};

struct GofOptions {
  int n_sims = 200;
  std::uint64_t seed = 1;
  /// Optional trap grouping for the per-trap test (e.g. stratum codes).
  std::vector<int> trap_groups;
  std::vector<std::string> group_names;
};

/// Each simulation picks a bootstrap draw uniformly, rebuilds its fields
/// and simulates a replicate dataset.
GofReport run_gof(const CandidateSet& candidates, const BootstrapDraws& draws, const ModelData& data,
                  const CaptureHistories& observed, const GofOptions& options);

/// All simulations from one parameter point (e.g. the MLE).
GofReport run_gof(const Fields& fields, const ModelData& data, const CaptureHistories& observed,
                  const GofOptions& options);

}  // namespace openscr
