#pragma once

#include <string>
#include <vector>

#include "openscr/fit.hpp"

namespace openscr {

/// One optional term in a selection stage. For smooths `term.df` is the
/// starting df and [min_df, max_df] bounds the df search.
struct MenuItem {
  Param param = Param::lambda;
  Term term;
  int min_df = 0;
  int max_df = 0;
};

struct Stage {
  std::string name;
  std::vector<MenuItem> items;
};

/// Detection (stratum, openness, primary on lambda and sigma), dynamics
/// (s(time) on gamma and phi, df <= 10) and density (s(x,y) df <= 20,
/// s(avg_salinity) df <= 10).
std::vector<Stage> default_stages();

struct SelectionRecord {
  std::string stage;
  ModelSpec spec;
  int n_params = 0;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  std::string message;
};

struct CandidateSet {
  std::vector<FitResult> fits;  ///< ordered by AIC
  std::vector<double> weights;
  std::vector<SelectionRecord> history;
  std::vector<std::vector<int>> retained_df;  ///< smoothing-parameter sets kept per stage
};

struct SelectControls {
  FitControls fit;
  double window = 2.0;  ///< AIC units
};

/// Keeps fits within `window` AIC units of the best and attaches weights.
CandidateSet candidate_set(std::vector<FitResult> fits, double window = 2.0);

/// Sequential AIC selection. Each stage adds menu terms greedily, then runs
/// a steepest descent over the stage's smooth df (one step of +-1 in one
/// dimension at a time, ties to the smaller df). df sets within the window
/// of the stage optimum are kept, the final formula is refit under each kept
/// set, and refits within the window form the candidate set.
CandidateSet stepwise_select(const ModelSpec& base, const std::vector<Stage>& stages, const ModelData& data,
                             const SelectControls& controls = {});

/// stage, model, df, q, loglik, AIC, delta AIC within the stage, converged.
void write_selection_table(const std::string& path, const std::vector<SelectionRecord>& history);

}  // namespace openscr
