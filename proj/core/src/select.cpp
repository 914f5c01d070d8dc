#include "openscr/select.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "openscr/csv.hpp"
#include "openscr/parallel.hpp"

namespace openscr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Term smooth(std::vector<std::string> vars, int df) {
  Term t;
  t.kind = Term::Kind::smooth;
  t.variables = std::move(vars);
  t.df = df;
  return t;
}

Term covariate(std::string var) {
  Term t;
  t.variables = {std::move(var)};
  return t;
}

/// Fits are shared across stages; keyed by the full model description.
class FitCache {
 public:
  FitCache(const ModelData& data, const SelectControls& controls) : data_(data), controls_(controls) {}

  /// Fits every spec not yet seen (in parallel) and returns pointers in input order.
  std::vector<const FitResult*> fit_all(const std::vector<ModelSpec>& specs, const FitResult* warm,
                                        const std::string& stage) {
    std::vector<std::size_t> todo;
    std::set<std::string> queued;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto key = specs[i].describe();
      if (!cache_.contains(key) && queued.insert(key).second) todo.push_back(i);
    }
    std::vector<FitResult> results(todo.size());
    parallel_for(todo.size(), [&](std::size_t t) {
      const auto& spec = specs[todo[t]];
      try {
        results[t] = warm ? maximize_from(spec, data_, *warm, controls_.fit) : maximize(spec, data_, {}, controls_.fit);
      } catch (const Error& e) {
        results[t].spec = spec;
        results[t].loglik = -kInf;
        results[t].aic = kInf;
        results[t].converged = false;
        results[t].message = e.what();
      }
    });
    for (std::size_t t = 0; t < todo.size(); ++t) {
      const auto& r = results[t];
      history.push_back({stage, r.spec, r.n_params(), r.loglik, r.aic, r.converged, r.message});
      cache_.emplace(r.spec.describe(), std::move(results[t]));
    }
    std::vector<const FitResult*> out;
    for (const auto& s : specs) out.push_back(&cache_.at(s.describe()));
    return out;
  }

  const FitResult& fit(const ModelSpec& spec, const FitResult* warm, const std::string& stage) {
    return *fit_all({spec}, warm, stage).front();
  }

  std::vector<SelectionRecord> history;

 private:
  const ModelData& data_;
  const SelectControls& controls_;
  std::map<std::string, FitResult> cache_;
};

double score(const FitResult& f) { return f.converged ? f.aic : kInf; }

Term* locate(ModelSpec& spec, const MenuItem& item) { return spec[item.param].find(item.term.key()); }

std::vector<int> df_of(const ModelSpec& spec, const std::vector<const MenuItem*>& smooths) {
  std::vector<int> v;
  for (const auto* item : smooths) {
    const auto* t = spec[item->param].find(item->term.key());
    v.push_back(t ? t->df : 0);
  }
  return v;
}

ModelSpec with_df(ModelSpec spec, const std::vector<const MenuItem*>& smooths, const std::vector<int>& df) {
  for (std::size_t i = 0; i < smooths.size(); ++i)
    if (auto* t = locate(spec, *smooths[i])) t->df = df[i];
  return spec;
}

/// Same terms, ignoring df.
bool same_structure(const ModelSpec& a, const ModelSpec& b) {
  for (Param p : kAllParams) {
    const auto& ta = a[p].terms;
    const auto& tb = b[p].terms;
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (ta[i].key() != tb[i].key()) return false;
  }
  return true;
}

bool prefer(const FitResult& a, const std::vector<int>& da, const FitResult& b, const std::vector<int>& db) {
  if (score(a) != score(b)) return score(a) < score(b);
  return da < db;
}

}  // namespace

std::vector<Stage> default_stages() {
  Stage detection{"detection", {}};
  for (Param p : {Param::lambda, Param::sigma})
    for (const char* v : {"stratum", "openness", "primary"}) detection.items.push_back({p, covariate(v), 0, 0});
  Stage dynamics{"dynamics", {}};
  for (Param p : {Param::gamma, Param::phi}) dynamics.items.push_back({p, smooth({"time"}, 3), 2, 10});
  Stage density{"density", {}};
  density.items.push_back({Param::D, smooth({"x", "y"}, 10), 3, 20});
  density.items.push_back({Param::D, smooth({"avg_salinity"}, 3), 2, 10});
  return {detection, dynamics, density};
}

CandidateSet candidate_set(std::vector<FitResult> fits, double window) {
  std::erase_if(fits, [](const FitResult& f) { return !f.converged || !std::isfinite(f.aic); });
  if (fits.empty()) throw NumericalError("no converged fits to form a candidate set");
  std::stable_sort(fits.begin(), fits.end(), [](const auto& a, const auto& b) { return a.aic < b.aic; });
  const double best = fits.front().aic;
  std::erase_if(fits, [&](const FitResult& f) { return f.aic - best > window; });
  CandidateSet c;
  std::vector<double> aics;
  for (const auto& f : fits) aics.push_back(f.aic);
  c.weights = aic_weights(aics);
  c.fits = std::move(fits);
  return c;
}

CandidateSet stepwise_select(const ModelSpec& base, const std::vector<Stage>& stages, const ModelData& data,
                             const SelectControls& controls) {
  FitCache cache(data, controls);
  ModelSpec current = base;
  const FitResult* current_fit = &cache.fit(current, nullptr, "base");
  if (!current_fit->converged) {
    spdlog::warn("base model did not converge: {}", current_fit->message);
  }

  struct StageOutcome {
    std::vector<const MenuItem*> smooths;
    std::vector<std::vector<int>> retained;
  };
  std::vector<StageOutcome> outcomes;

  for (const auto& stage : stages) {
    spdlog::info("selection stage '{}' from {}", stage.name, current.describe());
    // Greedy forward addition.
    std::vector<const MenuItem*> remaining;
    for (const auto& item : stage.items)
      if (!current[item.param].contains(item.term.key())) remaining.push_back(&item);
    for (;;) {
      std::vector<ModelSpec> trials;
      for (const auto* item : remaining) {
        ModelSpec s = current;
        s[item->param].terms.push_back(item->term);
        trials.push_back(std::move(s));
      }
      if (trials.empty()) break;
      const auto fits = cache.fit_all(trials, current_fit, stage.name);
      std::size_t best = 0;
      for (std::size_t i = 1; i < fits.size(); ++i)
        if (score(*fits[i]) < score(*fits[best])) best = i;
      if (!(score(*fits[best]) < score(*current_fit))) break;
      current = trials[best];
      current_fit = fits[best];
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }

    // Steepest descent over the df of this stage's smooths.
    StageOutcome outcome;
    for (const auto& item : stage.items)
      if (item.term.is_smooth() && current[item.param].contains(item.term.key())) outcome.smooths.push_back(&item);
    if (!outcome.smooths.empty()) {
      for (;;) {
        const auto df = df_of(current, outcome.smooths);
        std::vector<ModelSpec> trials;
        std::vector<std::vector<int>> trial_df;
        for (std::size_t i = 0; i < df.size(); ++i) {
          for (int step : {-1, 1}) {
            auto v = df;
            v[i] += step;
            if (v[i] < outcome.smooths[i]->min_df || v[i] > outcome.smooths[i]->max_df) continue;
            trials.push_back(with_df(current, outcome.smooths, v));
            trial_df.push_back(std::move(v));
          }
        }
        if (trials.empty()) break;
        const auto fits = cache.fit_all(trials, current_fit, stage.name);
        std::size_t best = 0;
        for (std::size_t i = 1; i < fits.size(); ++i)
          if (prefer(*fits[i], trial_df[i], *fits[best], trial_df[best])) best = i;
        if (!(score(*fits[best]) < score(*current_fit))) break;
        current = trials[best];
        current_fit = fits[best];
      }
      // df sets of same-structure models within the window of the stage optimum.
      for (const auto& rec : cache.history) {
        if (rec.stage != stage.name || !rec.converged || !same_structure(rec.spec, current)) continue;
        if (rec.aic - current_fit->aic <= controls.window) {
          auto v = df_of(rec.spec, outcome.smooths);
          if (std::find(outcome.retained.begin(), outcome.retained.end(), v) == outcome.retained.end()) {
            outcome.retained.push_back(std::move(v));
          }
        }
      }
      std::sort(outcome.retained.begin(), outcome.retained.end());
      spdlog::info("stage '{}' keeps {} smoothing set(s)", stage.name, outcome.retained.size());
    }
    bool any = false;
    for (const auto& rec : cache.history) any = any || (rec.stage == stage.name && rec.converged);
    if (!any && !current_fit->converged) {
      throw NumericalError(fmt::format("selection stage '{}' produced no converged fit (last: {})", stage.name,
                                       current_fit->message));
    }
    outcomes.push_back(std::move(outcome));
  }

  // Refit the final formula under every retained smoothing set.
  std::vector<ModelSpec> finals{current};
  for (const auto& o : outcomes)
    for (const auto& v : o.retained) {
      auto s = with_df(current, o.smooths, v);
      if (std::find(finals.begin(), finals.end(), s) == finals.end()) finals.push_back(std::move(s));
    }
  const auto fits = cache.fit_all(finals, current_fit, "final");
  std::vector<FitResult> copies;
  for (const auto* f : fits) {
    if (f->converged && !f->has_vcov) {
      spdlog::warn("dropping candidate without covariance: {}", f->spec.describe());
      continue;
    }
    copies.push_back(*f);
  }
  auto set = candidate_set(std::move(copies), controls.window);
  set.history = std::move(cache.history);
  for (const auto& o : outcomes)
    for (const auto& v : o.retained) set.retained_df.push_back(v);
  return set;
}

void write_selection_table(const std::string& path, const std::vector<SelectionRecord>& history) {
  std::map<std::string, double> best;
  for (const auto& r : history)
    if (r.converged) {
      auto [it, inserted] = best.try_emplace(r.stage, r.aic);
      if (!inserted) it->second = std::min(it->second, r.aic);
    }
  csv::Writer w(path, {"stage", "model", "df", "q", "loglik", "aic", "delta_aic", "converged"});
  for (const auto& r : history) {
    const auto df = r.spec.smoothing_parameters();
    const auto it = best.find(r.stage);
    const double delta = r.converged && it != best.end() ? r.aic - it->second : std::numeric_limits<double>::quiet_NaN();
    w.add(r.stage).add(r.spec.describe()).add(fmt::format("{}", fmt::join(df, " "))).add(r.n_params);
    w.add(r.loglik).add(r.aic).add(delta).add(r.converged ? "true" : "false");
    w.end_row();
  }
}

}  // namespace openscr
