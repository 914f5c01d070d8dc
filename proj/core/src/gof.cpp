#include "openscr/gof.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "openscr/parallel.hpp"

namespace openscr {
namespace {

constexpr double kVarianceFloor = 1e-12;

using FieldSource = std::function<Fields(std::size_t sim, std::mt19937_64& rng)>;

GofComponent component(std::string label, double observed, std::vector<double> simulated) {
  GofComponent c;
  c.label = std::move(label);
  c.observed = observed;
  c.p_value = two_sided_p(observed, simulated);
  c.lower = quantile(simulated, 0.025);
  c.upper = quantile(simulated, 0.975);
  c.simulated = std::move(simulated);
  return c;
}

GofTest scalar_test(std::string name, double observed, std::vector<double> simulated) {
  GofTest t;
  t.name = std::move(name);
  t.components.push_back(component(t.name, observed, std::move(simulated)));
  const auto& c = t.components.front();
  t.p_value = c.p_value;
  t.observed_discrepancy = observed;
  t.inside_envelope = observed >= c.lower && observed <= c.upper;
  return t;
}

GofTest vector_test(std::string name, const std::vector<std::string>& labels, const std::vector<double>& observed,
                    const std::vector<std::vector<double>>& simulated) {
  GofTest t;
  t.name = std::move(name);
  const std::size_t C = observed.size();
  const std::size_t n = simulated.size();
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = simulated[i][c];
    for (double x : col) mean[c] += x;
    mean[c] /= static_cast<double>(n);
    for (double x : col) var[c] += (x - mean[c]) * (x - mean[c]);
    var[c] = std::max(var[c] / static_cast<double>(std::max<std::size_t>(n - 1, 1)), kVarianceFloor);
    t.components.push_back(component(labels[c], observed[c], std::move(col)));
  }
  auto discrepancy = [&](const std::vector<double>& x) {
    double d = 0.0;
    for (std::size_t c = 0; c < C; ++c) d += (x[c] - mean[c]) * (x[c] - mean[c]) / var[c];
    return d;
  };
  t.observed_discrepancy = discrepancy(observed);
  for (const auto& s : simulated) t.simulated_discrepancy.push_back(discrepancy(s));
  t.p_value = 1.0 - rank_fraction(t.observed_discrepancy, t.simulated_discrepancy);
  t.inside_envelope = t.observed_discrepancy <= quantile(t.simulated_discrepancy, 0.95);
  return t;
}

std::vector<double> trap_statistic(const GofStatistics& s, const GofOptions& options) {
  if (options.trap_groups.empty()) return s.trap_counts;
  return group_means(s.trap_counts, options.trap_groups, static_cast<int>(options.group_names.size()));
}

GofReport run(const FieldSource& source, const ModelData& data, const CaptureHistories& observed,
              const GofOptions& options, bool fixed) {
  if (options.n_sims < 100) throw ValidationError("goodness-of-fit needs at least 100 simulations");
  const int J = data.scr.n_traps;
  const int K = data.scr.n_primaries;
  if (!options.trap_groups.empty() && static_cast<int>(options.trap_groups.size()) != J) {
    throw ValidationError("trap grouping does not match the number of traps");
  }
  const auto n = static_cast<std::size_t>(options.n_sims);
  std::vector<GofStatistics> sims(n);
  parallel_for(n, [&](std::size_t i) {
    auto rng = make_stream(options.seed, i);
    const Fields fields = source(i, rng);
    sims[i] = test_statistics(simulate_dataset(fields, data.scr, rng), J);
  });
  const auto obs = test_statistics(observed, J);

  GofReport report;
  report.n_sims = options.n_sims;
  report.seed = options.seed;
  report.fixed_parameters = fixed;

  std::vector<std::string> primary_labels;
  for (int k = 0; k < K; ++k) primary_labels.push_back(std::to_string(k + 1));
  std::vector<std::vector<double>> first(n);
  for (std::size_t i = 0; i < n; ++i) first[i] = sims[i].first_seen;
  report.tests.push_back(vector_test("first_seen", primary_labels, obs.first_seen, first));

  std::vector<double> tb(n);
  for (std::size_t i = 0; i < n; ++i) tb[i] = sims[i].t_between;
  report.tests.push_back(scalar_test("t_between", obs.t_between, std::move(tb)));

  std::vector<std::string> trap_labels;
  if (options.trap_groups.empty()) {
    for (int j = 0; j < J; ++j) trap_labels.push_back(std::to_string(j + 1));
  } else {
    trap_labels = options.group_names;
  }
  std::vector<std::vector<double>> traps(n);
  for (std::size_t i = 0; i < n; ++i) traps[i] = trap_statistic(sims[i], options);
  report.tests.push_back(vector_test("trap_counts", trap_labels, trap_statistic(obs, options), traps));
  return report;
}

}  // namespace

CaptureHistories simulate_dataset(const Fields& fields, const ScrData& data, std::mt19937_64& rng) {
  const int J = data.n_traps;
  const int K = data.n_primaries;
  const int M = data.n_mesh;
  const auto& effort = data.effort;
  CaptureHistories out(effort.layout());

  std::vector<double> weight(static_cast<std::size_t>(M));
  double total = 0.0;
  for (int m = 0; m < M; ++m) {
    weight[static_cast<std::size_t>(m)] = data.area[static_cast<std::size_t>(m)] * fields.D[static_cast<std::size_t>(m)];
    total += weight[static_cast<std::size_t>(m)];
  }
  if (!(total > 0.0)) return out;
  const long N = std::poisson_distribution<long>(total)(rng);
  if (N == 0) return out;

  const auto chain = state_machine(StateModel{fields.gamma, fields.phi, data.delta});
  std::discrete_distribution<int> center(weight.begin(), weight.end());
  std::discrete_distribution<int> entry(chain.beta.begin(), chain.beta.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::vector<std::pair<int, double>>> active(static_cast<std::size_t>(effort.total_secondaries()));
  for (int s = 0; s < effort.total_secondaries(); ++s)
    for (int j = 0; j < J; ++j)
      if (effort.at(j, s) > 0) active[static_cast<std::size_t>(s)].emplace_back(j, effort.at(j, s));

  std::vector<int> omega(static_cast<std::size_t>(effort.total_secondaries()));
  std::vector<double> w;
  long detected = 0;
  for (long n = 0; n < N; ++n) {
    const int m = center(rng);
    int k = entry(rng);
    std::fill(omega.begin(), omega.end(), CaptureHistories::kNone);
    bool seen = false;
    for (; k < K; ++k) {
      for (int l = 0; l < effort.n_secondaries(k); ++l) {
        const int s = effort.flat_secondary(k, l);
        const auto& list = active[static_cast<std::size_t>(s)];
        w.assign(list.size(), 0.0);
        double E = 0.0;
        for (std::size_t i = 0; i < list.size(); ++i) {
          const int j = list[i].first;
          const double sg = fields.sigma_at(j, k);
          w[i] = list[i].second * fields.lambda_at(j, k) * std::exp(-data.dist2(j, m) / (2.0 * sg * sg));
          E += w[i];
        }
        if (!(E > 0.0) || unif(rng) >= -std::expm1(-E)) continue;
        double target = unif(rng) * E;
        std::size_t pick = 0;
        while (pick + 1 < w.size() && target >= w[pick]) target -= w[pick++];
        omega[static_cast<std::size_t>(s)] = list[pick].first;
        seen = true;
      }
      if (k + 1 < K && unif(rng) >= chain.survival[static_cast<std::size_t>(k)]) break;
    }
    if (!seen) continue;
    const int i = out.add_individual(fmt::format("sim{}", ++detected));
    for (int kk = 0; kk < K; ++kk)
      for (int l = 0; l < effort.n_secondaries(kk); ++l)
        out(i, kk, l) = omega[static_cast<std::size_t>(effort.flat_secondary(kk, l))];
  }
  return out;
}

CaptureHistories simulate_dataset(const Fields& fields, const ScrData& data, std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  return simulate_dataset(fields, data, rng);
}

GofStatistics test_statistics(const CaptureHistories& h, int n_traps) {
  GofStatistics s;
  const int K = h.n_primaries();
  s.first_seen.assign(static_cast<std::size_t>(K), 0.0);
  s.trap_counts.assign(static_cast<std::size_t>(n_traps), 0.0);
  double span = 0.0;
  int counted = 0;
  std::set<int> traps;
  for (int i = 0; i < h.n_individuals(); ++i) {
    int first = -1, last = -1;
    traps.clear();
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < h.n_secondaries(k); ++l) {
        const int j = h(i, k, l);
        if (j == CaptureHistories::kNone) continue;
        if (first < 0) first = k;
        last = k;
        traps.insert(j);
      }
    if (first < 0) continue;
    s.first_seen[static_cast<std::size_t>(first)] += 1.0;
    span += last - first;
    ++counted;
    for (int j : traps) {
      if (j < 0 || j >= n_traps) throw ValidationError(fmt::format("history refers to trap {} of {}", j, n_traps));
      s.trap_counts[static_cast<std::size_t>(j)] += 1.0;
    }
  }
  s.t_between = counted > 0 ? span / counted : 0.0;
  return s;
}

std::vector<double> group_means(const std::vector<double>& per_trap, const std::vector<int>& group, int n_groups) {
  if (per_trap.size() != group.size()) throw ValidationError("group codes do not match the traps");
  std::vector<double> sum(static_cast<std::size_t>(n_groups), 0.0), count(static_cast<std::size_t>(n_groups), 0.0);
  for (std::size_t j = 0; j < per_trap.size(); ++j) {
    if (group[j] < 0 || group[j] >= n_groups) throw ValidationError("trap group code out of range");
    sum[static_cast<std::size_t>(group[j])] += per_trap[j];
    count[static_cast<std::size_t>(group[j])] += 1.0;
  }
  for (std::size_t g = 0; g < sum.size(); ++g) sum[g] = count[g] > 0 ? sum[g] / count[g] : 0.0;
  return sum;
}

double rank_fraction(double observed, const std::vector<double>& simulated) {
  double below = 0.0, equal = 0.0;
  for (double x : simulated) {
    if (x < observed) below += 1.0;
    else if (x == observed) equal += 1.0;
  }
  return (below + 0.5 * (equal + 1.0)) / (static_cast<double>(simulated.size()) + 1.0);
}

double two_sided_p(double observed, const std::vector<double>& simulated) {
  const double r = rank_fraction(observed, simulated);
  return std::min(1.0, 2.0 * std::min(r, 1.0 - r));
}

GofReport run_gof(const CandidateSet& candidates, const BootstrapDraws& draws, const ModelData& data,
                  const CaptureHistories& observed, const GofOptions& options) {
  if (draws.draws.empty()) throw ValidationError("goodness-of-fit needs bootstrap draws");
  std::vector<ParamMap> maps;
  for (const auto& f : candidates.fits) maps.push_back(ParamMap::build(f.spec, data.frames));
  const FieldSource source = [&](std::size_t, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, draws.draws.size() - 1);
    const auto& d = draws.draws[pick(rng)];
    if (d.model < 0 || static_cast<std::size_t>(d.model) >= maps.size()) {
      throw ValidationError("bootstrap draw refers to an unknown candidate model");
    }
    return expand_params(d.theta, maps[static_cast<std::size_t>(d.model)]);
  };
  return run(source, data, observed, options, false);
}

GofReport run_gof(const Fields& fields, const ModelData& data, const CaptureHistories& observed,
                  const GofOptions& options) {
  const FieldSource source = [&](std::size_t, std::mt19937_64&) { return fields; };
  return run(source, data, observed, options, true);
}

}  // namespace openscr
