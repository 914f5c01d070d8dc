#include "openscr/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "openscr/parallel.hpp"

namespace openscr {
namespace {

std::vector<double> column(const BootstrapDraws& draws, auto&& get) {
  std::vector<double> v;
  v.reserve(draws.draws.size());
  for (const auto& d : draws.draws) v.push_back(get(d));
  return v;
}

void require_draws(const BootstrapDraws& draws) {
  if (draws.draws.empty()) throw ValidationError("no bootstrap draws");
}

}  // namespace

Matrix covariance_factor(const Matrix& vcov) {
  if (vcov.rows() != vcov.cols()) throw ValidationError("covariance matrix is not square");
  if (vcov.size() == 0) return vcov;
  const Matrix sym = 0.5 * (vcov + vcov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  Vector lambda = solver.eigenvalues();
  const double trace = lambda.sum();
  int clamped = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda(i) < 0.0) {
      lambda(i) = 0.0;
      ++clamped;
    }
  if (clamped > 0) {
    const double repaired = lambda.sum();
    const double change = std::abs(repaired - trace) / std::max(std::abs(trace), std::numeric_limits<double>::min());
    if (change > 0.01) {
      throw NumericalError(fmt::format("covariance repair would change the trace by {:.2f}%", 100.0 * change));
    }
    spdlog::warn("covariance had {} negative eigenvalue(s); clamped to 0 (trace change {:.3g}%)", clamped, 100.0 * change);
  }
  return solver.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

BootstrapDraw derive_draw(const ParamMap& map, const Vector& theta, const ModelData& data) {
  const auto fields = expand_params(theta, map);
  const auto& scr = data.scr;
  BootstrapDraw d;
  d.theta = theta;
  d.D = fields.D;
  d.gamma = fields.gamma;
  d.phi = fields.phi;
  const StateModel state{fields.gamma, fields.phi, scr.delta};
  d.beta = state_machine(state).beta;
  d.multiplier = occasion_multipliers(state);
  for (std::size_t m = 0; m < d.D.size(); ++m) d.superpopulation += scr.area[m] * d.D[m];
  for (double c : d.multiplier) d.abundance.push_back(c * d.superpopulation);
  const int J = fields.n_traps;
  for (int k = 0; k < fields.n_primaries; ++k) {
    double l = 0.0, s = 0.0;
    for (int j = 0; j < J; ++j) {
      l += fields.lambda_at(j, k);
      s += fields.sigma_at(j, k);
    }
    d.mean_lambda.push_back(J > 0 ? l / J : 0.0);
    d.mean_sigma.push_back(J > 0 ? s / J : 0.0);
  }
  return d;
}

BootstrapDraws model_average_bootstrap(const CandidateSet& candidates, const ModelData& data, int n_draws,
                                       std::uint64_t seed) {
  if (n_draws < 1) throw ValidationError("n_draws must be at least 1");
  if (candidates.fits.empty() || candidates.weights.size() != candidates.fits.size()) {
    throw ValidationError("candidate set is empty or has no weights");
  }
  std::vector<ParamMap> maps;
  std::vector<Matrix> factors;
  for (const auto& f : candidates.fits) {
    if (!f.has_vcov) throw ValidationError(fmt::format("candidate has no covariance: {}", f.spec.describe()));
    maps.push_back(ParamMap::build(f.spec, data.frames));
    if (maps.back().size() != f.theta.size()) throw ValidationError("candidate parameters do not match its model");
    factors.push_back(covariance_factor(f.vcov));
  }
  std::vector<double> cumulative(candidates.weights.size());
  std::partial_sum(candidates.weights.begin(), candidates.weights.end(), cumulative.begin());

  BootstrapDraws out;
  out.seed = seed;
  out.draws.resize(static_cast<std::size_t>(n_draws));
  parallel_for(out.draws.size(), [&](std::size_t i) {
    auto rng = make_stream(seed, i);
    std::uniform_real_distribution<double> unif(0.0, cumulative.back());
    const double u = unif(rng);
    std::size_t m = 0;
    while (m + 1 < cumulative.size() && u >= cumulative[m]) ++m;
    const auto& fit = candidates.fits[m];
    std::normal_distribution<double> normal;
    Vector z(fit.theta.size());
    for (Eigen::Index c = 0; c < z.size(); ++c) z(c) = normal(rng);
    const Vector theta = fit.theta + factors[m] * z;
    try {
      out.draws[i] = derive_draw(maps[m], theta, data);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("bootstrap draw {}: {}", i, e.what()));
    }
    out.draws[i].model = static_cast<int>(m);
  });
  out.model_counts.assign(candidates.fits.size(), 0);
  for (const auto& d : out.draws) ++out.model_counts[static_cast<std::size_t>(d.model)];
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile probability must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double iqd(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  const double median = quantile(v, 0.5);
  if (median == 0.0) return std::numeric_limits<double>::infinity();
  return (quantile(v, 0.75) - quantile(v, 0.25)) / std::abs(median);
}

Interval summarize(std::span<const double> values) {
  if (values.empty()) throw ValidationError("cannot summarize an empty sample");
  std::vector<double> v(values.begin(), values.end());
  Interval i;
  i.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  i.lcl = quantile(v, 0.025);
  i.ucl = quantile(v, 0.975);
  return i;
}

int RegionOfInference::kept() const { return static_cast<int>(std::count(keep.begin(), keep.end(), 1)); }

RegionOfInference iqd_region(const BootstrapDraws& draws, double threshold) {
  if (draws.size() < 4) throw ValidationError("the region of inference needs at least 4 bootstrap draws");
  if (!(threshold > 0.0)) throw ValidationError("IQD threshold must be positive");
  const std::size_t M = draws.draws.front().D.size();
  RegionOfInference r;
  r.iqd.resize(M);
  r.keep.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto v = column(draws, [&](const BootstrapDraw& d) { return d.D[m]; });
    r.iqd[m] = iqd(v);
    r.keep[m] = r.iqd[m] < threshold ? 1 : 0;
  }
  return r;
}

DensitySummary summarize_density(const BootstrapDraws& draws, std::span<const double> area, double marked_proportion,
                                 const RegionOfInference* region) {
  require_draws(draws);
  if (!(marked_proportion > 0.0 && marked_proportion <= 1.0)) throw ValidationError("marked proportion must lie in (0, 1]");
  const std::size_t M = draws.draws.front().D.size();
  if (area.size() != M) throw ValidationError("mesh area does not match the density draws");
  if (region && region->keep.size() != M) throw ValidationError("region of inference does not match the mesh");
  const double scale = 1.0 / marked_proportion;
  DensitySummary s;
  for (std::size_t m = 0; m < M; ++m) {
    auto v = column(draws, [&](const BootstrapDraw& d) { return d.D[m] * scale; });
    s.density.push_back(summarize(v));
    const double mean = s.density.back().mean;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    s.cv.push_back(mean != 0.0 ? sd / mean : std::numeric_limits<double>::infinity());
  }
  auto within = [&](const BootstrapDraw& d) {
    double n = 0.0;
    for (std::size_t m = 0; m < M; ++m)
      if (!region || region->keep[m]) n += area[m] * d.D[m];
    return n * scale;
  };
  s.superpopulation = summarize(column(draws, within));
  const std::size_t K = draws.draws.front().multiplier.size();
  for (std::size_t k = 0; k < K; ++k) {
    s.abundance.push_back(summarize(column(draws, [&](const BootstrapDraw& d) { return d.multiplier[k] * within(d); })));
  }
  return s;
}

std::vector<SalinityBand> salinity_bands(const BootstrapDraws& draws, std::span<const double> salinity,
                                         std::span<const double> area, double marked_proportion,
                                         const RegionOfInference* region, double width) {
  require_draws(draws);
  if (!(width > 0.0)) throw ValidationError("band width must be positive");
  if (!(marked_proportion > 0.0 && marked_proportion <= 1.0)) throw ValidationError("marked proportion must lie in (0, 1]");
  const std::size_t M = draws.draws.front().D.size();
  if (salinity.size() != M || area.size() != M) throw ValidationError("salinity/area do not match the mesh");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t m = 0; m < M; ++m) {
    if (region && !region->keep[m]) continue;
    members[static_cast<int>(std::floor(salinity[m] / width + 0.5))].push_back(m);
  }
  const double scale = 1.0 / marked_proportion;
  const std::size_t K = draws.draws.front().multiplier.size();
  std::vector<SalinityBand> out;
  for (const auto& [label, pts] : members) {
    SalinityBand b;
    b.band = label;
    b.n_points = static_cast<int>(pts.size());
    for (auto m : pts) b.area += area[m];
    for (std::size_t k = 0; k < K; ++k) {
      const auto n = column(draws, [&](const BootstrapDraw& d) {
        double s = 0.0;
        for (auto m : pts) s += area[m] * d.D[m];
        return d.multiplier[k] * s * scale;
      });
      std::vector<double> dens(n.size());
      for (std::size_t i = 0; i < n.size(); ++i) dens[i] = n[i] / b.area;
      b.abundance.push_back(summarize(n));
      b.density.push_back(summarize(dens));
    }
    out.push_back(std::move(b));
  }
  return out;
}

DynamicsSummary summarize_dynamics(const BootstrapDraws& draws, std::span<const double> delta, double marked_proportion) {
  require_draws(draws);
  DynamicsSummary s;
  const std::size_t n = draws.draws.front().phi.size();
  if (delta.size() != n) throw ValidationError("interval lengths do not match the draws");
  for (std::size_t k = 0; k < n; ++k) {
    s.phi.push_back(summarize(column(draws, [&](const BootstrapDraw& d) { return d.phi[k]; })));
    s.gamma.push_back(summarize(column(draws, [&](const BootstrapDraw& d) { return d.gamma[k]; })));
    s.recruits_per_year.push_back(summarize(column(draws, [&](const BootstrapDraw& d) {
      return d.beta[k + 1] * d.superpopulation / delta[k] / marked_proportion;
    })));
  }
  return s;
}

DetectionSummary summarize_detection(const BootstrapDraws& draws) {
  require_draws(draws);
  DetectionSummary s;
  const std::size_t K = draws.draws.front().mean_lambda.size();
  for (std::size_t k = 0; k < K; ++k) {
    s.lambda.push_back(summarize(column(draws, [&](const BootstrapDraw& d) { return d.mean_lambda[k]; })));
    s.sigma.push_back(summarize(column(draws, [&](const BootstrapDraw& d) { return d.mean_sigma[k]; })));
  }
  return s;
}

}  // namespace openscr
