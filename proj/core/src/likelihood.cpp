#include "openscr/likelihood.hpp"

#include <map>
#include <numeric>

#include <fmt/format.h>

#include "engine.hpp"
#include "openscr/parallel.hpp"

namespace openscr {
namespace {

using engine::kNegInf;
using engine::val;

template <class T>
struct Evaluated {
  T loglik;
  int failed_pattern = -1;
  std::vector<T> p_dot;
};

/// Full likelihood at one parameter point. Mesh-level work and the
/// per-pattern sums run in parallel; every reduction is done serially in
/// index order afterwards.
template <class T>
Evaluated<T> evaluate(const NaturalFields<T>& f, const ScrData& data, bool keep_p_dot = false) {
  using namespace engine;
  const int J = data.n_traps;
  const int K = data.n_primaries;
  const int M = data.n_mesh;
  const auto& effort = data.effort;
  const int S = effort.total_secondaries();
  const auto lists = effort_lists(effort);
  const auto Mz = static_cast<std::size_t>(M);

  std::vector<T> log_lambda(static_cast<std::size_t>(J * K)), coef(static_cast<std::size_t>(J * K));
  for (std::size_t i = 0; i < log_lambda.size(); ++i) {
    log_lambda[i] = log(f.lambda[i]);
    coef[i] = T(-0.5) / (f.sigma[i] * f.sigma[i]);
  }
  std::vector<int> primary_of(static_cast<std::size_t>(S));
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < effort.n_secondaries(k); ++l) primary_of[static_cast<std::size_t>(effort.flat_secondary(k, l))] = k;

  std::vector<T> hazard(static_cast<std::size_t>(S) * Mz, T(0.0));
  std::vector<T> corr(static_cast<std::size_t>(S) * Mz, T(0.0));
  std::vector<T> miss(static_cast<std::size_t>(K) * Mz, T(0.0));
  std::vector<T> log_aD(Mz);
  const Chain<T> chain = make_chain(f.gamma, f.phi, std::span<const double>(data.delta));

  std::vector<T> p_dot(Mz);
  parallel_for(Mz, [&](std::size_t m) {
    for (int s = 0; s < S; ++s) {
      const int k = primary_of[static_cast<std::size_t>(s)];
      T E(0.0);
      for (const auto& [j, u] : lists[static_cast<std::size_t>(s)]) {
        const auto jk = static_cast<std::size_t>(k * J + j);
        E += u * exp(log_lambda[jk] + coef[jk] * data.dist2(j, static_cast<Eigen::Index>(m)));
      }
      hazard[static_cast<std::size_t>(s) * Mz + m] = E;
      corr[static_cast<std::size_t>(s) * Mz + m] = detected_correction(E);
      miss[static_cast<std::size_t>(k) * Mz + m] -= E;
    }
    const T lam = data.area[m] * f.D[m];
    log_aD[m] = val(lam) > 0.0 ? log(lam) : T(kNegInf);
    const T log_pr0 = forward(
        chain, K, [&](int k) { return miss[static_cast<std::size_t>(k) * Mz + m]; }, [](int) { return false; });
    p_dot[m] = -expm1(log_pr0);
  });

  const auto H = data.patterns.size();
  std::vector<T> pattern_ll(H);
  std::vector<char> failed(H, 0);
  parallel_for(H, [&](std::size_t h) {
    const auto& det = data.patterns[h].detections;
    std::vector<char> seen(static_cast<std::size_t>(K), 0);
    for (const auto& d : det) seen[static_cast<std::size_t>(d.primary)] = 1;
    std::vector<T> terms(Mz);
    std::vector<bool> present(Mz);
    double mx = kNegInf;
    for (std::size_t m = 0; m < Mz; ++m) {
      if (val(log_aD[m]) == kNegInf) {
        present[m] = false;
        continue;
      }
      auto emit = [&](int k) {
        T le = miss[static_cast<std::size_t>(k) * Mz + m];
        if (!seen[static_cast<std::size_t>(k)]) return le;
        for (const auto& d : det) {
          if (d.primary != k) continue;
          const auto jk = static_cast<std::size_t>(k * J + d.trap);
          const double u = effort.at(d.trap, d.flat);
          le += log_lambda[jk] + coef[jk] * data.dist2(d.trap, static_cast<Eigen::Index>(m)) + std::log(u) +
                corr[static_cast<std::size_t>(d.flat) * Mz + m];
        }
        return le;
      };
      const T lp = forward(chain, K, emit, [&](int k) { return seen[static_cast<std::size_t>(k)] != 0; });
      present[m] = val(lp) != kNegInf;
      if (!present[m]) continue;
      terms[m] = log_aD[m] + lp;
      mx = std::max(mx, val(terms[m]));
    }
    if (mx == kNegInf) {
      failed[h] = 1;
      pattern_ll[h] = T(kNegInf);
      return;
    }
    T sum(0.0);
    for (std::size_t m = 0; m < Mz; ++m)
      if (present[m]) sum += exp(terms[m] - mx);
    pattern_ll[h] = mx + log(sum);
  });

  Evaluated<T> out;
  T expected(0.0);
  for (std::size_t m = 0; m < Mz; ++m) expected += data.area[m] * f.D[m] * p_dot[m];
  T ll = -expected;
  for (std::size_t h = 0; h < H; ++h) {
    if (failed[h]) {
      out.failed_pattern = static_cast<int>(h);
      out.loglik = T(kNegInf);
      return out;
    }
    ll += static_cast<double>(data.patterns[h].count) * pattern_ll[h];
  }
  out.loglik = ll;
  if (keep_p_dot) out.p_dot = std::move(p_dot);
  return out;
}

void check_fields(const Fields& f, const ScrData& data) {
  const auto jk = static_cast<std::size_t>(data.n_traps) * static_cast<std::size_t>(data.n_primaries);
  const auto intervals = static_cast<std::size_t>(std::max(0, data.n_primaries - 1));
  if (f.lambda.size() != jk || f.sigma.size() != jk || f.gamma.size() != intervals || f.phi.size() != intervals ||
      f.D.size() != static_cast<std::size_t>(data.n_mesh)) {
    throw ValidationError("parameter fields do not match the data dimensions");
  }
}

}  // namespace

double encounter_rate(double lambda, double sigma, double r) {
  if (!(lambda > 0.0) || !(sigma > 0.0) || !(r >= 0.0)) {
    throw ValidationError(fmt::format("encounter_rate needs lambda, sigma > 0 and r >= 0 (got {}, {}, {})", lambda, sigma, r));
  }
  return lambda * std::exp(-r * r / (2.0 * sigma * sigma));
}

OccasionDetection occasion_detection(const DetectionField& det, int m, int k, int l) {
  const int J = det.effort.n_traps();
  OccasionDetection out;
  out.alloc.assign(static_cast<std::size_t>(J), 0.0);
  std::vector<double> w(static_cast<std::size_t>(J), 0.0);
  for (int j = 0; j < J; ++j) {
    const int u = det.effort(j, k, l);
    if (u <= 0) continue;
    w[static_cast<std::size_t>(j)] =
        u * encounter_rate(det.fields.lambda_at(j, k), det.fields.sigma_at(j, k), det.distances(j, m));
    out.hazard += w[static_cast<std::size_t>(j)];
  }
  out.p = -std::expm1(-out.hazard);
  if (out.hazard > 0.0)
    for (int j = 0; j < J; ++j) out.alloc[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / out.hazard;
  return out;
}

std::vector<double> entry_probs(std::span<const double> gamma, std::span<const double> delta) {
  if (gamma.size() != delta.size()) throw ValidationError("entry_probs: gamma and delta lengths differ");
  double total = 0.0;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!(gamma[i] >= 0.0) || !(delta[i] > 0.0)) throw ValidationError("entry_probs: need gamma >= 0 and delta > 0");
    total += gamma[i] * delta[i];
  }
  std::vector<double> beta(gamma.size() + 1, 0.0);
  if (!(total > 0.0)) {
    beta[0] = 1.0;
    return beta;
  }
  beta[0] = std::exp(-total);
  const double rest = -std::expm1(-total);
  for (std::size_t k = 1; k < beta.size(); ++k) beta[k] = rest * gamma[k - 1] * delta[k - 1] / total;
  return beta;
}

TransitionModel transitions_from(std::span<const double> beta, std::span<const double> survival) {
  if (beta.empty() || survival.size() + 1 != beta.size()) {
    throw ValidationError("transition model needs K entry probabilities and K - 1 survival probabilities");
  }
  TransitionModel t;
  t.beta.assign(beta.begin(), beta.end());
  t.survival.assign(survival.begin(), survival.end());
  t.initial = {1.0 - beta[0], beta[0], 0.0};
  const std::size_t n = survival.size();
  std::vector<double> tail(beta.size() + 1, 0.0);
  for (std::size_t k = beta.size(); k-- > 0;) tail[k] = tail[k + 1] + beta[k];
  for (std::size_t k = 0; k < n; ++k) {
    // Mass still waiting to enter after primary k + 1 (1-based).
    const double waiting = tail[k + 1];
    double b = 0.0;
    if (waiting > 0.0) {
      b = std::min(1.0, beta[k + 1] / waiting);
    } else if (beta[k + 1] > 0.0) {
      throw NumericalError("entry probability with no remaining mass");
    }
    const double s = survival[k];
    Eigen::Matrix3d m;
    m << 1.0 - b, b, 0.0, 0.0, s, 1.0 - s, 0.0, 0.0, 1.0;
    t.entry_conditional.push_back(b);
    t.steps.push_back(m);
  }
  return t;
}

TransitionModel state_machine(const StateModel& state) {
  if (state.phi.size() != state.gamma.size()) throw ValidationError("state model: gamma and phi lengths differ");
  const auto beta = entry_probs(state.gamma, state.delta);
  std::vector<double> surv(state.phi.size());
  for (std::size_t k = 0; k < surv.size(); ++k) {
    if (!(state.phi[k] > 0.0 && state.phi[k] <= 1.0)) throw ValidationError("state model: phi must lie in (0, 1]");
    surv[k] = std::pow(state.phi[k], state.delta[k]);
  }
  return transitions_from(beta, surv);
}

double individual_log_probability(const CaptureHistories& histories, int i, int m, const DetectionField& det,
                                  const TransitionModel& t) {
  const int K = histories.n_primaries();
  engine::Chain<double> chain;
  chain.init_before = t.initial[0];
  chain.init_during = t.initial[1];
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    chain.enter.push_back(t.steps[k](0, 1));
    chain.stay.push_back(t.steps[k](0, 0));
    chain.surv.push_back(t.steps[k](1, 1));
    chain.die.push_back(t.steps[k](1, 2));
  }
  auto emit = [&](int k) {
    double le = 0.0;
    for (int l = 0; l < histories.n_secondaries(k); ++l) {
      const auto occ = occasion_detection(det, m, k, l);
      const int j = histories(i, k, l);
      if (j == CaptureHistories::kNone) {
        le -= occ.hazard;
      } else {
        const double pj = occ.p * occ.alloc[static_cast<std::size_t>(j)];
        if (!(pj > 0.0)) return kNegInf;
        le += std::log(pj);
      }
    }
    return le;
  };
  auto seen = [&](int k) {
    for (int l = 0; l < histories.n_secondaries(k); ++l)
      if (histories(i, k, l) != CaptureHistories::kNone) return true;
    return false;
  };
  return engine::forward(chain, K, emit, seen);
}

double individual_probability(const CaptureHistories& histories, int i, int m, const DetectionField& det,
                              const TransitionModel& t) {
  return std::exp(individual_log_probability(histories, i, m, det, t));
}

double ScrData::total_area() const { return std::accumulate(area.begin(), area.end(), 0.0); }

ScrData make_scr_data(const Matrix& distances, std::vector<double> area, EffortArray effort, std::vector<double> delta,
                      const CaptureHistories& histories) {
  ScrData d;
  d.n_traps = effort.n_traps();
  d.n_primaries = effort.n_primaries();
  d.n_mesh = static_cast<int>(area.size());
  if (distances.rows() != d.n_traps || distances.cols() != d.n_mesh) {
    throw ValidationError(fmt::format("distance matrix is {}x{}, expected {}x{}", distances.rows(), distances.cols(),
                                      d.n_traps, d.n_mesh));
  }
  if (histories.layout() != effort.layout()) throw ValidationError("capture histories and effort use different occasions");
  if (static_cast<int>(delta.size()) != std::max(0, d.n_primaries - 1)) {
    throw ValidationError("need one interval length per pair of consecutive primaries");
  }
  for (double a : area)
    if (!(a > 0.0)) throw ValidationError("mesh cell areas must be positive");
  d.dist2 = distances.array().square().matrix();
  d.area = std::move(area);
  d.delta = std::move(delta);

  std::map<std::vector<std::pair<int, int>>, std::size_t> index;
  for (int i = 0; i < histories.n_individuals(); ++i) {
    std::vector<std::pair<int, int>> key;
    std::vector<Detection> dets;
    for (int k = 0; k < histories.n_primaries(); ++k) {
      for (int l = 0; l < histories.n_secondaries(k); ++l) {
        const int j = histories(i, k, l);
        if (j == CaptureHistories::kNone) continue;
        if (j < 0 || j >= d.n_traps) {
          throw ValidationError(fmt::format("individual '{}' refers to trap {} of {}", histories.id(i), j, d.n_traps));
        }
        if (effort(j, k, l) <= 0) {
          throw ValidationError(fmt::format("individual '{}' detected at trap {} in primary {} secondary {} without effort",
                                            histories.id(i), j, k + 1, l + 1));
        }
        const int s = histories.flat_secondary(k, l);
        key.emplace_back(s, j);
        dets.push_back({k, l, s, j});
      }
    }
    if (dets.empty()) throw ValidationError(fmt::format("individual '{}' has no detections", histories.id(i)));
    auto [it, inserted] = index.try_emplace(std::move(key), d.patterns.size());
    if (inserted) d.patterns.push_back({std::move(dets), 0, histories.id(i)});
    ++d.patterns[it->second].count;
  }
  d.n_individuals = histories.n_individuals();
  d.effort = std::move(effort);
  return d;
}

ScrData make_scr_data(const TrapArray& traps, const Mesh& mesh, const RobustDesign& design,
                      const CaptureHistories& histories) {
  std::vector<double> area(static_cast<std::size_t>(mesh.size()), mesh.cell_area_km2);
  return make_scr_data(distance_matrix(traps.traps, mesh.points), std::move(area), traps.effort, design.delta, histories);
}

DetectabilitySurface detectability(const Fields& fields, const ScrData& data) {
  check_fields(fields, data);
  ScrData empty;
  // Only the mesh-level pass is needed; patterns are skipped.
  const ScrData* view = &data;
  if (!data.patterns.empty()) {
    empty = data;
    empty.patterns.clear();
    view = &empty;
  }
  auto ev = evaluate<double>(fields, *view, true);
  return {std::move(ev.p_dot)};
}

double total_loglik(const Fields& fields, const ScrData& data) {
  check_fields(fields, data);
  const auto ev = evaluate<double>(fields, data);
  if (ev.failed_pattern >= 0) {
    throw NumericalError(fmt::format("capture history of individual '{}' has zero probability under the model",
                                     data.patterns[static_cast<std::size_t>(ev.failed_pattern)].first_id));
  }
  if (!std::isfinite(ev.loglik)) throw NumericalError("log-likelihood is not finite");
  return ev.loglik;
}

double point_process_loglik(std::span<const double> aD, std::span<const double> p_dot,
                            const std::vector<std::vector<double>>& history_probs) {
  if (aD.size() != p_dot.size()) throw ValidationError("point_process_loglik: size mismatch");
  double ll = 0.0;
  for (std::size_t m = 0; m < aD.size(); ++m) ll -= aD[m] * p_dot[m];
  for (const auto& row : history_probs) {
    if (row.size() != aD.size()) throw ValidationError("point_process_loglik: size mismatch");
    double s = 0.0;
    for (std::size_t m = 0; m < aD.size(); ++m) s += aD[m] * row[m];
    ll += std::log(s);
  }
  return ll;
}

std::vector<double> occasion_multipliers(const StateModel& state) {
  const auto t = state_machine(state);
  std::vector<double> c(t.beta.size());
  c[0] = t.beta[0];
  for (std::size_t k = 1; k < c.size(); ++k) c[k] = t.survival[k - 1] * c[k - 1] + t.beta[k];
  return c;
}

DerivedDensity derived_density(const StateModel& state, std::span<const double> D, std::span<const double> area,
                               double marked_proportion) {
  if (D.size() != area.size()) throw ValidationError("derived_density: density and area sizes differ");
  if (!(marked_proportion > 0.0 && marked_proportion <= 1.0)) {
    throw ValidationError("marked proportion must lie in (0, 1]");
  }
  DerivedDensity out;
  out.multiplier = occasion_multipliers(state);
  double nbar = 0.0;
  for (std::size_t m = 0; m < D.size(); ++m) nbar += area[m] * D[m];
  out.superpopulation = nbar / marked_proportion;
  for (double c : out.multiplier) {
    std::vector<double> dk(D.size());
    for (std::size_t m = 0; m < D.size(); ++m) dk[m] = c * D[m];
    out.density.push_back(std::move(dk));
    out.abundance.push_back(c * nbar / marked_proportion);
  }
  return out;
}

double LogLikelihood::value(const Vector& theta) const {
  Fields f;
  if (!engine::expand_fields<double>(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())), map_,
                                     f, nullptr)) {
    return kNegInf;
  }
  const auto ev = evaluate<double>(f, *data_);
  return std::isfinite(ev.loglik) ? ev.loglik : kNegInf;
}

double LogLikelihood::value_and_gradient(const Vector& theta, Vector& grad) const {
  using engine::Jet;
  constexpr int W = engine::kJetWidth;
  const int n = dim();
  grad = Vector::Zero(n);
  double value = kNegInf;
  std::vector<Jet> x(static_cast<std::size_t>(n));
  for (int start = 0; start < std::max(n, 1); start += W) {
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = Jet(theta(i));
      if (i >= start && i < start + W) x[static_cast<std::size_t>(i)].v[i - start] = 1.0;
    }
    NaturalFields<Jet> f;
    if (!engine::expand_fields<Jet>(std::span<const Jet>(x), map_, f, nullptr)) {
      grad.setConstant(std::numeric_limits<double>::quiet_NaN());
      return kNegInf;
    }
    const auto ev = evaluate<Jet>(f, *data_);
    if (!std::isfinite(ev.loglik.a)) {
      grad.setConstant(std::numeric_limits<double>::quiet_NaN());
      return kNegInf;
    }
    value = ev.loglik.a;
    for (int i = start; i < std::min(n, start + W); ++i) grad(i) = ev.loglik.v[i - start];
  }
  return value;
}

Vector LogLikelihood::gradient(const Vector& theta) const {
  Vector g;
  value_and_gradient(theta, g);
  return g;
}

}  // namespace openscr
