#pragma once

// Scalar-generic likelihood kernels shared by the double evaluation and the
// forward-mode gradient.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <ceres/jet.h>
#include <fmt/format.h>

#include "openscr/design.hpp"
#include "openscr/likelihood.hpp"

namespace ceres {

template <typename T, int N>
inline Jet<T, N> expm1(const Jet<T, N>& f) {
  const T e = std::exp(f.a);
  return Jet<T, N>(std::expm1(f.a), e * f.v);
}

template <typename T, int N>
inline Jet<T, N> log1p(const Jet<T, N>& f) {
  return Jet<T, N>(std::log1p(f.a), f.v / (T(1) + f.a));
}

}  // namespace ceres

namespace openscr::engine {

using std::exp;
using std::expm1;
using std::log;
using std::log1p;
using ceres::exp;
using ceres::expm1;
using ceres::log;
using ceres::log1p;

inline constexpr int kJetWidth = 8;
using Jet = ceres::Jet<double, kJetWidth>;

inline double val(double x) { return x; }
template <int N>
inline double val(const ceres::Jet<double, N>& x) {
  return x.a;
}

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class T>
T inv_logit(const T& eta) {
  if (val(eta) >= 0.0) return T(1.0) / (T(1.0) + exp(-eta));
  const T e = exp(eta);
  return e / (T(1.0) + e);
}

/// Linear predictors and inverse links. Returns false (and fills `bad`)
/// when some predictor is not finite.
struct ExpandFailure {
  Param param = Param::lambda;
  int unit = 0;
};

template <class T>
bool expand_fields(std::span<const T> theta, const ParamMap& map, NaturalFields<T>& out, ExpandFailure* bad) {
  out.n_traps = map.n_traps();
  out.n_primaries = map.n_primaries();
  for (Param p : kAllParams) {
    const auto& d = map[p];
    std::vector<T> field(static_cast<std::size_t>(d.n_units()));
    for (int u = 0; u < d.n_units(); ++u) {
      T eta(0.0);
      for (int c = 0; c < d.n_coef(); ++c) {
        const double x = d.X(u, c);
        if (x != 0.0) eta += x * theta[static_cast<std::size_t>(d.offset + c)];
      }
      if (!std::isfinite(val(eta))) {
        if (bad) *bad = {p, u};
        return false;
      }
      field[static_cast<std::size_t>(u)] = d.link == Link::log ? exp(eta) : inv_logit(eta);
    }
    switch (p) {
      case Param::lambda: out.lambda = std::move(field); break;
      case Param::sigma: out.sigma = std::move(field); break;
      case Param::gamma: out.gamma = std::move(field); break;
      case Param::phi: out.phi = std::move(field); break;
      case Param::D: out.D = std::move(field); break;
    }
  }
  return true;
}

/// Per-interval transition quantities in the form used by the recursion.
template <class T>
struct Chain {
  T init_before;  // 1 - beta_1
  T init_during;  // beta_1
  std::vector<T> enter;   // b_k
  std::vector<T> stay;    // 1 - b_k
  std::vector<T> surv;    // s_k
  std::vector<T> die;     // 1 - s_k
};

template <class T>
Chain<T> make_chain(const std::vector<T>& gamma, const std::vector<T>& phi, std::span<const double> delta) {
  const std::size_t n = gamma.size();
  Chain<T> c;
  std::vector<T> h(n), tail(n + 1, T(0.0));
  for (std::size_t i = 0; i < n; ++i) h[i] = gamma[i] * delta[i];
  for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + h[i];
  const T total = n ? tail[0] : T(0.0);
  if (val(total) > 0.0) {
    c.init_during = exp(-total);
    c.init_before = -expm1(-total);
  } else {
    c.init_during = T(1.0);
    c.init_before = T(0.0);
  }
  c.enter.resize(n);
  c.stay.resize(n);
  c.surv.resize(n);
  c.die.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (val(tail[i]) > 0.0) {
      c.enter[i] = h[i] / tail[i];
      c.stay[i] = tail[i + 1] / tail[i];
    } else {
      c.enter[i] = T(0.0);
      c.stay[i] = T(1.0);
    }
    const T lp = delta[i] * log(phi[i]);
    c.surv[i] = exp(lp);
    c.die[i] = -expm1(lp);
  }
  return c;
}

/// Log-sum-exp over the supplied log terms, skipping -inf.
template <class T>
T log_sum(const T* terms, const bool* present, int n) {
  double mx = kNegInf;
  for (int i = 0; i < n; ++i)
    if (present[i]) mx = std::max(mx, val(terms[i]));
  if (mx == kNegInf) return T(kNegInf);
  T sum(0.0);
  for (int i = 0; i < n; ++i)
    if (present[i]) sum += exp(terms[i] - mx);
  return mx + log(sum);
}

/// Forward recursion over primaries for one history at one mesh point.
/// `log_emit_during(k)` is the log emission of primary k while alive and
/// `detected(k)` whether the individual was seen in primary k. Outside the
/// during state only the all-zero history can be emitted.
template <class T, class Emit, class Seen>
T forward(const Chain<T>& chain, int n_primaries, Emit&& log_emit_during, Seen&& detected) {
  T a[3] = {chain.init_before, chain.init_during, T(0.0)};
  T log_scale(0.0);
  for (int k = 0; k < n_primaries; ++k) {
    if (k > 0) {
      const auto i = static_cast<std::size_t>(k - 1);
      const T b = a[0] * chain.stay[i];
      const T d = a[0] * chain.enter[i] + a[1] * chain.surv[i];
      const T x = a[1] * chain.die[i] + a[2];
      a[0] = b;
      a[1] = d;
      a[2] = x;
    }
    const T le = log_emit_during(k);
    if (detected(k)) {
      if (!(val(a[1]) > 0.0) || val(le) == kNegInf) return T(kNegInf);
      log_scale += log(a[1]) + le;
      a[0] = T(0.0);
      a[1] = T(1.0);
      a[2] = T(0.0);
      continue;
    }
    T terms[3];
    bool present[3];
    for (int s = 0; s < 3; ++s) {
      present[s] = val(a[s]) > 0.0;
      if (present[s]) terms[s] = log(a[s]) + (s == 1 ? le : T(0.0));
    }
    if (present[1] && val(le) == kNegInf) present[1] = false;
    const T total = log_sum(terms, present, 3);
    if (val(total) == kNegInf) return T(kNegInf);
    for (int s = 0; s < 3; ++s) a[s] = present[s] ? exp(terms[s] - total) : T(0.0);
    log_scale += total;
  }
  return log_scale;
}

/// log((1 - exp(-E)) / E) + E, with the E -> 0 limit.
template <class T>
T detected_correction(const T& hazard) {
  if (!(val(hazard) > 1e-300)) return T(0.0);
  return log(-expm1(-hazard) / hazard) + hazard;
}

struct EffortEntry {
  int trap;
  double u;
};

/// Nonzero effort per flat secondary, in trap order.
inline std::vector<std::vector<EffortEntry>> effort_lists(const EffortArray& effort) {
  std::vector<std::vector<EffortEntry>> out(static_cast<std::size_t>(effort.total_secondaries()));
  for (int s = 0; s < effort.total_secondaries(); ++s)
    for (int j = 0; j < effort.n_traps(); ++j)
      if (const int u = effort.at(j, s); u > 0) out[static_cast<std::size_t>(s)].push_back({j, static_cast<double>(u)});
  return out;
}

/// All likelihood pieces for one parameter point.
template <class T>
struct Evaluation {
  T loglik;
  int failed_pattern = -1;  // pattern with zero probability everywhere
};

template <class T>
struct Workspace {
  std::vector<T> hazard;   // [s * M + m]
  std::vector<T> miss;     // [k * M + m], -sum_l E
  std::vector<T> corr;     // [s * M + m], detected_correction
  std::vector<T> log_aD;   // [m]
  std::vector<T> neg_inv_two_sigma2;  // [k * J + j]
  std::vector<T> log_lambda;          // [k * J + j]
};

}  // namespace openscr::engine
