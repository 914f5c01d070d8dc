#include "openscr/fit.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace openscr {
namespace {

void set_intercept(Vector& theta, const ParamMap& map, Param p, double value) {
  const auto& d = map[p];
  if (d.n_coef() > 0) theta(d.offset) = value;
}

}  // namespace

double aic(double loglik, int n_params) { return -2.0 * loglik + 2.0 * n_params; }

double aic(const FitResult& fit) { return aic(fit.loglik, fit.n_params()); }

std::vector<double> aic_weights(const std::vector<double>& aics) {
  if (aics.empty()) return {};
  const double best = *std::min_element(aics.begin(), aics.end());
  std::vector<double> w(aics.size());
  double total = 0.0;
  for (std::size_t i = 0; i < aics.size(); ++i) {
    w[i] = std::exp(-0.5 * (aics[i] - best));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

Vector default_start(const ParamMap& map, const ModelData& data) {
  const auto& scr = data.scr;
  Vector theta = Vector::Zero(map.size());

  long detections = 0;
  for (const auto& p : scr.patterns) detections += static_cast<long>(p.detections.size()) * p.count;
  long effort = 0;
  for (int s = 0; s < scr.effort.total_secondaries(); ++s)
    for (int j = 0; j < scr.n_traps; ++j) effort += scr.effort.at(j, s);
  const double rate = detections > 0 && effort > 0 ? static_cast<double>(detections) / static_cast<double>(effort) : 1e-3;
  set_intercept(theta, map, Param::lambda, std::log(rate));

  double sigma = 1000.0;
  if (!data.traps.empty()) {
    double x0 = data.traps[0].x, x1 = x0, y0 = data.traps[0].y, y1 = y0;
    for (const auto& p : data.traps) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    const double half_diag = 0.5 * std::hypot(x1 - x0, y1 - y0);
    if (half_diag > 0.0) sigma = half_diag;
  }
  set_intercept(theta, map, Param::sigma, std::log(sigma));

  double span = 0.0;
  for (double d : scr.delta) span += d;
  if (span > 0.0) set_intercept(theta, map, Param::gamma, std::log(static_cast<double>(scr.n_primaries) / span));
  set_intercept(theta, map, Param::phi, apply_link(Link::logit, 0.9));

  // D from n / sum(a p.) under the starting detection parameters.
  try {
    const auto fields = expand_params(theta, map);
    const auto surface = detectability(fields, scr);
    double expected = 0.0;
    for (std::size_t m = 0; m < surface.p_dot.size(); ++m) expected += scr.area[m] * surface.p_dot[m];
    if (expected > 0.0 && scr.n_individuals > 0) {
      set_intercept(theta, map, Param::D, std::log(scr.n_individuals / expected));
    }
  } catch (const NumericalError& e) {
    spdlog::warn("density starting value left at 1: {}", e.what());
  }
  return theta;
}

Vector warm_start(const ParamMap& map, const FitResult& previous, Vector start) {
  std::map<std::string, double> known;
  for (std::size_t i = 0; i < previous.names.size(); ++i) known[previous.names[i]] = previous.theta(static_cast<Eigen::Index>(i));
  const auto names = map.names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (auto it = known.find(names[i]); it != known.end()) start(static_cast<Eigen::Index>(i)) = it->second;
  return start;
}

FitResult maximize(const ModelSpec& spec, const ModelData& data, const std::optional<Vector>& theta0,
                   const FitControls& controls) {
  const auto map = ParamMap::build(spec, data.frames);
  Vector start = theta0 ? *theta0 : default_start(map, data);
  if (start.size() != map.size()) {
    throw ValidationError(fmt::format("starting vector has {} entries, model needs {}", start.size(), map.size()));
  }
  if (!start.allFinite()) throw ValidationError("starting vector is not finite");

  const LogLikelihood ll(data.scr, map);
  const auto opt = maximize_bfgs([&](const Vector& x, Vector& g) { return ll.value_and_gradient(x, g); }, start,
                                 controls.optimizer);

  FitResult r;
  r.spec = spec;
  r.names = map.names();
  r.theta = opt.x;
  r.loglik = opt.value;
  r.aic = aic(r.loglik, r.n_params());
  r.converged = opt.converged;
  r.iterations = opt.iterations;
  r.message = opt.message;
  r.trace = opt.trace;
  if (!std::isfinite(r.loglik)) {
    r.converged = false;
    r.aic = std::numeric_limits<double>::infinity();
    return r;
  }

  if (controls.compute_vcov) {
    try {
      const Matrix h = hessian_from_gradient([&](const Vector& x) { return ll.gradient(x); }, r.theta);
      const Matrix info = -h;
      Eigen::LLT<Matrix> llt(info);
      if (llt.info() == Eigen::Success) {
        r.vcov = llt.solve(Matrix::Identity(info.rows(), info.cols()));
        r.vcov = 0.5 * (r.vcov + r.vcov.transpose());
        r.has_vcov = r.vcov.allFinite();
      }
      if (!r.has_vcov) r.message += "; Hessian is not negative definite, covariance unavailable";
    } catch (const NumericalError& e) {
      r.message += fmt::format("; covariance unavailable: {}", e.what());
    }
  }
  spdlog::debug("fit {}: loglik {:.6f}, AIC {:.4f}, {} iterations, {}", spec.describe(), r.loglik, r.aic, r.iterations,
                r.message);
  return r;
}

FitResult maximize_from(const ModelSpec& spec, const ModelData& data, const FitResult& previous,
                        const FitControls& controls) {
  const auto map = ParamMap::build(spec, data.frames);
  return maximize(spec, data, warm_start(map, previous, default_start(map, data)), controls);
}

}  // namespace openscr
