#include "openscr/design.hpp"

#include <fmt/format.h>

#include "engine.hpp"
#include "openscr/spline.hpp"

namespace openscr {
namespace {

constexpr std::array<std::string_view, 5> kNames{"lambda", "sigma", "gamma", "phi", "D"};

struct Columns {
  std::vector<Vector> cols;
  std::vector<std::string> names;
  std::vector<TermSlice> terms;
};

void add_factor(Columns& out, std::string_view pname, const std::string& var, const Factor& f, std::size_t rows) {
  std::vector<char> used(f.levels.size(), 0);
  for (int c : f.codes) used[static_cast<std::size_t>(c)] = 1;
  std::vector<int> present;
  for (std::size_t l = 0; l < used.size(); ++l)
    if (used[l]) present.push_back(static_cast<int>(l));
  TermSlice slice{var, static_cast<int>(out.cols.size()), 0};
  // Treatment contrasts against the first level present.
  for (std::size_t i = 1; i < present.size(); ++i) {
    Vector col = Vector::Zero(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r)
      if (f.codes[r] == present[i]) col(static_cast<Eigen::Index>(r)) = 1.0;
    out.cols.push_back(std::move(col));
    out.names.push_back(fmt::format("{}.{}[{}]", pname, var, f.levels[static_cast<std::size_t>(present[i])]));
    ++slice.size;
  }
  out.terms.push_back(std::move(slice));
}

const std::vector<double>& numeric_column(const CovariateTable& table, std::string_view pname, const std::string& var) {
  if (!table.has(var)) throw ValidationError(fmt::format("{}: unknown covariate '{}'", pname, var));
  if (table.is_factor(var)) {
    throw ValidationError(fmt::format("{}: smooth over categorical covariate '{}'", pname, var));
  }
  return table.numeric(var);
}

ParameterDesign build_one(Param p, const Formula& formula, const CovariateTable& table) {
  const auto pname = param_name(p);
  const std::size_t rows = table.rows();
  ParameterDesign d;
  d.param = p;
  d.link = link_of(p);
  if (rows == 0) {
    d.X = Matrix(0, 0);
    return d;
  }
  Columns out;
  out.cols.push_back(Vector::Ones(static_cast<Eigen::Index>(rows)));
  out.names.push_back(fmt::format("{}.(Intercept)", pname));
  out.terms.push_back({"(Intercept)", 0, 1});
  for (const auto& term : formula.terms) {
    if (!term.is_smooth()) {
      const auto& var = term.variables.front();
      if (!table.has(var)) throw ValidationError(fmt::format("{}: unknown covariate '{}'", pname, var));
      if (table.is_factor(var)) {
        add_factor(out, pname, var, table.factor(var), rows);
      } else {
        const auto& v = table.numeric(var);
        out.terms.push_back({var, static_cast<int>(out.cols.size()), 1});
        out.cols.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(rows)));
        out.names.push_back(fmt::format("{}.{}", pname, var));
      }
      continue;
    }
    if (term.df <= 0) throw ValidationError(fmt::format("{}: smooth '{}' has no df", pname, term.key()));
    Matrix pts(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(term.variables.size()));
    for (std::size_t c = 0; c < term.variables.size(); ++c) {
      const auto& v = numeric_column(table, pname, term.variables[c]);
      for (std::size_t r = 0; r < rows; ++r) pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r];
    }
    Matrix basis;
    try {
      basis = tprs_basis(pts, term.df, term.variables).centered();
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}: {}", pname, term.label(), e.what()));
    }
    TermSlice slice{term.label(), static_cast<int>(out.cols.size()), static_cast<int>(basis.cols())};
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      out.cols.push_back(basis.col(c));
      out.names.push_back(fmt::format("{}.{}.{}", pname, term.label(), c + 1));
    }
    out.terms.push_back(std::move(slice));
  }
  d.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out.cols.size()));
  for (std::size_t c = 0; c < out.cols.size(); ++c) d.X.col(static_cast<Eigen::Index>(c)) = out.cols[c];
  d.coef_names = std::move(out.names);
  d.terms = std::move(out.terms);
  return d;
}

}  // namespace

std::string_view param_name(Param p) { return kNames[static_cast<std::size_t>(p)]; }

Param param_from_name(std::string_view name) {
  for (Param p : kAllParams)
    if (kNames[static_cast<std::size_t>(p)] == name) return p;
  throw ValidationError(fmt::format("unknown parameter '{}'", name));
}

Link link_of(Param p) { return p == Param::phi ? Link::logit : Link::log; }

double apply_link(Link link, double value) {
  if (link == Link::log) return std::log(value);
  return std::log(value) - std::log1p(-value);
}

double inverse_link(Link link, double eta) {
  if (link == Link::log) return std::exp(eta);
  return engine::inv_logit(eta);
}

std::string ModelSpec::describe() const {
  std::string s;
  for (Param p : kAllParams) {
    if (!s.empty()) s += "; ";
    s += fmt::format("{} ~ {}", param_name(p), (*this)[p].to_string());
  }
  return s;
}

std::vector<int> ModelSpec::smoothing_parameters() const {
  std::vector<int> out;
  for (Param p : kAllParams)
    for (const auto& t : (*this)[p].terms)
      if (t.is_smooth()) out.push_back(t.df);
  return out;
}

const CovariateTable& CovariateFrames::for_param(Param p) const {
  switch (p) {
    case Param::lambda:
    case Param::sigma: return detection;
    case Param::gamma:
    case Param::phi: return dynamics;
    case Param::D: return density;
  }
  return density;
}

CovariateFrames make_frames(const CovariateTable& traps, std::span<const double> midpoint_years,
                            const CovariateTable& mesh) {
  CovariateFrames f;
  const auto J = traps.rows();
  const auto K = midpoint_years.size();
  if (K == 0) throw ValidationError("at least one primary occasion is required");
  f.n_traps = static_cast<int>(J);
  f.n_primaries = static_cast<int>(K);
  f.detection = CovariateTable(J * K);
  for (const auto& name : traps.names()) {
    if (traps.is_factor(name)) {
      const auto& src = traps.factor(name);
      Factor rep{src.levels, {}};
      for (std::size_t k = 0; k < K; ++k) rep.codes.insert(rep.codes.end(), src.codes.begin(), src.codes.end());
      f.detection.set_factor(name, std::move(rep));
    } else {
      const auto& src = traps.numeric(name);
      std::vector<double> rep;
      for (std::size_t k = 0; k < K; ++k) rep.insert(rep.end(), src.begin(), src.end());
      f.detection.set_numeric(name, std::move(rep));
    }
  }
  Factor primary;
  for (std::size_t k = 0; k < K; ++k) primary.levels.push_back(std::to_string(k + 1));
  Factor det_primary{primary.levels, {}};
  std::vector<double> det_time;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j) {
      det_primary.codes.push_back(static_cast<int>(k));
      det_time.push_back(midpoint_years[k]);
    }
  if (!f.detection.has("primary")) f.detection.set_factor("primary", std::move(det_primary));
  if (!f.detection.has("time")) f.detection.set_numeric("time", std::move(det_time));

  f.dynamics = CovariateTable(K - 1);
  Factor dyn_primary{std::vector<std::string>(primary.levels.begin(), primary.levels.end() - 1), {}};
  std::vector<double> dyn_time;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    dyn_primary.codes.push_back(static_cast<int>(k));
    dyn_time.push_back(midpoint_years[k]);
  }
  f.dynamics.set_factor("primary", std::move(dyn_primary));
  f.dynamics.set_numeric("time", std::move(dyn_time));
  f.density = mesh;
  return f;
}

ParamMap ParamMap::build(const ModelSpec& spec, const CovariateFrames& frames) {
  if (frames.detection.rows() != static_cast<std::size_t>(frames.n_traps) * frames.n_primaries) {
    throw ValidationError("detection covariates must have one row per trap and primary");
  }
  if (frames.n_primaries >= 1 && frames.dynamics.rows() != static_cast<std::size_t>(frames.n_primaries - 1)) {
    throw ValidationError("dynamics covariates must have one row per interval");
  }
  ParamMap map;
  map.n_traps_ = frames.n_traps;
  map.n_primaries_ = frames.n_primaries;
  int offset = 0;
  for (Param p : kAllParams) {
    auto d = build_one(p, spec[p], frames.for_param(p));
    d.offset = offset;
    offset += d.n_coef();
    map.designs_[static_cast<std::size_t>(p)] = std::move(d);
  }
  map.size_ = offset;
  return map;
}

std::vector<std::string> ParamMap::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size_));
  for (const auto& d : designs_) out.insert(out.end(), d.coef_names.begin(), d.coef_names.end());
  return out;
}

Vector ParamMap::slice(const Vector& theta, Param p) const {
  const auto& d = (*this)[p];
  return theta.segment(d.offset, d.n_coef());
}

Vector ParamMap::assemble(const std::array<Vector, 5>& blocks) const {
  Vector theta(size_);
  for (Param p : kAllParams) {
    const auto& d = (*this)[p];
    const auto& b = blocks[static_cast<std::size_t>(p)];
    if (b.size() != d.n_coef()) {
      throw ValidationError(fmt::format("{} block has {} coefficients, expected {}", param_name(p), b.size(), d.n_coef()));
    }
    theta.segment(d.offset, d.n_coef()) = b;
  }
  return theta;
}

Fields expand_params(const Vector& theta, const ParamMap& map) {
  if (theta.size() != map.size()) {
    throw ValidationError(fmt::format("parameter vector has {} entries, model needs {}", theta.size(), map.size()));
  }
  Fields out;
  engine::ExpandFailure bad;
  if (!engine::expand_fields<double>(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())), map, out,
                                     &bad)) {
    const auto& d = map[bad.param];
    std::string terms;
    for (const auto& t : d.terms) {
      const double part = (d.X.row(bad.unit).segment(t.offset, t.size) * theta.segment(d.offset + t.offset, t.size))(0);
      terms += fmt::format(" {}={}", t.label, part);
    }
    throw NumericalError(
        fmt::format("non-finite linear predictor for {} at unit {}:{}", param_name(bad.param), bad.unit, terms));
  }
  return out;
}

Fields constant_fields(int n_traps, int n_primaries, int n_mesh, double lambda, double sigma, double gamma, double phi,
                       double D) {
  Fields f;
  f.n_traps = n_traps;
  f.n_primaries = n_primaries;
  const auto jk = static_cast<std::size_t>(n_traps) * static_cast<std::size_t>(n_primaries);
  const auto intervals = static_cast<std::size_t>(std::max(0, n_primaries - 1));
  f.lambda.assign(jk, lambda);
  f.sigma.assign(jk, sigma);
  f.gamma.assign(intervals, gamma);
  f.phi.assign(intervals, phi);
  f.D.assign(static_cast<std::size_t>(n_mesh), D);
  return f;
}

}  // namespace openscr
