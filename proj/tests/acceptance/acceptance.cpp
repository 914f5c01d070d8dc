// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "openscr/csv.hpp"
#include "openscr/gof.hpp"
#include "openscr/infer.hpp"
#include "openscr/parallel.hpp"
#include "openscr/spline.hpp"
#include "testing.hpp"

#ifdef OPENSCR_HAVE_PIPELINE
#include "openscr/pipeline.hpp"
#endif

namespace fs = std::filesystem;
using namespace openscr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// 1. Forward recursion vs brute-force enumeration.
Outcome likelihood_vs_enumeration() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  const int n = 200;
  for (int rep = 0; rep < n; ++rep) {
    const auto inst = testkit::random_instance(rng);
    worst = std::max(worst, relative(total_loglik(inst.fields, inst.data), testkit::brute_force_loglik(inst)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 60.0,
          fmt::format("{} instances, max relative error {:.2e} (limit 1e-9), {:.1f} s (limit 60 s)", n, worst, secs)};
}

// 2. Entry probabilities sum to one and are nonnegative.
Outcome entry_probabilities() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<int> K(1, 12);
  std::uniform_real_distribution<double> gamma(0.0, 5.0), delta(0.01, 5.0), zero(0.0, 1.0);
  double worst_sum = 0.0, worst_row = 0.0;
  long negative = 0;
  const long n = 100000;
  for (long rep = 0; rep < n; ++rep) {
    const int k = K(rng);
    std::vector<double> g, d, phi;
    for (int i = 0; i + 1 < k; ++i) {
      g.push_back(zero(rng) < 0.05 ? 0.0 : gamma(rng));
      d.push_back(delta(rng));
      phi.push_back(zero(rng));
    }
    const auto beta = entry_probs(g, d);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(beta.begin(), beta.end(), 0.0) - 1.0));
    for (double b : beta) negative += b < 0.0;
    if (rep % 10 == 0 && k > 1) {
      for (auto& p : phi) p = std::max(p, 1e-6);
      const auto t = state_machine({g, phi, d});
      for (const auto& m : t.steps)
        for (int r = 0; r < 3; ++r) worst_row = std::max(worst_row, std::abs(m.row(r).sum() - 1.0));
    }
  }
  bool zero_ok = true;
  for (int k = 1; k <= 12; ++k) {
    const std::vector<double> g(static_cast<std::size_t>(k - 1), 0.0), d(static_cast<std::size_t>(k - 1), 1.0);
    const auto beta = entry_probs(g, d);
    zero_ok = zero_ok && beta[0] == 1.0 && std::all_of(beta.begin() + 1, beta.end(), [](double b) { return b == 0.0; });
  }
  return {worst_sum <= 1e-12 && negative == 0 && zero_ok && worst_row <= 1e-12,
          fmt::format("{} draws, max |sum beta - 1| {:.2e}, {} negative, gamma=0 gives (1,0,...): {}, max row-sum error "
                      "{:.2e}",
                      n, worst_sum, negative, zero_ok ? "yes" : "no", worst_row)};
}

// 3. Conservation with certain survival and the recursion vs a direct sum.
Outcome density_recursion() {
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<int> K(1, 12), M(1, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_cons = 0.0, worst_direct = 0.0;
  for (int rep = 0; rep < 2000; ++rep) {
    const int k = K(rng), m = M(rng);
    std::vector<double> g, d, phi, D, area;
    for (int i = 0; i + 1 < k; ++i) {
      g.push_back(3.0 * u(rng));
      d.push_back(0.05 + 3.0 * u(rng));
      phi.push_back(0.05 + 0.95 * u(rng));
    }
    for (int i = 0; i < m; ++i) {
      D.push_back(10.0 * u(rng));
      area.push_back(0.1 + u(rng));
    }
    const std::vector<double> ones(phi.size(), 1.0);
    const auto closed = derived_density({g, ones, d}, D, area);
    worst_cons = std::max(worst_cons, relative(closed.abundance.back(), closed.superpopulation));

    const auto open = derived_density({g, phi, d}, D, area);
    const auto beta = testkit::reference_beta(g, d);
    for (int kk = 0; kk < k; ++kk) {
      double c = 0.0;
      for (int e = 0; e <= kk; ++e) {
        double s = beta[static_cast<std::size_t>(e)];
        for (int i = e; i < kk; ++i) s *= std::pow(phi[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(i)]);
        c += s;
      }
      for (int i = 0; i < m; ++i) {
        const double want = c * D[static_cast<std::size_t>(i)];
        const double got = open.density[static_cast<std::size_t>(kk)][static_cast<std::size_t>(i)];
        worst_direct = std::max(worst_direct, std::abs(got - want) / std::max(1.0, want));
      }
    }
  }
  return {worst_cons <= 1e-10 && worst_direct <= 1e-12,
          fmt::format("max |N_K - Nbar| / Nbar {:.2e} (limit 1e-10), recursion vs direct sum {:.2e}", worst_cons,
                      worst_direct)};
}

// 4. Automatic differentiation vs central differences.
Outcome gradient_check() {
  std::mt19937_64 rng(1004);
  std::normal_distribution<double> n(0.0, 0.3);
  double worst = 0.0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    const auto inst = testkit::random_instance(rng, {4, 3, 6, 4, 8});
    const int J = inst.data.n_traps, K = inst.data.n_primaries, M = inst.data.n_mesh;
    CovariateTable traps(static_cast<std::size_t>(J)), mesh(static_cast<std::size_t>(M));
    std::vector<double> tc, mc;
    for (int j = 0; j < J; ++j) tc.push_back(n(rng));
    for (int m = 0; m < M; ++m) mc.push_back(n(rng));
    traps.set_numeric("depth", tc);
    mesh.set_numeric("salt", mc);
    std::vector<double> mid{0.0};
    for (double d : inst.data.delta) mid.push_back(mid.back() + d);
    const auto frames = make_frames(traps, mid, mesh);
    ModelSpec spec;
    spec[Param::lambda] = Formula::parse("depth");
    spec[Param::D] = Formula::parse("salt");
    if (K > 1) spec[Param::sigma] = Formula::parse("primary");
    if (K > 2) spec[Param::phi] = Formula::parse("time");
    const LogLikelihood ll(inst.data, ParamMap::build(spec, frames));
    Vector theta(ll.dim());
    for (Eigen::Index c = 0; c < theta.size(); ++c) theta(c) = n(rng);
    theta(ll.map()[Param::lambda].offset) += std::log(0.5);
    theta(ll.map()[Param::sigma].offset) += std::log(1000.0);
    Vector g;
    ll.value_and_gradient(theta, g);
    for (Eigen::Index c = 0; c < theta.size(); ++c) {
      const double h = 1e-5;
      Vector a = theta, b = theta;
      a(c) += h;
      b(c) -= h;
      const double fd = (ll.value(a) - ll.value(b)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g(c)) / std::max(1.0, std::abs(g(c))));
    }
  }
  return {worst <= 1e-5, fmt::format("{} instances, max relative difference {:.2e} (limit 1e-5)", reps, worst)};
}

testkit::Scenario study_scenario(std::uint64_t seed) {
  // 5 primaries of 2 secondaries, 8 x 5 = 40 traps, 15 x 10 = 150 mesh points, Nbar = 400.
  return testkit::make_scenario(testkit::Layout{}, testkit::Truth{}, seed);
}

// 5. Coverage of Wald intervals in repeated simulation.
Outcome coverage() {
  auto sc = study_scenario(1005);
  const int reps = 20;
  std::vector<int> covered(5, 0);
  int failures = 0;
  for (int rep = 0; rep < reps; ++rep) {
    auto rng = make_stream(1005, static_cast<std::uint64_t>(rep));
    testkit::simulate_into(sc, rng);
    const auto fit = maximize(sc.spec, sc.data);
    if (!fit.converged || !fit.has_vcov) {
      ++failures;
      continue;
    }
    for (int c = 0; c < 5; ++c) {
      const double se = std::sqrt(fit.vcov(c, c));
      covered[static_cast<std::size_t>(c)] += std::abs(fit.theta(c) - sc.theta(c)) <= 1.959964 * se;
    }
  }
  const bool pass = std::all_of(covered.begin(), covered.end(), [](int c) { return c >= 15; });
  return {pass, fmt::format("covered/20 for lambda, sigma, gamma, phi, D: {} {} {} {} {} (need >= 15 each), {} failed fits",
                            covered[0], covered[1], covered[2], covered[3], covered[4], failures)};
}

// 6. Goodness-of-fit envelopes on data simulated from the fitted model class.
Outcome gof_calibration() {
  auto sc = study_scenario(1006);
  const int reps = 50;
  std::vector<int> inside(3, 0);
  std::vector<std::string> names;
  for (int rep = 0; rep < reps; ++rep) {
    auto rng = make_stream(1006, static_cast<std::uint64_t>(rep));
    const auto observed = testkit::simulate_into(sc, rng);
    const auto fit = maximize(sc.spec, sc.data);
    if (!fit.converged || !fit.has_vcov) continue;
    const auto set = candidate_set({fit});
    const auto draws = model_average_bootstrap(set, sc.data, 200, 2000 + static_cast<std::uint64_t>(rep));
    GofOptions options;
    options.n_sims = 199;
    options.seed = 3000 + static_cast<std::uint64_t>(rep);
    const auto report = run_gof(set, draws, sc.data, observed, options);
    names.clear();
    for (std::size_t t = 0; t < report.tests.size(); ++t) {
      inside[t] += report.tests[t].inside_envelope;
      names.push_back(report.tests[t].name);
    }
  }
  const bool pass = std::all_of(inside.begin(), inside.end(), [](int c) { return c >= 44; });
  return {pass, fmt::format("inside envelope /50: {} {}, {} {}, {} {} (need >= 44 each)", names.at(0), inside[0],
                            names.at(1), inside[1], names.at(2), inside[2])};
}

// 7. Model-averaging frequencies and the single-model bootstrap law.
Outcome model_averaging() {
  const auto sc = study_scenario(1007);
  Matrix V(5, 5);
  V.setZero();
  const double sd[5] = {0.05, 0.03, 0.2, 0.15, 0.08};
  for (int i = 0; i < 5; ++i) V(i, i) = sd[i] * sd[i];
  V(0, 1) = V(1, 0) = -0.5 * sd[0] * sd[1];
  V(3, 4) = V(4, 3) = 0.3 * sd[3] * sd[4];
  auto make = [&](double aic_value) {
    FitResult f;
    f.spec = sc.spec;
    f.theta = sc.theta;
    f.vcov = V;
    f.has_vcov = true;
    f.converged = true;
    f.aic = aic_value;
    return f;
  };
  const int n = 10000;
  const auto two = candidate_set({make(100.0), make(102.0)});
  const auto draws = model_average_bootstrap(two, sc.data, n, 4242);
  const double p = 1.0 / (1.0 + std::exp(-1.0));
  const double freq = static_cast<double>(draws.model_counts[0]) / n;
  const double se = std::sqrt(p * (1.0 - p) / n);
  const bool freq_ok = std::abs(freq - p) <= 3.0 * se;

  const auto one = candidate_set({make(100.0)});
  const auto boot = model_average_bootstrap(one, sc.data, n, 4343);
  std::mt19937_64 rng(777);
  std::normal_distribution<double> z;
  const Matrix L = Eigen::LLT<Matrix>(V).matrixL();
  double min_p = 1.0;
  std::vector<double> ps;
  for (int c = 0; c < 5; ++c) {
    std::vector<double> a, b;
    for (const auto& d : boot.draws) a.push_back(d.theta(c));
    for (int i = 0; i < n; ++i) {
      Vector e(5);
      for (int r = 0; r < 5; ++r) e(r) = z(rng);
      b.push_back((sc.theta + L * e)(c));
    }
    // Bonferroni over the coordinates keeps the family-wise level at 0.01.
    ps.push_back(std::min(1.0, 5.0 * testkit::ks_two_sample_p(a, b)));
    min_p = std::min(min_p, ps.back());
  }
  return {freq_ok && min_p > 0.01,
          fmt::format("model-1 frequency {:.4f} vs {:.4f} +- {:.4f} (3 SE); single-model KS p per coordinate, Bonferroni-adjusted, {:.3f} (need > 0.01)",
                      freq, p, 3.0 * se, fmt::join(ps, " "))};
}

// 8. Thin plate basis reproduction, rotation invariance and width.
Outcome spline_basis() {
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::normal_distribution<double> n;
  auto fitted = [](const Matrix& B, const Vector& y) {
    Matrix X(B.rows(), B.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(B.cols()) = B;
    return Vector(X * X.colPivHouseholderQr().solve(y));
  };
  double affine = 0.0, rotation = 0.0;
  bool widths = true;
  for (int rep = 0; rep < 10; ++rep) {
    Matrix P1(60, 1), P2(120, 2);
    for (int i = 0; i < 60; ++i) P1(i, 0) = u(rng);
    for (int i = 0; i < 120; ++i) P2.row(i) << u(rng), u(rng);
    const double a = n(rng), b = n(rng), c = n(rng);
    const Vector y1 = (a + b * P1.col(0).array()).matrix();
    const Vector y2 = (a + b * P2.col(0).array() + c * P2.col(1).array()).matrix();
    Vector y3(120);
    for (int i = 0; i < 120; ++i) y3(i) = std::sin(0.3 * P2(i, 0)) * std::cos(0.2 * P2(i, 1)) + 0.1 * n(rng);
    const double angle = u(rng);
    Eigen::Matrix2d R;
    R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const Matrix Q = P2 * R.transpose();
    for (int df = 2; df <= 10; ++df) {
      const auto B = tprs_basis(P1, df);
      widths = widths && B.columns.cols() == df;
      affine = std::max(affine, (fitted(B.centered(), y1) - y1).cwiseAbs().maxCoeff());
    }
    for (int df = 3; df <= 20; ++df) {
      const auto B = tprs_basis(P2, df);
      widths = widths && B.columns.cols() == df;
      affine = std::max(affine, (fitted(B.centered(), y2) - y2).cwiseAbs().maxCoeff());
      const auto f1 = fitted(B.centered(), y3);
      const auto f2 = fitted(tprs_basis(Q, df).centered(), y3);
      rotation = std::max(rotation, (f1 - f2).cwiseAbs().maxCoeff());
    }
  }
  return {affine <= 1e-8 && rotation <= 1e-8 && widths,
          fmt::format("affine residual {:.2e}, rotation difference {:.2e} (limits 1e-8), columns = df: {}", affine,
                      rotation, widths ? "yes" : "no")};
}

#ifdef OPENSCR_HAVE_PIPELINE

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<fs::path> csv_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

fs::path scratch_root() {
  auto root = fs::temp_directory_path() / fmt::format("openscr_acceptance_{}", std::random_device{}());
  fs::create_directories(root);
  return root;
}

fs::path run_pipeline(const fs::path& out, unsigned threads) {
  auto config = pipeline::load_config(OPENSCR_SYNTHETIC_CONFIG);
  config.output_dir = out;
  pipeline::RunOptions options;
  options.threads = threads;
  pipeline::run(config, options);
  return out;
}

// 9. Thread-count independence of every CSV artifact.
Outcome determinism(const fs::path& root) {
  const auto a = run_pipeline(root / "threads1", 1);
  const auto b = run_pipeline(root / "threads8", 8);
  const auto fa = csv_files(a), fb = csv_files(b);
  std::vector<std::string> differing;
  for (const auto& f : fa)
    if (std::find(fb.begin(), fb.end(), f) == fb.end() || slurp(a / f) != slurp(b / f)) differing.push_back(f.string());
  const bool pass = !fa.empty() && fa == fb && differing.empty();
  return {pass, fmt::format("{} CSV files compared between 1 and 8 threads, {} differ{}", fa.size(), differing.size(),
                            differing.empty() ? "" : " (first: " + differing.front() + ")")};
}

// 10. Report table layouts.
Outcome report_tables(const fs::path& root) {
  const auto dir = root / "threads1" / "report";
  std::vector<std::string> problems;
  auto check = [&](const char* file, const std::vector<std::string>& header,
                   const std::function<void(const csv::Table&)>& rows) {
    const auto path = dir / file;
    if (!fs::exists(path)) {
      problems.push_back(fmt::format("{} missing", file));
      return;
    }
    const auto t = csv::Table::read(path);
    if (t.header() != header) problems.push_back(fmt::format("{} header mismatch", file));
    else if (t.rows() == 0) problems.push_back(fmt::format("{} is empty", file));
    else rows(t);
  };
  auto decimals = [](const std::string& s) {
    const auto dot = s.find('.');
    return dot == std::string::npos ? 0 : static_cast<int>(s.size() - dot - 1);
  };
  auto expect_decimals = [&](const csv::Table& t, std::size_t col, int want, const char* file) {
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (decimals(t.cell(r, col)) != want) {
        problems.push_back(fmt::format("{} row {} column {} has '{}'", file, r + 1, t.header()[col], t.cell(r, col)));
        return;
      }
  };
  auto is_short_date = [](const std::string& s) {
    static const std::set<std::string> months{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    return s.size() == 9 && s[2] == '-' && s[6] == '-' && months.contains(s.substr(3, 3));
  };

  check("table_occasions.csv", {"Primary", "Start Date"}, [&](const csv::Table& t) {
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (t.integer(r, 0) != static_cast<long>(r + 1) || !is_short_date(t.cell(r, 1))) {
        problems.push_back(fmt::format("table_occasions.csv row {} malformed", r + 1));
        return;
      }
  });
  check("table_intervals.csv", {"Interval", "Duration"}, [&](const csv::Table& t) {
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (t.cell(r, 0) != fmt::format("{}--{}", r + 1, r + 2)) problems.push_back("table_intervals.csv interval labels");
    expect_decimals(t, 1, 1, "table_intervals.csv");
  });
  check("table_selection.csv", {"Recruitment df", "Survival df", "Delta AIC"}, [&](const csv::Table& t) {
    if (t.rows() > 10) problems.push_back("table_selection.csv has more than 10 rows");
    if (t.number(0, 2) != 0.0) problems.push_back("table_selection.csv first row is not the best model");
    expect_decimals(t, 2, 1, "table_selection.csv");
  });
  check("table_survival.csv", {"Date", "phi", "LCL", "UCL"}, [&](const csv::Table& t) {
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (!is_short_date(t.cell(r, 0)) || t.number(r, 2) > t.number(r, 3)) {
        problems.push_back(fmt::format("table_survival.csv row {} malformed", r + 1));
        return;
      }
    for (std::size_t c = 1; c < 4; ++c) expect_decimals(t, c, 2, "table_survival.csv");
  });
  check("table_salinity_bands.csv",
        {"Salinity", "Area", "Density", "Density LCL", "Density UCL", "Abundance", "Abundance LCL", "Abundance UCL"},
        [&](const csv::Table& t) {
          for (std::size_t r = 0; r < t.rows(); ++r)
            if (t.number(r, 1) <= 0.0 || t.number(r, 3) > t.number(r, 4) || t.number(r, 6) > t.number(r, 7)) {
              problems.push_back(fmt::format("table_salinity_bands.csv row {} malformed", r + 1));
              return;
            }
        });
  return {problems.empty(), problems.empty() ? "occasion, interval, selection, survival and salinity-band tables match"
                                             : fmt::format("{} problem(s), first: {}", problems.size(), problems.front())};
}

#endif

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
#ifdef OPENSCR_HAVE_PIPELINE
  const auto root = scratch_root();
#endif
  const std::vector<Criterion> criteria{
      {1, "likelihood matches brute-force enumeration", likelihood_vs_enumeration},
      {2, "entry probabilities form a distribution", entry_probabilities},
      {3, "density recursion conserves the superpopulation", density_recursion},
      {4, "gradient matches finite differences", gradient_check},
      {5, "95% interval coverage in simulation", coverage},
      {6, "goodness-of-fit envelopes are calibrated", gof_calibration},
      {7, "model-averaging bootstrap frequencies", model_averaging},
      {8, "thin plate basis properties", spline_basis},
#ifdef OPENSCR_HAVE_PIPELINE
      {9, "CSV outputs identical for 1 and 8 threads", [&] { return determinism(root); }},
      {10, "report table layouts", [&] { return report_tables(root); }},
#else
      {9, "CSV outputs identical for 1 and 8 threads", [] { return Outcome{false, "pipeline library not built"}; }},
      {10, "report table layouts", [] { return Outcome{false, "pipeline library not built"}; }},
#endif
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s - %s [%s] (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
#ifdef OPENSCR_HAVE_PIPELINE
  std::error_code ec;
  fs::remove_all(root, ec);
#endif
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
