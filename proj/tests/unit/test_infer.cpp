#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "openscr/infer.hpp"
#include "testing.hpp"

using namespace openscr;

namespace {

testkit::Scenario hundred_cells() {
  testkit::Layout layout;
  layout.n_primaries = 3;
  layout.mesh_nx = 10;
  layout.mesh_ny = 10;
  layout.traps_nx = 4;
  layout.traps_ny = 4;
  testkit::Truth truth;
  truth.gamma = 1e-12;
  truth.phi = 1.0 - 1e-15;
  truth.D = 1.0;
  return testkit::make_scenario(layout, truth, 41);
}

FitResult exact_fit(const testkit::Scenario& sc, double spread = 0.0) {
  FitResult f;
  f.spec = sc.spec;
  f.theta = sc.theta;
  f.theta(3) = 40.0;  // logit scale: survival of one for practical purposes
  f.vcov = spread * Matrix::Identity(5, 5);
  f.has_vcov = true;
  f.converged = true;
  return f;
}

BootstrapDraws draws_of(std::vector<std::vector<double>> per_point) {
  BootstrapDraws d;
  const std::size_t n = per_point.front().size();
  d.draws.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& v : per_point) d.draws[i].D.push_back(v[i]);
    d.draws[i].multiplier = {1.0};
  }
  return d;
}

}  // namespace

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3}, 0.25), 1.5);
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2}, 0.75), 2.5);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.975), 5.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_THROW(quantile({}, 0.5), ValidationError);
  EXPECT_THROW(quantile({1.0}, 1.5), ValidationError);
}

TEST(Iqd, HandValueAndEdgeCases) {
  const std::vector<double> v{1, 2, 3};
  EXPECT_DOUBLE_EQ(iqd(v), 0.5);
  const std::vector<double> same{4, 4, 4, 4};
  EXPECT_DOUBLE_EQ(iqd(same), 0.0);
  const std::vector<double> zero{-1, 0, 0, 1};
  EXPECT_EQ(iqd(zero), std::numeric_limits<double>::infinity());
  const std::vector<double> w{0.3, 1.7, 2.2, 0.9, 5.1};
  std::vector<double> scaled;
  for (double x : w) scaled.push_back(x * 37.5);
  EXPECT_NEAR(iqd(w), iqd(scaled), 1e-12);
}

TEST(IqdRegion, MaskAndMinimumDraws) {
  const auto d = draws_of({{1, 2, 3, 2}, {1, 1, 1, 1}, {0, 0, 0, 5}});
  const auto r = iqd_region(d, 0.95);
  EXPECT_EQ(r.keep, (std::vector<char>{1, 1, 0}));
  EXPECT_EQ(r.kept(), 2);
  EXPECT_THROW(iqd_region(draws_of({{1, 2, 3}}), 0.95), ValidationError);
}

TEST(CovarianceFactor, RepairsSmallNegativeEigenvalues) {
  Matrix v(2, 2);
  v << 1.0, 0.0, 0.0, 2.0;
  const Matrix L = covariance_factor(v);
  EXPECT_LT((L * L.transpose() - v).cwiseAbs().maxCoeff(), 1e-12);
  Matrix slight(2, 2);
  slight << 1.0, 0.0, 0.0, -1e-6;
  const Matrix L2 = covariance_factor(slight);
  EXPECT_NEAR((L2 * L2.transpose())(1, 1), 0.0, 1e-15);
  Matrix broken(2, 2);
  broken << 1.0, 0.0, 0.0, -0.5;
  EXPECT_THROW(covariance_factor(broken), NumericalError);
}

TEST(Bootstrap, ZeroCovarianceReproducesEstimate) {
  const auto sc = hundred_cells();
  const auto set = candidate_set({exact_fit(sc)});
  const auto draws = model_average_bootstrap(set, sc.data, 50, 7);
  ASSERT_EQ(draws.size(), 50);
  for (const auto& d : draws.draws) EXPECT_EQ(d.theta, set.fits[0].theta);
  const auto dens = summarize_density(draws, sc.data.scr.area, 1.0);
  EXPECT_DOUBLE_EQ(dens.density[0].lcl, dens.density[0].ucl);
  // D = 1 over 100 km^2, everyone present from the start and surviving.
  for (const auto& n : dens.abundance) EXPECT_NEAR(n.mean, 100.0, 1e-6);
  EXPECT_EQ(draws.model_counts, std::vector<int>{50});
}

TEST(Bootstrap, DeterministicAndScheduleFree) {
  const auto sc = hundred_cells();
  const auto set = candidate_set({exact_fit(sc, 0.01)});
  const auto a = model_average_bootstrap(set, sc.data, 40, 99);
  const auto b = model_average_bootstrap(set, sc.data, 40, 99);
  const auto c = model_average_bootstrap(set, sc.data, 40, 100);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(a.draws[static_cast<std::size_t>(i)].theta, b.draws[static_cast<std::size_t>(i)].theta);
  EXPECT_NE(a.draws[0].theta, c.draws[0].theta);
  FitResult no_vcov = exact_fit(sc);
  no_vcov.has_vcov = false;
  EXPECT_THROW(model_average_bootstrap(candidate_set({no_vcov}), sc.data, 10, 1), ValidationError);
  EXPECT_THROW(model_average_bootstrap(set, sc.data, 0, 1), ValidationError);
}

TEST(SummarizeDensity, SingleDrawAndMarkedScaling) {
  auto d = draws_of({{2.0}, {4.0}});
  d.draws[0].multiplier = {0.5, 1.0};
  const std::vector<double> area{1.0, 3.0};
  const auto s = summarize_density(d, area, 1.0);
  EXPECT_DOUBLE_EQ(s.density[1].mean, 4.0);
  EXPECT_DOUBLE_EQ(s.superpopulation.mean, 14.0);
  EXPECT_DOUBLE_EQ(s.abundance[0].mean, 7.0);
  const auto m = summarize_density(d, area, 0.8);
  EXPECT_DOUBLE_EQ(m.density[1].mean, 5.0);
  EXPECT_DOUBLE_EQ(m.abundance[1].mean, 14.0 * 1.25);
  RegionOfInference keep_first{{0.1, 2.0}, {1, 0}};
  EXPECT_DOUBLE_EQ(summarize_density(d, area, 1.0, &keep_first).superpopulation.mean, 2.0);
}

TEST(SalinityBands, PartitionAndRatios) {
  const auto one = salinity_bands(draws_of({{2.0}, {2.0}}), std::vector<double>{15.0, 15.2},
                                  std::vector<double>{5.0, 5.0}, 1.0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].band, 15);
  EXPECT_DOUBLE_EQ(one[0].abundance[0].mean, 20.0);
  EXPECT_DOUBLE_EQ(one[0].density[0].mean, 2.0);

  const std::vector<double> sal{9.5, 10.49, 10.5, 11.2};
  const std::vector<double> area{2.0, 2.0, 3.0, 1.0};
  const auto two = salinity_bands(draws_of({{1.0}, {1.0}, {2.0}, {2.0}}), sal, area, 1.0);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].band, 10);
  EXPECT_EQ(two[1].band, 11);
  EXPECT_DOUBLE_EQ(two[0].area + two[1].area, 8.0);
  EXPECT_DOUBLE_EQ(two[1].density[0].mean / two[0].density[0].mean, 2.0);
  EXPECT_EQ(two[0].n_points, 2);
}

TEST(SummarizeDynamics, RecruitsPerYear) {
  BootstrapDraws d;
  d.draws.resize(1);
  auto& x = d.draws[0];
  x.phi = {0.9};
  x.gamma = {0.2};
  x.beta = {0.6, 0.4};
  x.superpopulation = 100.0;
  const std::vector<double> delta{0.5};
  const auto s = summarize_dynamics(d, delta, 0.8);
  EXPECT_DOUBLE_EQ(s.recruits_per_year[0].mean, 0.4 * 100.0 / 0.5 / 0.8);
  EXPECT_DOUBLE_EQ(s.phi[0].mean, 0.9);
}
