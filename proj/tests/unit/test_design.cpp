#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "openscr/design.hpp"

using namespace openscr;

namespace {

// Three traps (two "Island", one "Bay"), K primaries, six mesh points.
CovariateFrames small_frames(int K = 3) {
  CovariateTable traps(3);
  traps.set_factor("stratum", Factor{{"Bay", "Island"}, {0, 1, 1}});
  traps.set_numeric("x", {0.0, 1.0, 2.0});
  CovariateTable mesh(6);
  mesh.set_numeric("x", {0, 1, 2, 0, 1, 2});
  mesh.set_numeric("y", {0, 0, 0, 1, 1, 1});
  mesh.set_numeric("avg_salinity", {10, 12, 15, 18, 22, 25});
  std::vector<double> mid;
  for (int k = 0; k < K; ++k) mid.push_back(0.5 * k);
  return make_frames(traps, mid, mesh);
}

double logit(double p) { return std::log(p / (1 - p)); }

}  // namespace

TEST(Links, RoundTrip) {
  for (Param p : kAllParams) {
    const double v = p == Param::phi ? 0.37 : 4.2;
    EXPECT_NEAR(inverse_link(link_of(p), apply_link(link_of(p), v)), v, 1e-12);
  }
  EXPECT_EQ(link_of(Param::phi), Link::logit);
  EXPECT_EQ(link_of(Param::sigma), Link::log);
  EXPECT_EQ(param_from_name("gamma"), Param::gamma);
  EXPECT_THROW(param_from_name("beta"), ValidationError);
}

TEST(Formula, ParsesTermsAndSmooths) {
  const auto f = Formula::parse("~ stratum + s(x, y, 20) + s(avg_salinity, df = 5)");
  ASSERT_EQ(f.terms.size(), 3u);
  EXPECT_FALSE(f.terms[0].is_smooth());
  EXPECT_EQ(f.terms[1].label(), "s(x,y,20)");
  EXPECT_EQ(f.terms[1].key(), "s(x,y)");
  EXPECT_EQ(f.terms[2].df, 5);
  EXPECT_TRUE(Formula::parse("1").terms.empty());
  EXPECT_EQ(Formula::parse(f.to_string()), f);
  EXPECT_THROW(Formula::parse("s(x"), ValidationError);
}

TEST(ExpandParams, InterceptOnlyInverseLinks) {
  const auto frames = small_frames();
  const auto map = ParamMap::build(ModelSpec{}, frames);
  ASSERT_EQ(map.size(), 5);
  Vector theta(5);
  theta << std::log(2.0), std::log(3.0), std::log(0.1), logit(0.9), std::log(1.5);
  const auto f = expand_params(theta, map);
  for (double v : f.lambda) EXPECT_NEAR(v, 2.0, 1e-12);
  for (double v : f.sigma) EXPECT_NEAR(v, 3.0, 1e-12);
  for (double v : f.gamma) EXPECT_NEAR(v, 0.1, 1e-12);
  for (double v : f.phi) EXPECT_NEAR(v, 0.9, 1e-12);
  for (double v : f.D) EXPECT_NEAR(v, 1.5, 1e-12);
  EXPECT_EQ(f.gamma.size(), 2u);
  EXPECT_EQ(f.D.size(), 6u);

  const auto zero = expand_params(Vector::Zero(5), map);
  EXPECT_DOUBLE_EQ(zero.lambda[0], 1.0);
  EXPECT_DOUBLE_EQ(zero.phi[0], 0.5);
  EXPECT_DOUBLE_EQ(zero.D[5], 1.0);
}

TEST(ExpandParams, FactorEffectIsMultiplicative) {
  ModelSpec spec;
  spec[Param::lambda] = Formula::parse("stratum");
  const auto map = ParamMap::build(spec, small_frames());
  const auto names = map.names();
  ASSERT_EQ(map.size(), 6);
  EXPECT_EQ(names[0], "lambda.(Intercept)");
  EXPECT_EQ(names[1], "lambda.stratum[Island]");
  Vector theta = Vector::Zero(6);
  theta(0) = std::log(0.3);
  theta(1) = std::log(2.0);
  const auto f = expand_params(theta, map);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(f.lambda_at(0, k), 0.3, 1e-12);
    EXPECT_NEAR(f.lambda_at(1, k), 0.6, 1e-12);
    EXPECT_NEAR(f.lambda_at(2, k), 0.6, 1e-12);
  }
}

TEST(ParamMap, NamesSmoothsAndRoundTrip) {
  ModelSpec spec;
  spec[Param::sigma] = Formula::parse("primary");
  spec[Param::phi] = Formula::parse("s(time, 2)");
  spec[Param::D] = Formula::parse("s(x, y, 4) + s(avg_salinity, 3)");
  const auto frames = small_frames(4);
  const auto map = ParamMap::build(spec, frames);
  const auto names = map.names();
  EXPECT_EQ(map.size(), 1 + 4 + 1 + 2 + 1 + 3 + 2);
  EXPECT_EQ(names[2], "sigma.primary[2]");
  EXPECT_EQ(names.back(), "D.s(avg_salinity,3).2");
  EXPECT_EQ(spec.smoothing_parameters(), (std::vector<int>{2, 4, 3}));

  Vector theta(map.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = 0.1 * static_cast<double>(i) - 0.4;
  std::array<Vector, 5> blocks;
  for (Param p : kAllParams) blocks[static_cast<std::size_t>(p)] = map.slice(theta, p);
  EXPECT_EQ(map.assemble(blocks), theta);
  EXPECT_EQ(map[Param::D].n_units(), 6);
  EXPECT_EQ(map[Param::lambda].n_units(), 12);
  EXPECT_EQ(map[Param::gamma].n_units(), 3);
}

TEST(ParamMap, Rejections) {
  ModelSpec spec;
  spec[Param::D] = Formula::parse("depth");
  EXPECT_THROW(ParamMap::build(spec, small_frames()), ValidationError);
  spec[Param::D] = Formula::parse("s(x, y, 2)");
  EXPECT_THROW(ParamMap::build(spec, small_frames()), ValidationError);
  const auto map = ParamMap::build(ModelSpec{}, small_frames());
  EXPECT_THROW(expand_params(Vector::Zero(3), map), ValidationError);
  Vector bad = Vector::Zero(5);
  bad(4) = std::numeric_limits<double>::infinity();
  try {
    expand_params(bad, map);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("D"), std::string::npos) << e.what();
  }
}

TEST(ParamMap, SinglePrimaryHasNoDynamics) {
  const auto map = ParamMap::build(ModelSpec{}, small_frames(1));
  EXPECT_EQ(map.size(), 3);
  EXPECT_EQ(map[Param::gamma].n_coef(), 0);
  const auto f = expand_params(Vector::Zero(3), map);
  EXPECT_TRUE(f.gamma.empty());
}

TEST(Frames, DetectionAndDynamicsRows) {
  const auto frames = small_frames(3);
  EXPECT_EQ(frames.detection.rows(), 9u);
  EXPECT_EQ(frames.dynamics.rows(), 2u);
  EXPECT_EQ(frames.detection.factor("primary").codes[4], 1);
  EXPECT_EQ(frames.detection.factor("stratum").codes[3], 0);
  EXPECT_DOUBLE_EQ(frames.dynamics.numeric("time")[1], 0.5);
  EXPECT_EQ(&frames.for_param(Param::phi), &frames.dynamics);
}
