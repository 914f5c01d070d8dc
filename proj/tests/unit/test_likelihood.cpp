#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "openscr/likelihood.hpp"
#include "testing.hpp"

using namespace openscr;


namespace {

Fields one_trap_fields(int K, double lambda, double sigma) {
  Fields f;
  f.n_traps = 1;
  f.n_primaries = K;
  f.lambda.assign(static_cast<std::size_t>(K), lambda);
  f.sigma.assign(static_cast<std::size_t>(K), sigma);
  f.gamma.assign(static_cast<std::size_t>(K - 1), 0.5);
  f.phi.assign(static_cast<std::size_t>(K - 1), 0.8);
  f.D = {1.0};
  return f;
}

}  // namespace

TEST(EncounterRate, HalfNormal) {
  EXPECT_DOUBLE_EQ(encounter_rate(2.0, 5000.0, 0.0), 2.0);
  EXPECT_NEAR(encounter_rate(2.0, 5000.0, 5000.0), 1.2131, 1e-4);
  EXPECT_NEAR(encounter_rate(2.0, 5000.0, 2e5), 0.0, 1e-300);
  EXPECT_THROW(encounter_rate(0.0, 1.0, 1.0), ValidationError);
}

TEST(OccasionDetection, ProbabilityAndAllocation) {
  EffortArray effort(1, {1});
  effort(0, 0, 0) = 1;
  Matrix r = Matrix::Zero(1, 1);
  const auto f = one_trap_fields(1, 0.1, 1000.0);
  const auto occ = occasion_detection({f, effort, r}, 0, 0, 0);
  EXPECT_NEAR(occ.p, 0.09516, 1e-5);
  EXPECT_EQ(occ.alloc, std::vector<double>{1.0});

  EffortArray two(2, {1});
  two(0, 0, 0) = two(1, 0, 0) = 1;
  Fields f2 = f;
  f2.n_traps = 2;
  f2.lambda = {0.3, 0.3};
  f2.sigma = {500.0, 500.0};
  Matrix r2(2, 1);
  r2 << 400.0, 400.0;
  const auto sym = occasion_detection({f2, two, r2}, 0, 0, 0);
  EXPECT_DOUBLE_EQ(sym.alloc[0], 0.5);
  EXPECT_DOUBLE_EQ(sym.alloc[1], 0.5);

  EffortArray none(2, {1});
  const auto zero = occasion_detection({f2, none, r2}, 0, 0, 0);
  EXPECT_EQ(zero.p, 0.0);
  EXPECT_EQ(zero.alloc, (std::vector<double>{0.0, 0.0}));
}

TEST(EntryProbs, Examples) {
  const double ln2 = std::log(2.0);
  auto b2 = entry_probs(std::vector<double>{ln2}, std::vector<double>{1.0});
  EXPECT_NEAR(b2[0], 0.5, 1e-15);
  EXPECT_NEAR(b2[1], 0.5, 1e-15);
  auto b3 = entry_probs(std::vector<double>{ln2 / 2, ln2}, std::vector<double>{2.0, 1.0});
  EXPECT_NEAR(b3[0], 0.25, 1e-15);
  EXPECT_NEAR(b3[1], 0.375, 1e-15);
  EXPECT_NEAR(b3[2], 0.375, 1e-15);
  const auto b0 = entry_probs(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 3});
  EXPECT_EQ(b0, (std::vector<double>{1, 0, 0, 0}));
  EXPECT_THROW(entry_probs(std::vector<double>{-1.0}, std::vector<double>{1.0}), ValidationError);
}

TEST(Transitions, ConditionalEntryAndRows) {
  const std::vector<double> beta{0.5, 0.3, 0.2};
  const std::vector<double> surv{0.7, 1.0};
  const auto t = transitions_from(beta, surv);
  EXPECT_NEAR(t.entry_conditional[0], 0.6, 1e-15);
  EXPECT_NEAR(t.entry_conditional[1], 1.0, 1e-15);
  EXPECT_EQ(t.initial, (std::array<double, 3>{0.5, 0.5, 0.0}));
  for (const auto& m : t.steps)
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(m.row(r).sum(), 1.0, 1e-12);
  EXPECT_EQ(t.steps[1](1, 1), 1.0);
  EXPECT_EQ(t.steps[1](1, 2), 0.0);

  const auto all_first = transitions_from(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5});
  EXPECT_EQ(all_first.initial[1], 1.0);
}

TEST(IndividualProbability, NeverSeenTwoPrimaries) {
  // beta = (0.5, 0.5), certain survival, p = 0.5 per primary at one trap.
  EffortArray effort(1, {1, 1});
  effort(0, 0, 0) = effort(0, 1, 0) = 1;
  auto f = one_trap_fields(2, std::log(2.0), 1000.0);
  Matrix r = Matrix::Zero(1, 1);
  CaptureHistories h({1, 1});
  h.add_individual("never");
  const auto t = transitions_from(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0});
  EXPECT_NEAR(individual_probability(h, 0, 0, {f, effort, r}, t), 0.375, 1e-15);

  // A detection in primary 1 only admits entry at 1.
  const int i = h.add_individual("first");
  h(i, 0, 0) = 0;
  EXPECT_NEAR(individual_probability(h, i, 0, {f, effort, r}, t), 0.5 * 0.5 * 0.5, 1e-15);

  // No detection is possible: nonempty histories have probability zero.
  const EffortArray idle(1, {1, 1});
  EXPECT_EQ(individual_probability(h, i, 0, {f, idle, r}, t), 0.0);
}

TEST(PointProcess, HandExample) {
  const std::vector<double> aD{2.0}, p_dot{0.375};
  const double ll = point_process_loglik(aD, p_dot, {{0.2}});
  EXPECT_NEAR(ll, -0.75 + std::log(0.4), 1e-12);
  EXPECT_NEAR(ll, -1.6663, 1e-4);
  EXPECT_NEAR(point_process_loglik(aD, p_dot, {}), -0.75, 1e-15);
}

TEST(DerivedDensity, RecursionAndScaling) {
  // beta = (0.5, 0.5) from gamma delta = ln 2; phi^delta = 0.8.
  const StateModel s{{std::log(2.0)}, {0.8}, {1.0}};
  const std::vector<double> D{1.0}, area{1.0};
  const auto d = derived_density(s, D, area);
  EXPECT_NEAR(d.density[0][0], 0.5, 1e-15);
  EXPECT_NEAR(d.density[1][0], 0.9, 1e-15);

  const StateModel keep{{0.3, 0.2}, {1.0, 1.0}, {1.0, 2.0}};
  const std::vector<double> D2{2.0, 3.0}, a2{1.5, 0.5};
  const auto c = derived_density(keep, D2, a2, 0.8);
  EXPECT_NEAR(c.abundance.back(), c.superpopulation, 1e-12 * c.superpopulation);
  EXPECT_NEAR(c.superpopulation, 4.5 / 0.8, 1e-12);

  // Marked N_k = 1680 scaled by 1 / 0.8.
  const StateModel closed{{}, {}, {}};
  const std::vector<double> Dm{1680.0}, am{1.0};
  EXPECT_NEAR(derived_density(closed, Dm, am, 0.8).abundance[0], 2100.0, 1e-9);
  EXPECT_THROW(derived_density(closed, Dm, am, 0.0), ValidationError);
}

TEST(TotalLoglik, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const auto inst = testkit::random_instance(rng);
    const double ref = testkit::brute_force_loglik(inst);
    EXPECT_NEAR(total_loglik(inst.fields, inst.data), ref, 1e-9 * std::abs(ref)) << rep;
  }
}

TEST(TotalLoglik, ClosedPopulationReduction) {
  std::mt19937_64 rng(12);
  testkit::InstanceLimits one{1, 4, 4, 3, 5};
  for (int rep = 0; rep < 10; ++rep) {
    const auto inst = testkit::random_instance(rng, one);
    // Closed Poisson SCR: -sum aD (1 - prod_l exp(-E_l)) + sum_i log sum_m aD prod_l Pr(omega_il).
    double ll = 0.0;
    std::vector<double> aD;
    for (int m = 0; m < inst.data.n_mesh; ++m) {
      aD.push_back(inst.data.area[static_cast<std::size_t>(m)] * inst.fields.D[static_cast<std::size_t>(m)]);
      double miss = 1.0;
      for (int l = 0; l < inst.data.effort.n_secondaries(0); ++l)
        miss *= 1.0 - occasion_detection({inst.fields, inst.data.effort, inst.distances}, m, 0, l).p;
      ll -= aD.back() * (1.0 - miss);
    }
    for (int i = 0; i < inst.histories.n_individuals(); ++i) {
      double s = 0.0;
      for (int m = 0; m < inst.data.n_mesh; ++m) {
        double pr = 1.0;
        for (int l = 0; l < inst.data.effort.n_secondaries(0); ++l) {
          const auto occ = occasion_detection({inst.fields, inst.data.effort, inst.distances}, m, 0, l);
          const int j = inst.histories(i, 0, l);
          pr *= j == CaptureHistories::kNone ? 1.0 - occ.p : occ.p * occ.alloc[static_cast<std::size_t>(j)];
        }
        s += aD[static_cast<std::size_t>(m)] * pr;
      }
      ll += std::log(s);
    }
    EXPECT_NEAR(total_loglik(inst.fields, inst.data), ll, 1e-10 * std::abs(ll));
  }
}

TEST(TotalLoglik, DetectabilityComplementsNeverSeen) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const auto inst = testkit::random_instance(rng);
    const auto surface = detectability(inst.fields, inst.data);
    CaptureHistories never(inst.data.layout());
    never.add_individual("x");
    const auto t = state_machine({inst.fields.gamma, inst.fields.phi, inst.data.delta});
    for (int m = 0; m < inst.data.n_mesh; ++m) {
      const double p0 = individual_probability(never, 0, m, {inst.fields, inst.data.effort, inst.distances}, t);
      EXPECT_NEAR(surface.p_dot[static_cast<std::size_t>(m)] + p0, 1.0, 1e-12);
      EXPECT_NEAR(surface.p_dot[static_cast<std::size_t>(m)], testkit::brute_force_p_dot(inst, m), 1e-12);
    }
  }
}

TEST(TotalLoglik, Invariances) {
  std::mt19937_64 rng(14);
  const auto inst = testkit::random_instance(rng, {3, 2, 4, 3, 5});
  const double ll = total_loglik(inst.fields, inst.data);

  // Doubling a while halving D.
  auto doubled = inst.data;
  auto halved = inst.fields;
  for (auto& a : doubled.area) a *= 2.0;
  for (auto& d : halved.D) d *= 0.5;
  EXPECT_NEAR(total_loglik(halved, doubled), ll, 1e-12 * std::abs(ll));

  // Reversing mesh points and individuals.
  const int M = inst.data.n_mesh;
  Matrix dist(inst.distances.rows(), M);
  std::vector<double> area(static_cast<std::size_t>(M));
  Fields f = inst.fields;
  for (int m = 0; m < M; ++m) {
    dist.col(m) = inst.distances.col(M - 1 - m);
    area[static_cast<std::size_t>(m)] = inst.data.area[static_cast<std::size_t>(M - 1 - m)];
    f.D[static_cast<std::size_t>(m)] = inst.fields.D[static_cast<std::size_t>(M - 1 - m)];
  }
  CaptureHistories rev(inst.histories.layout());
  for (int i = inst.histories.n_individuals(); i-- > 0;) {
    const int r = rev.add_individual(inst.histories.id(i));
    for (int s = 0; s < inst.histories.total_secondaries(); ++s) {
      int k = 0, l = s;
      while (l >= inst.histories.n_secondaries(k)) l -= inst.histories.n_secondaries(k++);
      rev(r, k, l) = inst.histories.at(i, s);
    }
  }
  const auto data = make_scr_data(dist, area, inst.data.effort, inst.data.delta, rev);
  EXPECT_NEAR(total_loglik(f, data), ll, 1e-12 * std::abs(ll));

  // No individuals.
  const auto empty = make_scr_data(inst.distances, inst.data.area, inst.data.effort, inst.data.delta,
                                   CaptureHistories(inst.histories.layout()));
  const auto surface = detectability(inst.fields, empty);
  double expected = 0.0;
  for (int m = 0; m < M; ++m)
    expected -= inst.data.area[static_cast<std::size_t>(m)] * inst.fields.D[static_cast<std::size_t>(m)] *
                surface.p_dot[static_cast<std::size_t>(m)];
  EXPECT_NEAR(total_loglik(inst.fields, empty), expected, 1e-14);
}

TEST(ScrData, CollapsesPatternsAndValidates) {
  EffortArray effort(2, {2});
  effort(0, 0, 0) = 1;
  effort(1, 0, 1) = 1;
  CaptureHistories h({2});
  for (const char* id : {"a", "b", "c"}) h.add_individual(id);
  h(0, 0, 0) = 0;
  h(1, 0, 0) = 0;
  h(2, 0, 1) = 1;
  const Matrix r = Matrix::Constant(2, 3, 100.0);
  const auto data = make_scr_data(r, {1, 1, 1}, effort, {}, h);
  ASSERT_EQ(data.patterns.size(), 2u);
  EXPECT_EQ(data.patterns[0].count, 2);
  EXPECT_EQ(data.patterns[0].first_id, "a");
  EXPECT_EQ(data.n_individuals, 3);

  auto bad = h;
  bad(2, 0, 0) = 1;
  try {
    make_scr_data(r, {1, 1, 1}, effort, {}, bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos) << e.what();
  }
  CaptureHistories ghost({2});
  ghost.add_individual("ghost");
  EXPECT_THROW(make_scr_data(r, {1, 1, 1}, effort, {}, ghost), ValidationError);
  EXPECT_THROW(make_scr_data(r, {1, 1}, effort, {}, h), ValidationError);
}

TEST(TotalLoglik, ImpossibleHistoryNamesIndividual) {
  EffortArray effort(1, {1});
  effort(0, 0, 0) = 1;
  CaptureHistories h({1});
  h.add_individual("far");
  h(0, 0, 0) = 0;
  const Matrix r = Matrix::Constant(1, 1, 1e7);
  const auto data = make_scr_data(r, {1.0}, effort, {}, h);
  auto f = one_trap_fields(1, 0.1, 100.0);
  // Tiny but positive probabilities stay finite in the log domain.
  EXPECT_LT(total_loglik(f, data), -1e8);
  f.D = {0.0};
  try {
    total_loglik(f, data);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("'far'"), std::string::npos) << e.what();
  }
}

TEST(LogLikelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  const auto inst = testkit::random_instance(rng, {3, 2, 4, 3, 5});
  CovariateTable traps(static_cast<std::size_t>(inst.data.n_traps));
  CovariateTable mesh(static_cast<std::size_t>(inst.data.n_mesh));
  std::vector<double> mid{0.0};
  for (double d : inst.data.delta) mid.push_back(mid.back() + d);
  const auto frames = make_frames(traps, mid, mesh);
  ModelSpec spec;
  if (inst.data.n_primaries > 1) spec[Param::sigma] = Formula::parse("primary");
  const LogLikelihood ll(inst.data, ParamMap::build(spec, frames));
  Vector theta(ll.dim());
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index c = 0; c < theta.size(); ++c) theta(c) = n(rng);
  theta(0) += std::log(0.5);
  theta(1) += std::log(1000.0);
  Vector g;
  const double v = ll.value_and_gradient(theta, g);
  EXPECT_DOUBLE_EQ(v, ll.value(theta));
  for (Eigen::Index c = 0; c < theta.size(); ++c) {
    const double h = 1e-5;
    Vector a = theta, b = theta;
    a(c) += h;
    b(c) -= h;
    const double fd = (ll.value(a) - ll.value(b)) / (2 * h);
    EXPECT_NEAR(fd, g(c), 1e-5 * std::max(1.0, std::abs(g(c)))) << c;
  }
}
