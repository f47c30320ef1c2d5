#include <gtest/gtest.h>

#include <vector>

#include "aggnash/dynamics.hpp"
#include "aggnash/equilibrium.hpp"
#include "aggnash/privacy.hpp"
#include "aggnash/scenarios.hpp"
#include "test_support.hpp"

using namespace aggnash;
using aggnash::support::Gen;

namespace {

ScenarioInstance hvac() {
  ScenarioInstance inst = build_hvac(HvacParams{});
  inst.game = inst.game.with_boxes({});
  return inst;
}

ReplicaTransform transform(std::vector<double> r, std::vector<double> s) {
  return {Eigen::Map<Vec>(r.data(), static_cast<Eigen::Index>(r.size())),
          Eigen::Map<Vec>(s.data(), static_cast<Eigen::Index>(s.size()))};
}

struct Pair {
  Trace original;
  Trace replica;
};

Pair run_pair(const ScenarioInstance& inst, const ReplicaTransform& tr, double t_end = 20.0) {
  const ReplicaGame rep = build_replica(inst.game, inst.init.x, tr);
  SimState init_r = inst.init;
  init_r.x = rep.x0;
  const SimOptions opt{1e-3, t_end, 100};
  return {simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init, opt),
          simulate(rep.game, inst.graph, UnconstrainedFlow{}, init_r, opt)};
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return Errc::config_error;
}

}  // namespace

TEST(Replica, DoubledActionScale) {
  const QuadraticGame g = hvac().game;
  const Vec x0 = Vec::LinSpaced(5, 40.0, 60.0);
  const ReplicaGame rep = build_replica(g, x0, transform({2, 2, 2, 2, 2}, {1, 1, 1, 1, 1}));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(rep.game.player(i).Q(0, 0), 1.0);
    EXPECT_EQ(rep.game.player(i).D(0, 0), 0.4);
    EXPECT_EQ(rep.game.player(i).d(0), 2.0 * g.player(i).d(0));
    EXPECT_EQ(rep.game.weight(i), 0.5);
    EXPECT_EQ(rep.game.gain(i), g.gain(i));
  }
  EXPECT_EQ(rep.x0, 2.0 * x0);
}

TEST(Replica, TripledCostScale) {
  const QuadraticGame g = hvac().game;
  const ReplicaGame rep =
      build_replica(g, Vec::Zero(5), transform({1, 1, 1, 1, 1}, {3, 3, 3, 3, 3}));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(rep.game.player(i).Q(0, 0), 3.0);
    EXPECT_NEAR(rep.game.player(i).D(0, 0), 0.6, 1e-15);
    EXPECT_EQ(rep.game.player(i).d(0), 3.0 * g.player(i).d(0));
    EXPECT_EQ(rep.game.weight(i), 1.0);
    EXPECT_NEAR(rep.game.gain(i), g.gain(i) / 3.0, 1e-15);
    EXPECT_NEAR(rep.game.A(i)(0, 0), 3.0 * g.A(i)(0, 0), 1e-13);
  }
}

TEST(Replica, RejectsNonPositiveScaling) {
  const QuadraticGame g = hvac().game;
  EXPECT_EQ(code_of([&] { build_replica(g, Vec::Zero(5), transform({1, 0, 1, 1, 1}, {1, 1, 1, 1, 1})); }),
            Errc::non_positive_scaling);
  EXPECT_EQ(code_of([&] { build_replica(g, Vec::Zero(5), transform({1, 1, 1, 1, 1}, {1, -2, 1, 1, 1})); }),
            Errc::non_positive_scaling);
}

TEST(Indistinguishability, SinglePlayerRescaled) {
  const ScenarioInstance inst = hvac();
  const ReplicaTransform tr = transform({2, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
  const Pair p = run_pair(inst, tr);
  const IndistinguishabilityReport rep =
      verify_indistinguishability(p.original, p.replica, rescaled_players(tr));
  EXPECT_EQ(rep.verdict, PrivacyVerdict::indistinguishable);
  EXPECT_LE(rep.max_sigma_gap, 1e-9);
  EXPECT_LE(rep.max_psi_gap, 1e-9);
  ASSERT_EQ(rep.witnesses.size(), 1u);
  EXPECT_EQ(rep.witnesses[0], 0u);
  EXPECT_GT(rep.min_x_gap(0), 1.0);
  for (Eigen::Index i = 1; i < 5; ++i) EXPECT_LE(rep.min_x_gap(i), 1e-9);
}

TEST(Indistinguishability, IdentityTransformHasNoWitness) {
  const ScenarioInstance inst = hvac();
  const ReplicaTransform tr = ReplicaTransform::identity(5);
  const Pair p = run_pair(inst, tr, 2.0);
  const IndistinguishabilityReport rep =
      verify_indistinguishability(p.original, p.replica, rescaled_players(tr));
  EXPECT_EQ(rep.verdict, PrivacyVerdict::no_witness);
  EXPECT_EQ(rep.max_sigma_gap, 0.0);
  EXPECT_EQ(rep.min_x_gap.maxCoeff(), 0.0);
}

// A player parked at the origin looks the same under any r.
TEST(Indistinguishability, ZeroTrajectoryHasNoWitness) {
  std::vector<QuadraticPlayer> ps(2, {Mat::Identity(1, 1), Mat::Zero(1, 1), Vec::Zero(1)});
  ScenarioInstance inst{QuadraticGame(ps, Vec::Ones(2), Vec::Ones(2)),
                        GraphTopology::build(2, std::vector<Edge>{{0, 1}}),
                        SimState{Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), std::nullopt, 0.0},
                        {},
                        Vec()};
  const ReplicaTransform tr = transform({3, 1}, {1, 1});
  const Pair p = run_pair(inst, tr, 1.0);
  const IndistinguishabilityReport rep =
      verify_indistinguishability(p.original, p.replica, rescaled_players(tr));
  EXPECT_EQ(rep.verdict, PrivacyVerdict::no_witness);
  EXPECT_TRUE(rep.witnesses.empty());
}

TEST(Indistinguishability, PublicMismatchIsDistinguishable) {
  const ScenarioInstance inst = hvac();
  const ReplicaTransform tr = transform({2, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
  Pair p = run_pair(inst, tr, 2.0);
  p.replica.states.back().sigma(3) += 1e-6;
  EXPECT_EQ(verify_indistinguishability(p.original, p.replica, rescaled_players(tr)).verdict,
            PrivacyVerdict::distinguishable);
}

TEST(Indistinguishability, GridMismatch) {
  const ScenarioInstance inst = hvac();
  const Trace a = simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init,
                           SimOptions{1e-3, 1.0, 100});
  const Trace b = simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init,
                           SimOptions{1e-3, 1.0, 50});
  EXPECT_EQ(code_of([&] { verify_indistinguishability(a, b, {0}); }), Errc::grid_mismatch);
}

TEST(PrivacyProperty, ReplicaIdentitiesAndTraces) {
  Gen gen(51);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t players = 2 + gen.index(4);
    const std::size_t n = 1 + gen.index(2);
    const QuadraticGame g = support::random_game(gen, players, n);
    const auto np = static_cast<Eigen::Index>(players);
    const ReplicaTransform tr{gen.vec(np, 0.5, 2.0), gen.vec(np, 0.8, 1.25)};
    const Vec x0 = gen.vec(np * static_cast<Eigen::Index>(n), -2.0, 2.0);
    const ReplicaGame rep = build_replica(g, x0, tr);
    EXPECT_LE(replica_identity_residuals(g, rep, tr).max(), 1e-12);

    const GraphTopology graph = support::random_graph(gen, players);
    const Vec sigma0 = gen.vec(x0.size());
    const Vec psi0 = gen.vec(x0.size());
    EXPECT_LE(observability_mismatch(g, rep, graph, sigma0, psi0, x0, 3), 1e-10);

    // The NE maps to r ⊙ x*.
    const Vec x_star = solve_ne_unconstrained(g).x_star;
    const Vec x_rep = solve_ne_unconstrained(rep.game).x_star;
    EXPECT_LE((x_rep - scale_blocks(x_star, tr.r, n)).norm(), 1e-9 * (1.0 + x_star.norm()));
  }
}

TEST(UnweightedRescaling, RecoversEquilibrium) {
  const QuadraticGame g = hvac().game;
  Vec p = Vec::Ones(5);
  p(0) = 4.0;
  const UnweightedRescaling u = unweighted_rescaling(g, p);
  EXPECT_EQ(u.game.weight(0), 4.0);
  EXPECT_EQ(u.game.weight(1), 1.0);
  const Vec x_star = solve_ne_unconstrained(g).x_star;
  const Vec x_hat = solve_ne_unconstrained(u.game).x_star;
  EXPECT_LE((u.recover(x_hat) - x_star).norm(), 1e-10);
  EXPECT_NEAR(x_hat(0), x_star(0) / 4.0, 1e-10);
  EXPECT_LE((u.to_hat(x_star) - x_hat).norm(), 1e-10);
}

TEST(UnweightedRescaling, WeightsNotUnit) {
  std::vector<QuadraticPlayer> ps(2, {Mat::Identity(1, 1), Mat::Zero(1, 1), Vec::Zero(1)});
  Vec h(2);
  h << 1.0, 2.0;
  const QuadraticGame g(ps, h, Vec::Ones(2));
  EXPECT_EQ(code_of([&] { unweighted_rescaling(g, Vec::Ones(2)); }), Errc::weights_not_unit);
}
