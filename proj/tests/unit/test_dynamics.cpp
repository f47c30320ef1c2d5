#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "aggnash/dynamics.hpp"
#include "aggnash/equilibrium.hpp"
#include "aggnash/scenarios.hpp"
#include "test_support.hpp"

using namespace aggnash;
using aggnash::support::Gen;

namespace {

ScenarioInstance hvac_instance(bool boxes) {
  HvacParams p;
  ScenarioInstance inst = build_hvac(p);
  if (!boxes) inst.game = inst.game.with_boxes({});
  return inst;
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

SimState equilibrium_state(const QuadraticGame& g, const GraphTopology& graph, const Vec& psi0) {
  const NESolution ne = solve_ne_unconstrained(g);
  SimState s;
  s.x = ne.x_star;
  s.sigma = ne.s_star.replicate(static_cast<Eigen::Index>(g.players()), 1);
  s.psi = psi_star(graph, g.weights(), ne.x_star, psi0);
  return s;
}

}  // namespace

TEST(Rhs, VanishesAtEquilibrium) {
  const ScenarioInstance inst = hvac_instance(false);
  const SimState eq = equilibrium_state(inst.game, inst.graph, inst.init.psi);
  const SimState d = rhs_unconstrained(inst.game, inst.graph, eq);
  EXPECT_LE(d.x.norm(), 1e-11);
  EXPECT_LE(d.sigma.norm(), 1e-11);
  EXPECT_LE(d.psi.norm(), 1e-11);
}

TEST(Rhs, ConsensusSigmaFreezesPsi) {
  const ScenarioInstance inst = hvac_instance(false);
  SimState s = inst.init;
  s.sigma = Vec::Constant(5, 3.25);
  EXPECT_EQ(rhs_unconstrained(inst.game, inst.graph, s).psi.norm(), 0.0);
}

// Hand-expanded scalar equations for each building.
TEST(Rhs, HvacMatchesComponentwiseReference) {
  const ScenarioInstance inst = hvac_instance(false);
  Gen gen(41);
  const std::vector<std::vector<int>> nbr{{1, 4}, {0, 4, 3}, {4}, {1}, {0, 1, 2}};
  const double xhat[] = {50, 55, 60, 65, 70};
  for (int trial = 0; trial < 20; ++trial) {
    SimState s;
    s.x = gen.vec(5, 30.0, 90.0);
    s.sigma = gen.vec(5, 30.0, 90.0);
    s.psi = gen.vec(5, -50.0, 50.0);
    const SimState d = rhs_unconstrained(inst.game, inst.graph, s);
    for (int i = 0; i < 5; ++i) {
      const double f = 2.04 * s.x(i) + 0.2 * s.sigma(i) - 2.0 * xhat[i] + 5.0;
      double lpsi = 0.0, lsig = 0.0;
      for (int j : nbr[static_cast<std::size_t>(i)]) {
        lpsi += s.psi(i) - s.psi(j);
        lsig += s.sigma(i) - s.sigma(j);
      }
      EXPECT_NEAR(d.x(i), -inst.game.gain(static_cast<std::size_t>(i)) * f,
                  1e-12 * (1.0 + std::abs(d.x(i))));
      EXPECT_NEAR(d.sigma(i), -s.sigma(i) + s.x(i) - lpsi, 1e-12 * (1.0 + std::abs(d.sigma(i))));
      EXPECT_NEAR(d.psi(i), lsig, 1e-12 * (1.0 + std::abs(lsig)));
    }
  }
}

TEST(Simulate, HvacConvergesToOracle) {
  const ScenarioInstance inst = hvac_instance(false);
  EXPECT_NEAR(inst.init.x(2), 59.0, 0.0);
  const Trace tr = simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init,
                            SimOptions{1e-3, 200.0, 1000});
  const NESolution ne = solve_ne_unconstrained(inst.game);
  EXPECT_LE((tr.back().x - ne.x_star).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LE((tr.back().psi - psi_star(inst.graph, inst.game.weights(), ne.x_star, inst.init.psi))
                .norm(),
            1e-3);
  EXPECT_EQ(tr.size(), 201u);
  EXPECT_EQ(tr.times.back(), 200.0);
}

TEST(Simulate, EquilibriumIsStationary) {
  const ScenarioInstance inst = hvac_instance(false);
  const SimState eq = equilibrium_state(inst.game, inst.graph, inst.init.psi);
  const Trace tr =
      simulate(inst.game, inst.graph, UnconstrainedFlow{}, eq, SimOptions{1e-3, 10.0, 100});
  for (const SimState& s : tr.states) {
    EXPECT_LE((s.x - eq.x).norm(), 1e-9);
    EXPECT_LE((s.sigma - eq.sigma).norm(), 1e-9);
    EXPECT_LE((s.psi - eq.psi).norm(), 1e-9);
  }
}

// V = ½‖(x̃, σ̃, ψ̃)‖² along an undisturbed run.
TEST(Simulate, LyapunovFunctionDecreases) {
  HvacParams p;
  p.gain_rule = GainRule::explicit_values;
  p.gains.assign(5, 1.0);
  ScenarioInstance inst = build_hvac(p);
  inst.game = inst.game.with_boxes({});
  const SimState eq = equilibrium_state(inst.game, inst.graph, inst.init.psi);
  const Trace tr =
      simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init, SimOptions{1e-3, 50.0, 10});
  double prev = kInf;
  for (const SimState& s : tr.states) {
    const double v = 0.5 * ((s.x - eq.x).squaredNorm() + (s.sigma - eq.sigma).squaredNorm() +
                            (s.psi - eq.psi).squaredNorm());
    EXPECT_LE(v, prev + 1e-10);
    prev = v;
  }
}

TEST(Simulate, ConservationOnAllVariants) {
  HvacParams p;
  p.x_lower = {45, 50, 55, 60, 65};
  p.x_upper = {52, 57, 62, 67, 72};
  const ScenarioInstance boxed = build_hvac(p);
  const ScenarioInstance free = hvac_instance(false);
  const SimOptions opt{1e-3, 20.0, 100};
  const double t_end = opt.t_end;
  const Trace a = simulate(free.game, free.graph, UnconstrainedFlow{}, free.init, opt);
  const Trace b = simulate(free.game, free.graph,
                           DisturbedFlow{hvac_disturbance(5, 2026)}, free.init, opt);
  const Trace c = simulate(boxed.game, boxed.graph, ProjectedFlow{}, boxed.init, opt);
  SimState li = boxed.init;
  li.lambda = Vec::Zero(5);
  // Budgets 𝟙ᵀ x_i = γ_i in one dimension pin x_i = γ_i.
  const Trace d = simulate(boxed.game, boxed.graph, LagrangianFlow{boxed.init.x}, li, opt);
  for (const Trace* t : {&a, &b, &c, &d}) {
    EXPECT_LE(conservation_drift(*t), 1e-8 * t_end);
  }
}

TEST(Simulate, ProjectedRunStaysFeasibleAndConverges) {
  HvacParams p;
  p.x_lower = {45, 50, 55, 60, 65};
  p.x_upper = {52, 57, 62, 67, 72};
  const ScenarioInstance inst = build_hvac(p);
  const Trace tr = simulate(inst.game, inst.graph, ProjectedFlow{}, inst.init,
                            SimOptions{1e-3, 200.0, 10});
  for (const SimState& s : tr.states) {
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_TRUE(inst.game.box(i).contains(s.x.segment(static_cast<Eigen::Index>(i), 1)));
    }
  }
  const NESolution vi = solve_vi_constrained(inst.game);
  EXPECT_LE((tr.back().x - vi.x_star).cwiseAbs().maxCoeff(), 1e-4);
  const Vec s_star = aggregate(inst.game, vi.x_star);
  EXPECT_LE((tr.back().sigma.array() - s_star(0)).abs().maxCoeff(), 1e-3);
}

TEST(Simulate, LagrangianSmallGameMeetsKkt) {
  Gen gen(42);
  const std::size_t players = 4;
  std::vector<QuadraticPlayer> ps;
  std::vector<BoxSet> boxes;
  Vec budgets(4);
  for (std::size_t i = 0; i < players; ++i) {
    ps.push_back({gen.spd(3, 0.5, 0.5), 0.1 * Mat::Identity(3, 3), gen.vec(3)});
    boxes.push_back(BoxSet::make(Vec::Zero(3), Vec::Constant(3, 2.0)));
    budgets(static_cast<Eigen::Index>(i)) = gen.uniform(1.0, 4.0);
  }
  const QuadraticGame g(ps, Vec::Ones(4), Vec::Ones(4), boxes);
  const GraphTopology graph =
      GraphTopology::build(4, std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}});
  SimState init;
  init.x = Vec::Constant(12, 0.5);
  init.sigma = gen.vec(12);
  init.psi = gen.vec(12);
  init.lambda = Vec::Zero(4);
  const Trace tr = simulate(g, graph, LagrangianFlow{budgets}, init, SimOptions{1e-2, 300.0, 100});
  EXPECT_LE(kkt_residual_pev(g, tr.back().x, *tr.back().lambda, budgets), 1e-6);
}

TEST(Simulate, RejectsBadSetups) {
  const ScenarioInstance inst = hvac_instance(true);
  SimState outside = inst.init;
  outside.x(0) = 100.0;
  EXPECT_EQ(code_of([&] {
              simulate(inst.game, inst.graph, ProjectedFlow{}, outside, SimOptions{1e-3, 1.0, 1});
            }),
            Errc::infeasible_initial_state);
  EXPECT_EQ(code_of([&] {
              simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init,
                       SimOptions{3e-3, 1.0, 1});
            }),
            Errc::invalid_argument);
  // Gains far outside the admissible range blow the flow up.
  const QuadraticGame wild = inst.game.with_boxes({}).with_gains(Vec::Constant(5, 1e6));
  EXPECT_EQ(code_of([&] {
              simulate(wild, inst.graph, UnconstrainedFlow{}, inst.init, SimOptions{1e-3, 1.0, 1});
            }),
            Errc::non_finite_state);
}

// Step halving on a smooth run: RK4 differences shrink by about 2⁴.
TEST(Simulate, FourthOrderConvergence) {
  HvacParams p;
  p.gain_rule = GainRule::explicit_values;
  p.gains.assign(5, 1.0);
  ScenarioInstance inst = build_hvac(p);
  inst.game = inst.game.with_boxes({});
  auto end_x = [&](double dt) {
    return simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init,
                    SimOptions{dt, 2.0, static_cast<std::size_t>(std::llround(2.0 / dt))})
        .back()
        .x;
  };
  const Vec x1 = end_x(0.04), x2 = end_x(0.02), x3 = end_x(0.01);
  const double ratio = (x1 - x2).norm() / (x2 - x3).norm();
  RecordProperty("ratio", std::to_string(ratio));
  EXPECT_GT(ratio, 14.0);
  EXPECT_LT(ratio, 18.0);
}

TEST(TangentProject, TrivialCases) {
  const BoxSet b = BoxSet::make(Vec::Zero(3), Vec::Constant(3, 1.0));
  Vec x(3), v(3);
  x << 0.5, 0.2, 0.9;
  v << -1.0, 2.0, 3.0;
  EXPECT_EQ(tangent_project(b, x, v), v);
  x(0) = 0.0;
  v(0) = -3.0;
  EXPECT_EQ(tangent_project(b, x, v)(0), 0.0);
  x(0) = 1.5;
  EXPECT_EQ(code_of([&] { tangent_project(b, x, v); }), Errc::point_outside_set);
}

// Oracle: (proj(x + h v) − x) / h with h = 1e-8.
TEST(TangentProjectProperty, MatchesFiniteStepLimit) {
  Gen gen(43);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(gen.index(5));
    const Vec lo = gen.vec(n, -2.0, -1.0);
    const Vec hi = gen.vec(n, 1.0, 2.0);
    const BoxSet b = BoxSet::make(lo, hi);
    Vec x(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::size_t pick = gen.index(3);
      x(j) = pick == 0 ? lo(j) : pick == 1 ? hi(j) : gen.uniform(-0.5, 0.5);
    }
    const Vec v = gen.vec(n, -5.0, 5.0);
    const double h = 1e-8;
    const Vec limit = (b.project(x + h * v) - x) / h;
    EXPECT_LE((tangent_project(b, x, v) - limit).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Disturbance, Values) {
  DisturbanceSignal sig;
  sig.coords.resize(2);
  sig.coords[0].push_back(Sinusoid{15.0, 7.0, 0.0});
  sig.coords[1].push_back(ZohUniform{20.0, 0.1, 42});
  const Vec v0 = eval_disturbance(sig, 0.0);
  EXPECT_EQ(v0(0), 0.0);
  EXPECT_GE(v0(1), -20.0);
  EXPECT_LE(v0(1), 20.0);
  EXPECT_EQ(eval_disturbance(sig, 0.0)(1), v0(1));
  // Held over the segment, redrawn on the next.
  EXPECT_EQ(eval_disturbance(sig, 0.23)(1), eval_disturbance(sig, 0.23 + 0.05)(1));
  EXPECT_NE(eval_disturbance(sig, 0.05)(1), eval_disturbance(sig, 0.15)(1));
  // Reproducible from the documented counter layout.
  const double u = counter_uniform(42, (streams::disturbance << 32) | 1u, 0);
  EXPECT_EQ(v0(1), 20.0 * (2.0 * u - 1.0));
  EXPECT_NEAR(sig.norm_bound(), std::sqrt(15.0 * 15.0 + 20.0 * 20.0), 1e-12);
}

TEST(Disturbance, HvacSignalBound) {
  const DisturbanceSignal sig = hvac_disturbance(5, 2026);
  ASSERT_EQ(sig.dim(), 10u);
  EXPECT_LE(sig.norm_bound(), 20.0 * std::sqrt(10.0) + 1e-12);
  Gen gen(44);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_LE(eval_disturbance(sig, gen.uniform(0.0, 200.0)).norm(), sig.norm_bound() + 1e-12);
  }
}
