// Five-building HVAC demand response: distributed NE seeking against the
// centralized solution, printed as a short convergence table.
#include <cstdio>

#include "aggnash/dynamics.hpp"
#include "aggnash/equilibrium.hpp"
#include "aggnash/scenarios.hpp"

int main() {
  using namespace aggnash;
  HvacParams params;
  ScenarioInstance inst = build_hvac(params);
  const QuadraticGame game = inst.game.with_boxes({});
  const NESolution ne = solve_ne_unconstrained(game);

  std::printf("gains:");
  for (Eigen::Index i = 0; i < game.gains().size(); ++i) std::printf(" %.4g", game.gains()(i));
  std::printf("\nx*   :");
  for (Eigen::Index i = 0; i < ne.x_star.size(); ++i) std::printf(" %.4f", ne.x_star(i));
  std::printf("\n\n%8s  %14s  %14s\n", "t", "max|x - x*|", "max|sigma - s*|");

  const Trace tr = simulate(game, inst.graph, UnconstrainedFlow{}, inst.init,
                            SimOptions{1e-3, 200.0, 10000});
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const SimState& s = tr.states[k];
    const double ex = (s.x - ne.x_star).cwiseAbs().maxCoeff();
    const double es = (s.sigma.array() - ne.s_star(0)).abs().maxCoeff();
    std::printf("%8.1f  %14.6e  %14.6e\n", tr.times[k], ex, es);
  }
  return 0;
}
