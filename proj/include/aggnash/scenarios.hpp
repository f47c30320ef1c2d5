#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aggnash/dynamics.hpp"
#include "aggnash/error.hpp"
#include "aggnash/game.hpp"
#include "aggnash/graph.hpp"
#include "aggnash/linalg.hpp"
#include "aggnash/rng.hpp"

namespace aggnash {

/// How a scenario picks k_i inside its admissible interval.
enum class GainRule { log_uniform, log_midpoint, formula, explicit_values };

inline const char* to_string(GainRule r) noexcept {
  switch (r) {
    case GainRule::log_uniform: return "log_uniform";
    case GainRule::log_midpoint: return "log_midpoint";
    case GainRule::formula: return "formula";
    case GainRule::explicit_values: return "explicit";
  }
  return "unknown";
}

/// Scenario output shared by both case studies.
struct ScenarioInstance {
  QuadraticGame game;
  GraphTopology graph;
  SimState init;
  /// Per-player interval the gains were drawn from.
  std::vector<GainInterval> gain_intervals;
  /// Budgets 𝟙ᵀ x_i = γ_i (PEV only).
  Vec budgets;
};

/// Initial σ(0), ψ(0) (and λ(0) when `with_lambda`) uniform in [−range, range].
inline void randomize_estimates(SimState& s, std::size_t players, std::uint64_t seed,
                                double range, bool with_lambda) {
  RandomStream rng(seed, streams::initial);
  s.sigma.resize(s.x.size());
  s.psi.resize(s.x.size());
  for (Eigen::Index j = 0; j < s.sigma.size(); ++j) s.sigma(j) = rng.uniform(-range, range);
  for (Eigen::Index j = 0; j < s.psi.size(); ++j) s.psi(j) = rng.uniform(-range, range);
  if (with_lambda) {
    Vec lambda(static_cast<Eigen::Index>(players));
    for (Eigen::Index j = 0; j < lambda.size(); ++j) lambda(j) = rng.uniform(-range, range);
    s.lambda = lambda;
  }
  s.t = 0.0;
}

// ---------------------------------------------------------------------------
// HVAC demand response

struct HvacParams {
  double theta_gamma2 = 1.0;
  double a = 0.04;
  double b = 5.0;
  // The fifth target continues the 5 kWh spacing of the first four.
  std::vector<double> x_hat{50, 55, 60, 65, 70};
  std::vector<double> x_upper{60, 66, 72, 78, 84};
  std::vector<double> x_lower{40, 44, 46, 52, 56};
  std::vector<std::pair<long long, long long>> edges{{1, 2}, {1, 5}, {2, 5}, {2, 4}, {3, 5}};
  GainRule gain_rule = GainRule::log_uniform;
  std::vector<double> gains;  ///< used with GainRule::explicit_values
  std::uint64_t seed = 2026;
  double init_range = 1.0;

  std::size_t players() const noexcept { return x_hat.size(); }
};

/// f_i(x_i, σ_i) = (2θγ² + a) x_i + aN σ_i − 2θγ² x̂_i + b, written as
/// Q_i = θγ², D_i = aN, d_i = b − 2θγ² x̂_i with unit weights.
inline ScenarioInstance build_hvac(const HvacParams& p) {
  const std::size_t big_n = p.players();
  if (big_n == 0 || p.x_upper.size() != big_n || p.x_lower.size() != big_n) {
    throw Error(Errc::config_error, "hvac: x_hat, x_lower and x_upper need N entries");
  }
  if (!(p.theta_gamma2 > 0.0) || !(p.a >= 0.0)) {
    throw Error(Errc::config_error, "hvac: need theta_gamma2 > 0 and a >= 0");
  }
  const double nn = static_cast<double>(big_n);
  std::vector<QuadraticPlayer> players;
  std::vector<BoxSet> boxes;
  for (std::size_t i = 0; i < big_n; ++i) {
    if (!(p.x_lower[i] < p.x_hat[i] && p.x_hat[i] < p.x_upper[i])) {
      throw Error(Errc::config_error,
                  "hvac: need x_lower < x_hat < x_upper for player " + std::to_string(i + 1));
    }
    players.push_back({Mat::Constant(1, 1, p.theta_gamma2), Mat::Constant(1, 1, p.a * nn),
                       Vec::Constant(1, p.b - 2.0 * p.theta_gamma2 * p.x_hat[i])});
    boxes.push_back(BoxSet::make(Vec::Constant(1, p.x_lower[i]), Vec::Constant(1, p.x_upper[i])));
  }
  const GainInterval iv = relaxed_gain_interval_affine(2.0 * p.theta_gamma2 + p.a, p.a, big_n);
  Vec k(static_cast<Eigen::Index>(big_n));
  RandomStream rng(p.seed, streams::gains);
  for (std::size_t i = 0; i < big_n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    switch (p.gain_rule) {
      case GainRule::log_uniform: k(ii) = rng.log_uniform(iv.lo, iv.hi); break;
      case GainRule::log_midpoint: k(ii) = iv.log_midpoint(); break;
      case GainRule::formula: k(ii) = iv.midpoint(); break;
      case GainRule::explicit_values:
        if (p.gains.size() != big_n) {
          throw Error(Errc::config_error, "hvac: explicit gains need N entries");
        }
        k(ii) = p.gains[i];
        break;
    }
  }
  QuadraticGame game(std::move(players), Vec::Ones(static_cast<Eigen::Index>(big_n)), k,
                     std::move(boxes));
  GraphTopology graph = GraphTopology::build(big_n, edges_from_one_based(p.edges));

  SimState init;
  init.x.resize(static_cast<Eigen::Index>(big_n));
  for (std::size_t i = 0; i < big_n; ++i) {
    init.x(static_cast<Eigen::Index>(i)) = 0.5 * (p.x_lower[i] + p.x_upper[i]);
  }
  randomize_estimates(init, big_n, p.seed, p.init_range, false);
  return {std::move(game), std::move(graph), std::move(init),
          std::vector<GainInterval>(big_n, iv), Vec()};
}

/// Disturbance of the HVAC experiment: zero-order-hold uniform noise on every
/// action coordinate and one sinusoid per estimate coordinate, with amplitude
/// and angular frequency drawn uniformly from the given ranges.
struct HvacDisturbanceParams {
  double zoh_amplitude = 20.0;
  double zoh_hold = 0.1;
  std::array<double, 2> sin_amplitude{10.0, 20.0};
  std::array<double, 2> sin_frequency{5.0, 25.0};
};

inline DisturbanceSignal hvac_disturbance(std::size_t len, std::uint64_t seed,
                                          const HvacDisturbanceParams& p = {}) {
  DisturbanceSignal sig;
  sig.coords.resize(2 * len);
  RandomStream rng(seed, streams::disturbance);
  for (std::size_t j = 0; j < len; ++j) {
    sig.coords[j].push_back(ZohUniform{p.zoh_amplitude, p.zoh_hold, seed});
  }
  for (std::size_t j = 0; j < len; ++j) {
    const double amp = rng.uniform(p.sin_amplitude[0], p.sin_amplitude[1]);
    const double omega = rng.uniform(p.sin_frequency[0], p.sin_frequency[1]);
    sig.coords[len + j].push_back(Sinusoid{amp, omega, 0.0});
  }
  return sig;
}

// ---------------------------------------------------------------------------
// PEV charging coordination

/// Synthetic non-PEV demand (kWh per hour, midnight to midnight) with a
/// morning and an evening peak and a night valley.
inline std::vector<double> default_demand_profile() {
  return {52, 46, 42, 40, 40, 43, 55, 72, 86, 88, 82, 76,
          72, 70, 71, 75, 84, 98, 108, 110, 102, 88, 72, 60};
}

struct PevParams {
  std::size_t players = 20;
  double a = 3.8e-3;
  double b = 0.06;
  double q_nominal = 0.004;
  double q_spread = 0.001;
  double c_nominal = 0.075;
  double c_spread = 0.01;
  double capacity_nominal = 30.0;
  double capacity_spread = 5.0;
  double soc0_mean = 0.5;
  double soc0_variance = 0.1;
  double soc0_max = 0.9;
  double soc_final = 0.95;
  double x_max_nominal = 10.0;
  double x_max_spread = 2.0;
  std::vector<double> demand = default_demand_profile();
  double edge_probability = 0.2;
  GainRule gain_rule = GainRule::formula;
  std::uint64_t seed = 2026;
  double init_range = 1.0;
};

/// Draws of one PEV owner.
struct PevPlayerDraw {
  double q = 0.0;
  double c = 0.0;
  double capacity = 0.0;
  double soc0 = 0.0;
  double x_max = 0.0;
  double budget = 0.0;
};

/// k_i = (2(2q_i + a) + aN) / (aN)².
inline double pev_gain(double q, double a, std::size_t players) {
  const double an = a * static_cast<double>(players);
  return (2.0 * (2.0 * q + a) + an) / (an * an);
}

inline ScenarioInstance build_pev(const PevParams& p, std::vector<PevPlayerDraw>* draws = nullptr) {
  const std::size_t big_n = p.players;
  const std::size_t n = p.demand.size();
  if (big_n == 0 || n == 0) throw Error(Errc::config_error, "pev: need N >= 1 and a demand profile");
  if (!(p.a > 0.0) || !(p.b >= 0.0)) throw Error(Errc::config_error, "pev: need a > 0, b >= 0");
  const auto nn = static_cast<Eigen::Index>(n);
  Vec demand(nn);
  for (std::size_t t = 0; t < n; ++t) demand(static_cast<Eigen::Index>(t)) = p.demand[t];

  RandomStream rng(p.seed, streams::scenario);
  std::vector<QuadraticPlayer> players;
  std::vector<BoxSet> boxes;
  std::vector<GainInterval> intervals;
  std::vector<PevPlayerDraw> local;
  Vec budgets(static_cast<Eigen::Index>(big_n));
  Vec k(static_cast<Eigen::Index>(big_n));
  const double sd = std::sqrt(p.soc0_variance);
  for (std::size_t i = 0; i < big_n; ++i) {
    PevPlayerDraw dr;
    dr.q = p.q_nominal + rng.uniform(-p.q_spread, p.q_spread);
    dr.c = p.c_nominal + rng.uniform(-p.c_spread, p.c_spread);
    bool feasible = false;
    for (int attempt = 0; attempt < 100 && !feasible; ++attempt) {
      dr.capacity = p.capacity_nominal + rng.uniform(-p.capacity_spread, p.capacity_spread);
      dr.soc0 = std::clamp(rng.normal(p.soc0_mean, sd), 0.0, p.soc0_max);
      dr.x_max = p.x_max_nominal + rng.uniform(-p.x_max_spread, p.x_max_spread);
      dr.budget = dr.capacity * (p.soc_final - dr.soc0);
      feasible = dr.q > 0.0 && dr.c > 0.0 && dr.capacity > 0.0 && dr.x_max > 0.0 &&
                 dr.budget > 0.0 && static_cast<double>(n) * dr.x_max >= dr.budget;
    }
    if (!feasible) {
      throw Error(Errc::infeasible_player,
                  "pev player " + std::to_string(i + 1) + ": no feasible draw in 100 attempts");
    }
    const double an = p.a * static_cast<double>(big_n);
    players.push_back({dr.q * Mat::Identity(nn, nn), an * Mat::Identity(nn, nn),
                       p.a * demand + Vec::Constant(nn, p.b + dr.c)});
    boxes.push_back(BoxSet::make(Vec::Zero(nn), Vec::Constant(nn, dr.x_max)));
    const GainInterval iv = relaxed_gain_interval_affine(2.0 * dr.q + p.a, p.a, big_n);
    intervals.push_back(iv);
    const auto ii = static_cast<Eigen::Index>(i);
    budgets(ii) = dr.budget;
    switch (p.gain_rule) {
      case GainRule::formula: k(ii) = pev_gain(dr.q, p.a, big_n); break;
      case GainRule::log_midpoint: k(ii) = iv.log_midpoint(); break;
      case GainRule::log_uniform: k(ii) = 1.0; break;  // drawn below from its own stream
      case GainRule::explicit_values:
        throw Error(Errc::config_error, "pev: explicit gains are not supported");
    }
    local.push_back(dr);
  }
  if (p.gain_rule == GainRule::log_uniform) {
    RandomStream grng(p.seed, streams::gains);
    for (std::size_t i = 0; i < big_n; ++i) {
      k(static_cast<Eigen::Index>(i)) = grng.log_uniform(intervals[i].lo, intervals[i].hi);
    }
  }
  QuadraticGame game(std::move(players), Vec::Ones(static_cast<Eigen::Index>(big_n)), k,
                     std::move(boxes));
  RandomStream graph_rng(p.seed, streams::graph);
  GraphTopology graph = random_connected_graph(big_n, p.edge_probability, graph_rng);

  SimState init;
  init.x.resize(static_cast<Eigen::Index>(big_n) * nn);
  for (std::size_t i = 0; i < big_n; ++i) {
    init.x.segment(static_cast<Eigen::Index>(i) * nn, nn)
        .setConstant(budgets(static_cast<Eigen::Index>(i)) / static_cast<double>(n));
  }
  randomize_estimates(init, big_n, p.seed, p.init_range, true);
  if (draws != nullptr) *draws = std::move(local);
  return {std::move(game), std::move(graph), std::move(init), std::move(intervals),
          std::move(budgets)};
}

struct ValleyMetrics {
  double corr = 0.0;           ///< Pearson correlation of d_t and Σ_i x_iᵗ
  double peak_increase = 0.0;  ///< max_t(d_t + Σ_i x_iᵗ) − max_t d_t
};

/// Correlation is reported as 0 when either profile is constant.
inline ValleyMetrics valley_metrics(const Vec& x, std::size_t players, const std::vector<double>& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  if (x.size() != n * static_cast<Eigen::Index>(players)) {
    throw Error(Errc::dimension_mismatch, "valley_metrics: x must have length N*n");
  }
  Vec dem(n);
  for (Eigen::Index t = 0; t < n; ++t) dem(t) = d[static_cast<std::size_t>(t)];
  Vec total = Vec::Zero(n);
  for (std::size_t i = 0; i < players; ++i) total += x.segment(static_cast<Eigen::Index>(i) * n, n);
  ValleyMetrics m;
  m.peak_increase = (dem + total).maxCoeff() - dem.maxCoeff();
  const Vec dc = dem.array() - dem.mean();
  const Vec tc = total.array() - total.mean();
  const double denom = dc.norm() * tc.norm();
  m.corr = denom > 1e-12 * (1.0 + dem.norm()) * (1.0 + total.norm()) ? dc.dot(tc) / denom : 0.0;
  return m;
}

inline ValleyMetrics valley_metrics(const Trace& trace, const std::vector<double>& d) {
  if (trace.size() == 0) throw Error(Errc::invalid_argument, "valley_metrics: empty trace");
  return valley_metrics(trace.back().x, trace.players, d);
}

}  // namespace aggnash
