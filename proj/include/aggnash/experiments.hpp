#pragma once

#include <chrono>
#include <cstddef>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "aggnash/config.hpp"
#include "aggnash/dynamics.hpp"
#include "aggnash/equilibrium.hpp"
#include "aggnash/error.hpp"
#include "aggnash/game.hpp"
#include "aggnash/io.hpp"
#include "aggnash/privacy.hpp"
#include "aggnash/robustness.hpp"
#include "aggnash/rng.hpp"
#include "aggnash/scenarios.hpp"

namespace aggnash {

inline SimOptions sim_options(const RunConfig& cfg) {
  return {cfg.integrator.dt, cfg.integrator.t_end, cfg.integrator.stride};
}

inline FlowVariant make_flow(const RunConfig& cfg, const ScenarioInstance& inst) {
  if (cfg.variant == "unconstrained") return UnconstrainedFlow{};
  if (cfg.variant == "projected") return ProjectedFlow{};
  if (cfg.variant == "disturbed") {
    return DisturbedFlow{hvac_disturbance(inst.game.players() * inst.game.dim(), cfg.seed,
                                          cfg.disturbance)};
  }
  if (inst.budgets.size() != static_cast<Eigen::Index>(inst.game.players())) {
    throw Error(Errc::config_error, "variant 'lagrangian' needs per-player budgets");
  }
  return LagrangianFlow{inst.budgets};
}

/// Admissibility notes for the gains of a quadratic game.
inline std::vector<std::string> gain_warnings(const QuadraticGame& game) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < game.players(); ++i) {
    const PlayerConstants c = mu_ell(game, i);
    try {
      const GainInterval iv = gain_interval(c.mu, c.ell, game.weight(i));
      if (!iv.contains(game.gain(i))) {
        w.push_back("player " + std::to_string(i + 1) + ": gain " + std::to_string(game.gain(i)) +
                    " outside the interval (" + std::to_string(iv.lo) + ", " +
                    std::to_string(iv.hi) + ") given by mu_i, ell_i, h_i");
      }
    } catch (const Error& e) {
      w.push_back("player " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!(exact_epsilon(game) > 0.0)) {
    w.push_back("the extended operator is not strongly monotone for these gains");
  }
  return w;
}

inline nlohmann::json solution_json(const NESolution& sol) {
  return {{"method", to_string(sol.method)},
          {"x_star", to_json(sol.x_star)},
          {"s_star", to_json(sol.s_star)},
          {"residual", sol.residual},
          {"iterations", sol.iterations},
          {"converged", sol.converged}};
}

inline nlohmann::json header_json(const RunConfig& cfg) {
  return {{"config_hash", cfg.hash},
          {"schema_version", kConfigSchemaVersion},
          {"rng", std::string(Philox4x32::kGeneratorName)},
          {"seed", cfg.seed},
          {"scenario", cfg.scenario},
          {"variant", cfg.variant}};
}

/// Reference equilibrium for an instance: linear solve without boxes,
/// projected-gradient VI with boxes.
inline NESolution reference_equilibrium(const QuadraticGame& game) {
  bool unbounded = true;
  for (const BoxSet& b : game.boxes()) unbounded = unbounded && b.is_unbounded();
  return unbounded ? solve_ne_unconstrained(game) : solve_vi_constrained(game);
}

struct SimulationOutcome {
  Trace trace;
  nlohmann::json summary;
};

inline SimulationOutcome run_simulation(const RunConfig& cfg) {
  const ScenarioInstance inst = build_instance(cfg);
  const FlowVariant flow = make_flow(cfg, inst);
  const auto start = std::chrono::steady_clock::now();
  SimulationOutcome out{simulate(inst.game, inst.graph, flow, inst.init, sim_options(cfg)), {}};
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const SimState& fin = out.trace.back();
  nlohmann::json s = header_json(cfg);
  s["players"] = inst.game.players();
  s["dim"] = inst.game.dim();
  s["dt"] = cfg.integrator.dt;
  s["t_end"] = cfg.integrator.t_end;
  s["samples"] = out.trace.size();
  s["gains"] = to_json(inst.game.gains());
  s["x_final"] = to_json(fin.x);
  s["conservation_drift"] = conservation_drift(out.trace);
  s["wall_time_s"] = wall;
  if (std::holds_alternative<LagrangianFlow>(flow)) {
    const KktResidual r = kkt_residual_pev_parts(inst.game, fin.x, *fin.lambda, inst.budgets);
    s["kkt_residual"] = r.total();
    double budget_err = 0.0;
    const auto n = static_cast<Eigen::Index>(inst.game.dim());
    for (Eigen::Index i = 0; i < inst.budgets.size(); ++i) {
      budget_err = std::max(budget_err, std::abs(fin.x.segment(i * n, n).sum() - inst.budgets(i)));
    }
    s["budget_error"] = budget_err;
    if (cfg.scenario == "pev") {
      const ValleyMetrics vm = valley_metrics(fin.x, inst.game.players(), cfg.pev.demand);
      s["valley"] = {{"corr", vm.corr}, {"peak_increase", vm.peak_increase}};
    }
  } else {
    const NESolution ne = reference_equilibrium(inst.game);
    s["oracle"] = solution_json(ne);
    s["ne_error"] = (fin.x - ne.x_star).cwiseAbs().maxCoeff();
    const Vec ps = psi_star(inst.graph, inst.game.weights(), ne.x_star, inst.init.psi);
    s["psi_error"] = (fin.psi - ps).norm();
    s["sigma_error"] =
        (fin.sigma - ne.s_star.replicate(static_cast<Eigen::Index>(inst.game.players()), 1))
            .cwiseAbs()
            .maxCoeff();
  }
  out.summary = std::move(s);
  return out;
}

inline nlohmann::json run_ne_oracle(const RunConfig& cfg) {
  if (cfg.scenario == "pev" || cfg.variant == "lagrangian") {
    throw Error(Errc::config_error,
                "ne-oracle handles box-constrained or unconstrained games; budget-constrained "
                "games are checked through the KKT residual of a lagrangian simulation");
  }
  const ScenarioInstance inst = build_instance(cfg);
  nlohmann::json j = header_json(cfg);
  j["warnings"] = gain_warnings(inst.game);
  j["gains"] = to_json(inst.game.gains());
  j["solution"] = solution_json(reference_equilibrium(inst.game));
  return j;
}

struct PrivacyOutcome {
  Trace original;
  Trace replica;
  nlohmann::json report;
  IndistinguishabilityReport gaps;
  ReplicaIdentityResiduals identities;
  double observability = 0.0;
};

/// Paired simulations of a game and its replica from the same σ(0), ψ(0).
inline PrivacyOutcome run_privacy_check(const RunConfig& cfg) {
  RunConfig unconstrained = cfg;
  unconstrained.variant = "unconstrained";
  if (cfg.scenario == "pev") {
    throw Error(Errc::config_error, "privacy-check runs the unconstrained flow of a quadratic game");
  }
  const ScenarioInstance inst = build_instance(unconstrained);
  const ReplicaTransform tr = make_transform(cfg.privacy, inst.game.players(), cfg.seed);
  const ReplicaGame rep = build_replica(inst.game, inst.init.x, tr);
  SimState init_p = inst.init;
  init_p.x = rep.x0;
  PrivacyOutcome out;
  auto replica = std::async(std::launch::async, [&] {
    return simulate(rep.game, inst.graph, UnconstrainedFlow{}, init_p, sim_options(cfg));
  });
  out.original = simulate(inst.game, inst.graph, UnconstrainedFlow{}, inst.init, sim_options(cfg));
  out.replica = replica.get();
  out.gaps = verify_indistinguishability(out.original, out.replica, rescaled_players(tr),
                                         cfg.privacy.public_tol);
  out.identities = replica_identity_residuals(inst.game, rep, tr);
  out.observability = observability_mismatch(inst.game, rep, inst.graph, inst.init.sigma,
                                             inst.init.psi, inst.init.x, 3);
  nlohmann::json j = header_json(cfg);
  j["transform"] = {{"r", to_json(tr.r)}, {"s", to_json(tr.s)}};
  j["verdict"] = to_string(out.gaps.verdict);
  j["max_sigma_gap"] = out.gaps.max_sigma_gap;
  j["max_psi_gap"] = out.gaps.max_psi_gap;
  j["min_x_gap"] = to_json(out.gaps.min_x_gap);
  j["public_tol"] = cfg.privacy.public_tol;
  j["identity_residuals"] = {{"A", out.identities.a},
                             {"D", out.identities.d_mat},
                             {"d", out.identities.d_vec},
                             {"H", out.identities.h},
                             {"K", out.identities.k}};
  j["observability_mismatch"] = out.observability;
  j["replica_gains_admissible"] = rep.gains_admissible();
  j["warnings"] = rep.warnings;
  out.report = std::move(j);
  return out;
}

struct IssOutcome {
  Trace trace;
  IssCertificate cert;
  IssReport report;
  IssReport negative;
  nlohmann::json json;
};

inline nlohmann::json certificate_json(const IssCertificate& c) {
  return {{"epsilon", c.epsilon},   {"gamma_bar", c.gamma_bar}, {"h_bar", c.h_bar},
          {"lambda_max", c.lambda_max}, {"lambda_min_nonzero", c.lambda_min_nonzero},
          {"kappa1", c.kappa1},     {"kappa2", c.kappa2},       {"kappa", c.kappa},
          {"alpha1", c.alpha1},     {"alpha2", c.alpha2},       {"delta", c.delta},
          {"m", c.m},               {"beta", c.beta},           {"alpha3", c.alpha3},
          {"alpha4", c.alpha4},     {"exact_delta", c.exact_delta}};
}

/// Certificate, disturbed simulation and envelope check, plus the shrunken
/// envelope as a negative control.
inline IssOutcome run_iss_check(const RunConfig& cfg) {
  RunConfig disturbed = cfg;
  disturbed.variant = "disturbed";
  if (cfg.scenario == "pev") {
    throw Error(Errc::config_error, "iss-check runs the disturbed unconstrained flow");
  }
  const ScenarioInstance inst = build_instance(disturbed);
  IssOutcome out;
  out.cert = iss_certificate(inst.game, inst.graph, cfg.iss.kappa_frac, cfg.iss.beta);
  const NESolution ne = solve_ne_unconstrained(inst.game);
  const Vec ps = psi_star(inst.graph, inst.game.weights(), ne.x_star, inst.init.psi);
  const Vec ss = ne.s_star.replicate(static_cast<Eigen::Index>(inst.game.players()), 1);
  const FlowVariant flow = make_flow(disturbed, inst);
  out.trace = simulate(inst.game, inst.graph, flow, inst.init, sim_options(cfg));
  out.report = verify_iss(out.trace, out.cert, ne.x_star, ps, ss);
  out.negative = verify_iss(out.trace, out.cert, ne.x_star, ps, ss, cfg.iss.envelope_shrink);
  nlohmann::json j = header_json(cfg);
  j["certificate"] = certificate_json(out.cert);
  j["nu_sup"] = out.trace.dist_sup.back();
  j["nu_bound"] = std::get<DisturbedFlow>(flow).nu.norm_bound();
  j["init_dev"] = out.report.init_dev;
  j["violations"] = out.report.violations;
  j["max_ratio"] = out.report.max_ratio;
  j["negative_control"] = {{"envelope_shrink", cfg.iss.envelope_shrink},
                           {"violations", out.negative.violations},
                           {"max_ratio", out.negative.max_ratio}};
  j["samples"] = out.report.samples;
  out.json = std::move(j);
  return out;
}

}  // namespace aggnash
