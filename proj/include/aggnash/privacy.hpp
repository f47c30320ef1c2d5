#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aggnash/dynamics.hpp"
#include "aggnash/error.hpp"
#include "aggnash/game.hpp"
#include "aggnash/graph.hpp"
#include "aggnash/linalg.hpp"

namespace aggnash {

/// Per-player scalings: S_H block r_i Iₙ (h_i′ = h_i / r_i) and S_K block
/// s_i Iₙ (k_i′ = k_i / s_i).
struct ReplicaTransform {
  Vec r;
  Vec s;

  static ReplicaTransform identity(std::size_t players) {
    const auto n = static_cast<Eigen::Index>(players);
    return {Vec::Ones(n), Vec::Ones(n)};
  }
};

struct ReplicaGame {
  QuadraticGame game;
  Vec x0;
  /// Players whose replica gain lies outside the admissible interval computed
  /// from the replica's own parameters (0-based).
  std::vector<std::size_t> inadmissible_gains;
  std::vector<std::string> warnings;

  bool gains_admissible() const noexcept { return inadmissible_gains.empty(); }
};

/// Scales every block of a stacked vector by the per-player factor.
inline Vec scale_blocks(const Vec& v, const Vec& factors, std::size_t n) {
  Vec out = v;
  const auto nn = static_cast<Eigen::Index>(n);
  for (Eigen::Index i = 0; i < factors.size(); ++i) out.segment(i * nn, nn) *= factors(i);
  return out;
}

inline ReplicaGame build_replica(const QuadraticGame& game, const Vec& x0,
                                 const ReplicaTransform& tr) {
  const auto big_n = static_cast<Eigen::Index>(game.players());
  if (tr.r.size() != big_n || tr.s.size() != big_n) {
    throw Error(Errc::dimension_mismatch, "replica transform needs one r_i and s_i per player");
  }
  if (x0.size() != big_n * static_cast<Eigen::Index>(game.dim())) {
    throw Error(Errc::dimension_mismatch, "x0 must have length N*n");
  }
  for (Eigen::Index i = 0; i < big_n; ++i) {
    if (!(tr.r(i) > 0.0) || !(tr.s(i) > 0.0) || !std::isfinite(tr.r(i)) ||
        !std::isfinite(tr.s(i))) {
      throw Error(Errc::non_positive_scaling,
                  "replica scalings of player " + std::to_string(i + 1) + " must be positive");
    }
  }
  std::vector<QuadraticPlayer> players;
  std::vector<BoxSet> boxes;
  Vec h(big_n), k(big_n);
  for (Eigen::Index i = 0; i < big_n; ++i) {
    const QuadraticPlayer& p = game.player(static_cast<std::size_t>(i));
    const double r = tr.r(i);
    const double s = tr.s(i);
    players.push_back({s * p.Q, (s * r) * p.D, (s * r) * p.d});
    h(i) = game.weight(static_cast<std::size_t>(i)) / r;
    k(i) = game.gain(static_cast<std::size_t>(i)) / s;
    const BoxSet& b = game.box(static_cast<std::size_t>(i));
    boxes.push_back({r * b.lower, r * b.upper});
  }
  ReplicaGame out{QuadraticGame(std::move(players), h, k, std::move(boxes)),
                  scale_blocks(x0, tr.r, game.dim()),
                  {},
                  {}};
  for (std::size_t i = 0; i < game.players(); ++i) {
    const PlayerConstants c = mu_ell(out.game, i);
    std::string reason;
    try {
      const GainInterval iv = gain_interval(c.mu, c.ell, out.game.weight(i));
      if (!iv.contains(out.game.gain(i))) {
        reason = "gain " + std::to_string(out.game.gain(i)) + " outside (" +
                 std::to_string(iv.lo) + ", " + std::to_string(iv.hi) + ")";
      }
    } catch (const Error& e) {
      reason = e.what();
    }
    if (!reason.empty()) {
      out.inadmissible_gains.push_back(i);
      out.warnings.push_back("replica player " + std::to_string(i + 1) + ": " + reason);
    }
  }
  return out;
}

/// Largest violation of each defining identity of the replica.
struct ReplicaIdentityResiduals {
  double a = 0.0;  ///< ‖A′ − S_K A‖
  double d_mat = 0.0;  ///< ‖D′ − S_K S_H D‖
  double d_vec = 0.0;  ///< ‖d′ − S_K S_H d‖
  double h = 0.0;  ///< ‖H′ S_H − H‖
  double k = 0.0;  ///< ‖K′ S_K − K‖

  double max() const noexcept { return std::max({a, d_mat, d_vec, h, k}); }
};

inline ReplicaIdentityResiduals replica_identity_residuals(const QuadraticGame& game,
                                                           const ReplicaGame& rep,
                                                           const ReplicaTransform& tr) {
  ReplicaIdentityResiduals res;
  for (std::size_t i = 0; i < game.players(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double r = tr.r(ii);
    const double s = tr.s(ii);
    res.a = std::max(res.a, (rep.game.A(i) - s * game.A(i)).norm());
    res.d_mat = std::max(res.d_mat, (rep.game.player(i).D - s * r * game.player(i).D).norm());
    res.d_vec = std::max(res.d_vec, (rep.game.player(i).d - s * r * game.player(i).d).norm());
    res.h = std::max(res.h, std::abs(rep.game.weight(i) * r - game.weight(i)));
    res.k = std::max(res.k, std::abs(rep.game.gain(i) * s - game.gain(i)));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Linear-system view ξ̇ = A_q ξ + D_q with ξ = (x, σ, ψ) and public output
// y = C_q ξ = (σ, ψ).

inline Mat system_matrix(const QuadraticGame& game, const GraphTopology& graph) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  const Eigen::Index len = n * big_n;
  Mat aq = Mat::Zero(3 * len, 3 * len);
  Mat lk = Mat::Zero(len, len);
  const Mat& lap = graph.laplacian();
  for (Eigen::Index i = 0; i < big_n; ++i) {
    for (Eigen::Index j = 0; j < big_n; ++j) {
      if (lap(i, j) != 0.0) lk.block(i * n, j * n, n, n) = lap(i, j) * Mat::Identity(n, n);
    }
  }
  for (Eigen::Index i = 0; i < big_n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double k = game.gain(ii);
    aq.block(i * n, i * n, n, n) = -k * game.A(ii);
    aq.block(i * n, len + i * n, n, n) = -k * game.player(ii).D;
    aq.block(len + i * n, i * n, n, n) = game.weight(ii) * Mat::Identity(n, n);
  }
  aq.block(len, len, len, len) = -Mat::Identity(len, len);
  aq.block(len, 2 * len, len, len) = -lk;
  aq.block(2 * len, len, len, len) = lk;
  return aq;
}

inline Vec system_offset(const QuadraticGame& game) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const Eigen::Index len = n * static_cast<Eigen::Index>(game.players());
  Vec dq = Vec::Zero(3 * len);
  for (std::size_t i = 0; i < game.players(); ++i) {
    dq.segment(static_cast<Eigen::Index>(i) * n, n) = -game.gain(i) * game.player(i).d;
  }
  return dq;
}

/// C_q A_q^k v for k = 0..k_max.
inline std::vector<Vec> public_output_sequence(const Mat& aq, const Vec& v, int k_max) {
  const Eigen::Index len = aq.rows() / 3;
  std::vector<Vec> out;
  Vec w = v;
  for (int k = 0; k <= k_max; ++k) {
    out.push_back(w.tail(2 * len));
    w = aq * w;
  }
  return out;
}

/// Largest relative mismatch max_k ‖y_k − y′_k‖ / max(1, ‖y_k‖) over the
/// public sequences of (ξ(0), D_q) and their replica counterparts.
inline double observability_mismatch(const QuadraticGame& game, const ReplicaGame& rep,
                                     const GraphTopology& graph, const Vec& sigma0,
                                     const Vec& psi0, const Vec& x0, int k_max) {
  const Mat aq = system_matrix(game, graph);
  const Mat aq_p = system_matrix(rep.game, graph);
  Vec xi(3 * x0.size()), xi_p(3 * x0.size());
  xi << x0, sigma0, psi0;
  xi_p << rep.x0, sigma0, psi0;
  double worst = 0.0;
  const auto compare = [&](const std::vector<Vec>& a, const std::vector<Vec>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      worst = std::max(worst, (a[k] - b[k]).norm() / std::max(1.0, a[k].norm()));
    }
  };
  compare(public_output_sequence(aq, xi, k_max), public_output_sequence(aq_p, xi_p, k_max));
  compare(public_output_sequence(aq, system_offset(game), k_max),
          public_output_sequence(aq_p, system_offset(rep.game), k_max));
  return worst;
}

// ---------------------------------------------------------------------------
// Trace comparison

enum class PrivacyVerdict { indistinguishable, distinguishable, no_witness };

inline const char* to_string(PrivacyVerdict v) noexcept {
  switch (v) {
    case PrivacyVerdict::indistinguishable: return "indistinguishable";
    case PrivacyVerdict::distinguishable: return "distinguishable";
    case PrivacyVerdict::no_witness: return "no-witness";
  }
  return "unknown";
}

struct IndistinguishabilityReport {
  double max_sigma_gap = 0.0;
  double max_psi_gap = 0.0;
  Vec min_x_gap;  ///< per player: min_t ‖x_i(t) − x_i′(t)‖∞
  std::vector<std::size_t> witnesses;  ///< players with a strictly positive x gap
  PrivacyVerdict verdict = PrivacyVerdict::no_witness;
};

/// Compares a trace with its replica trace sample by sample. Public signals
/// must agree to `public_tol`; every player in `rescaled` (r_i ≠ 1) must keep
/// a strictly positive private gap for the verdict "indistinguishable".
inline IndistinguishabilityReport verify_indistinguishability(
    const Trace& a, const Trace& b, const std::vector<std::size_t>& rescaled,
    double public_tol = 1e-8) {
  if (a.size() != b.size() || a.players != b.players || a.dim != b.dim || a.dt != b.dt ||
      a.stride != b.stride) {
    throw Error(Errc::grid_mismatch, "traces are not on the same time grid");
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.times[k] != b.times[k]) {
      throw Error(Errc::grid_mismatch, "sample times differ at index " + std::to_string(k));
    }
  }
  const auto n = static_cast<Eigen::Index>(a.dim);
  const auto big_n = static_cast<Eigen::Index>(a.players);
  IndistinguishabilityReport rep;
  rep.min_x_gap = Vec::Constant(big_n, kInf);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const SimState& s = a.states[k];
    const SimState& t = b.states[k];
    rep.max_sigma_gap = std::max(rep.max_sigma_gap, (s.sigma - t.sigma).cwiseAbs().maxCoeff());
    rep.max_psi_gap = std::max(rep.max_psi_gap, (s.psi - t.psi).cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < big_n; ++i) {
      const double gap = (s.x.segment(i * n, n) - t.x.segment(i * n, n)).cwiseAbs().maxCoeff();
      rep.min_x_gap(i) = std::min(rep.min_x_gap(i), gap);
    }
  }
  if (a.size() == 0) rep.min_x_gap.setZero();
  bool all_rescaled_witness = !rescaled.empty();
  for (std::size_t i : rescaled) {
    if (i >= a.players) throw Error(Errc::index_out_of_range, "rescaled player out of range");
    if (rep.min_x_gap(static_cast<Eigen::Index>(i)) > 0.0) {
      rep.witnesses.push_back(i);
    } else {
      all_rescaled_witness = false;
    }
  }
  if (rep.max_sigma_gap > public_tol || rep.max_psi_gap > public_tol) {
    rep.verdict = PrivacyVerdict::distinguishable;
  } else if (all_rescaled_witness) {
    rep.verdict = PrivacyVerdict::indistinguishable;
  } else {
    rep.verdict = PrivacyVerdict::no_witness;
  }
  return rep;
}

/// Players with r_i ≠ 1.
inline std::vector<std::size_t> rescaled_players(const ReplicaTransform& tr) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < tr.r.size(); ++i) {
    if (tr.r(i) != 1.0) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

/// Change of variables x = p ⊙ x̂ for games with unit weights. The x̂ game is
/// the replica with r_i = 1/p_i and s_i = p_i.
struct UnweightedRescaling {
  QuadraticGame game;
  Vec p;
  std::size_t dim = 1;

  Vec to_hat(const Vec& x) const {
    Vec inv = p.cwiseInverse();
    return scale_blocks(x, inv, dim);
  }
  Vec recover(const Vec& x_hat) const { return scale_blocks(x_hat, p, dim); }
};

inline UnweightedRescaling unweighted_rescaling(const QuadraticGame& game, const Vec& p) {
  for (std::size_t i = 0; i < game.players(); ++i) {
    if (game.weight(i) != 1.0) {
      throw Error(Errc::weights_not_unit,
                  "player " + std::to_string(i + 1) + " has weight h_i != 1");
    }
  }
  if (p.size() != static_cast<Eigen::Index>(game.players())) {
    throw Error(Errc::dimension_mismatch, "need one p_i per player");
  }
  const ReplicaTransform tr{p.cwiseInverse(), p};
  const Vec dummy = Vec::Zero(static_cast<Eigen::Index>(game.players() * game.dim()));
  ReplicaGame rep = build_replica(game, dummy, tr);
  return {std::move(rep.game), p, game.dim()};
}

}  // namespace aggnash
