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

struct IssCertificate {
  double epsilon = 0.0;
  double gamma_bar = 0.0;
  double h_bar = 0.0;
  double lambda_max = 0.0;
  double lambda_min_nonzero = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double delta = 0.0;
  double m = 0.0;
  double beta = 0.0;
  double alpha3 = 0.0;
  double alpha4 = 0.0;
  bool exact_delta = false;  ///< δ from the assembled P rather than the scalar bound

  /// √(α₂/α₁), the overshoot factor shared by both envelope terms.
  double overshoot() const { return std::sqrt(alpha2 / alpha1); }
  /// β₁ per unit of sup ‖ν‖.
  double disturbance_gain() const { return overshoot() * alpha4; }
};

namespace detail {

inline void check_fractions(double kappa_frac, double beta) {
  if (!(kappa_frac > 0.0 && kappa_frac < 1.0) || !(beta > 0.0 && beta < 1.0)) {
    throw Error(Errc::invalid_argument, "kappa_frac and beta must lie in (0, 1)");
  }
}

inline IssCertificate certificate_head(double epsilon, double gamma_bar, double h_bar,
                                       const GraphTopology& graph, double kappa_frac,
                                       double beta) {
  check_fractions(kappa_frac, beta);
  if (!(epsilon > 0.0)) {
    throw Error(Errc::certificate_failure, "strong monotonicity constant must be positive");
  }
  IssCertificate c;
  c.epsilon = epsilon;
  c.gamma_bar = gamma_bar;
  c.h_bar = h_bar;
  c.beta = beta;
  c.lambda_max = graph.lambda_max();
  c.lambda_min_nonzero = graph.lambda_min_nonzero();
  const double lmax2 = c.lambda_max * c.lambda_max;
  const double big = std::max(1.0, lmax2);
  c.kappa1 = 1.0 / big;
  c.kappa2 = 4.0 * epsilon / (gamma_bar * gamma_bar + h_bar * h_bar + 1.0 + 4.0 * lmax2);
  c.kappa = kappa_frac * std::min(c.kappa1, c.kappa2);
  c.alpha1 = (1.0 - c.kappa * big) / 2.0;
  c.alpha2 = (1.0 + c.kappa * big) / 2.0;
  return c;
}

inline void certificate_tail(IssCertificate& c) {
  if (!(c.delta > 0.0)) {
    throw Error(Errc::certificate_failure,
                "lambda_min(P) = " + std::to_string(c.delta) + " is not positive");
  }
  const double lmin = c.lambda_min_nonzero;
  c.m = c.delta * std::min(1.0, lmin * lmin);
  if (!(c.m > 0.0)) {
    throw Error(Errc::certificate_failure, "graph has no nonzero Laplacian eigenvalue");
  }
  c.alpha3 = c.m * (1.0 - c.beta);
  c.alpha4 = std::sqrt(1.0 + c.kappa * c.kappa * c.lambda_max * c.lambda_max) / (c.beta * c.m);
}

}  // namespace detail

/// Jacobian U of F(x, σ) = col(K col(f_i), σ − H x) for a quadratic game,
/// ordered (x, σ).
inline Mat operator_jacobian(const QuadraticGame& game) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  const Eigen::Index len = n * big_n;
  Mat u = Mat::Zero(2 * len, 2 * len);
  for (Eigen::Index i = 0; i < big_n; ++i) {
    const Mat j = player_operator_jacobian(game, static_cast<std::size_t>(i));
    u.block(i * n, i * n, n, n) = j.topLeftCorner(n, n);
    u.block(i * n, len + i * n, n, n) = j.topRightCorner(n, n);
    u.block(len + i * n, i * n, n, n) = j.bottomLeftCorner(n, n);
    u.block(len + i * n, len + i * n, n, n) = j.bottomRightCorner(n, n);
  }
  return u;
}

/// P = [[ε I − κ G Gᵀ, ½ κ Uᵀ], [½ κ U, κ I]] with G = col(0, L ⊗ Iₙ).
inline Mat certificate_matrix(const QuadraticGame& game, const GraphTopology& graph,
                              double epsilon, double kappa) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  const Eigen::Index len = n * big_n;
  Mat lk = Mat::Zero(len, len);
  const Mat& lap = graph.laplacian();
  for (Eigen::Index i = 0; i < big_n; ++i) {
    for (Eigen::Index j = 0; j < big_n; ++j) {
      if (lap(i, j) != 0.0) lk.block(i * n, j * n, n, n) = lap(i, j) * Mat::Identity(n, n);
    }
  }
  Mat g = Mat::Zero(2 * len, len);
  g.bottomRows(len) = lk;
  const Mat u = operator_jacobian(game);
  Mat p(4 * len, 4 * len);
  p.topLeftCorner(2 * len, 2 * len) =
      epsilon * Mat::Identity(2 * len, 2 * len) - kappa * g * g.transpose();
  p.topRightCorner(2 * len, 2 * len) = 0.5 * kappa * u.transpose();
  p.bottomLeftCorner(2 * len, 2 * len) = 0.5 * kappa * u;
  p.bottomRightCorner(2 * len, 2 * len) = kappa * Mat::Identity(2 * len, 2 * len);
  return p;
}

/// Certificate for a quadratic game. U is constant, so δ = λ_min(P) exactly.
inline IssCertificate iss_certificate(const QuadraticGame& game, const GraphTopology& graph,
                                      double kappa_frac = 0.5, double beta = 0.5) {
  if (graph.size() != game.players()) {
    throw Error(Errc::dimension_mismatch, "graph and game disagree on N");
  }
  double gamma_bar = 0.0;
  for (std::size_t i = 0; i < game.players(); ++i) {
    gamma_bar = std::max(gamma_bar, gradient_bound(game, i) * game.gain(i));
  }
  const double epsilon = compute_epsilon(game);
  IssCertificate c = detail::certificate_head(epsilon, gamma_bar, game.weights().maxCoeff(),
                                              graph, kappa_frac, beta);
  c.delta = min_sym_eigenvalue(certificate_matrix(game, graph, c.epsilon, c.kappa));
  c.exact_delta = true;
  detail::certificate_tail(c);
  return c;
}

/// Certificate from scalar constants only, using ‖U‖² ≤ γ̄² + h̄² + 1 and
/// ‖G Gᵀ‖ = λ_max(L)²: δ is λ_min of the resulting 2x2 lower bound on P.
inline IssCertificate iss_certificate_bounds(double epsilon, double gamma_bar, double h_bar,
                                             const GraphTopology& graph,
                                             double kappa_frac = 0.5, double beta = 0.5) {
  IssCertificate c =
      detail::certificate_head(epsilon, gamma_bar, h_bar, graph, kappa_frac, beta);
  const double u_norm = std::sqrt(gamma_bar * gamma_bar + h_bar * h_bar + 1.0);
  Eigen::Matrix2d p;
  p << c.epsilon - c.kappa * c.lambda_max * c.lambda_max, -0.5 * c.kappa * u_norm,
      -0.5 * c.kappa * u_norm, c.kappa;
  c.delta = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(p).eigenvalues()(0);
  c.exact_delta = false;
  detail::certificate_tail(c);
  return c;
}

/// Generic games: γ̄ from the model's gradient bounds, ε supplied by the caller
/// (for instance a sampled lower bound).
inline IssCertificate iss_certificate(const GameModel& game, const GraphTopology& graph,
                                      double epsilon, double kappa_frac = 0.5,
                                      double beta = 0.5) {
  if (!game.grad_bounds()) {
    throw Error(Errc::invalid_argument, "ISS certificate needs gradient bounds");
  }
  double gamma_bar = 0.0;
  for (std::size_t i = 0; i < game.players(); ++i) {
    gamma_bar = std::max(gamma_bar, (*game.grad_bounds())(static_cast<Eigen::Index>(i)) *
                                        game.gain(i));
  }
  return iss_certificate_bounds(epsilon, gamma_bar, game.weights().maxCoeff(), graph,
                                kappa_frac, beta);
}

/// β₀(init_dev, t) + β₁(nu_sup).
inline double iss_envelope(const IssCertificate& c, double init_dev, double nu_sup, double t) {
  const double g = c.overshoot();
  return g * std::exp(-c.alpha3 * t / (2.0 * c.alpha2)) * init_dev + g * c.alpha4 * nu_sup;
}

/// V(ξ̃, φ̃) = ½‖col(ξ̃, φ̃)‖² + κ φ̃ᵀ Gᵀ ξ̃ with ξ̃ = (x̃, σ̃).
inline double lyapunov_value(double kappa, const GraphTopology& graph, std::size_t n,
                             const Vec& xi, const Vec& phi) {
  const Eigen::Index len = phi.size();
  if (xi.size() != 2 * len) throw Error(Errc::dimension_mismatch, "xi must be twice phi");
  const Vec lphi = graph.kron_apply(GraphOperator::laplacian, phi, n);
  return 0.5 * (xi.squaredNorm() + phi.squaredNorm()) + kappa * lphi.dot(xi.tail(len));
}

struct IssReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  ///< max over samples of deviation / envelope
  double init_dev = 0.0;
  std::vector<double> deviation;
  std::vector<double> envelope;
};

/// Checks ‖col(x̃, σ̃, ψ̃)(t)‖ ≤ (β₀ + β₁)/scale at every sample, with the
/// running sup of ‖ν‖ recorded in the trace. scale > 1 shrinks the envelope
/// (negative control). `round_off` absorbs floating-point drift of runs that
/// start exactly at the equilibrium.
inline IssReport verify_iss(const Trace& trace, const IssCertificate& cert, const Vec& x_star,
                            const Vec& psi_star, const Vec& sigma_star, double scale = 1.0,
                            double round_off = 1e-9) {
  if (trace.size() == 0) return {};
  const SimState& first = trace.states.front();
  if (x_star.size() == 0 || psi_star.size() == 0 || sigma_star.size() == 0 ||
      x_star.size() != first.x.size() || psi_star.size() != first.psi.size() ||
      sigma_star.size() != first.sigma.size()) {
    throw Error(Errc::missing_equilibrium, "equilibrium (x*, sigma*, psi*) missing or mis-sized");
  }
  if (!(scale > 0.0)) throw Error(Errc::invalid_argument, "envelope scale must be positive");
  auto dev = [&](const SimState& s) {
    return std::sqrt((s.x - x_star).squaredNorm() + (s.sigma - sigma_star).squaredNorm() +
                     (s.psi - psi_star).squaredNorm());
  };
  IssReport rep;
  rep.init_dev = dev(first);
  rep.samples = trace.size();
  rep.deviation.reserve(trace.size());
  rep.envelope.reserve(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double d = dev(trace.states[k]);
    const double env = iss_envelope(cert, rep.init_dev, trace.dist_sup[k], trace.times[k]) / scale;
    rep.deviation.push_back(d);
    rep.envelope.push_back(env);
    if (d > env + round_off) ++rep.violations;
    if (env > 0.0) {
      rep.max_ratio = std::max(rep.max_ratio, d / env);
    } else if (d > 0.0) {
      rep.max_ratio = kInf;
    }
  }
  return rep;
}

}  // namespace aggnash
