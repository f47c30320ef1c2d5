#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aggnash/error.hpp"
#include "aggnash/game.hpp"
#include "aggnash/graph.hpp"
#include "aggnash/linalg.hpp"

namespace aggnash {

enum class NEMethod { linear_solve, projected_gradient, kkt };

inline const char* to_string(NEMethod m) noexcept {
  switch (m) {
    case NEMethod::linear_solve: return "linear_solve";
    case NEMethod::projected_gradient: return "projected_gradient";
    case NEMethod::kkt: return "kkt";
  }
  return "unknown";
}

struct NESolution {
  Vec x_star;
  Vec s_star;
  double residual = 0.0;
  NEMethod method = NEMethod::linear_solve;
  std::size_t iterations = 0;
  bool converged = true;
};

/// Solves col(A_i x_i + D_i s(x) + d_i) = 0 by dense LU. The residual is the
/// Euclidean norm of the pseudo-gradient at the returned point.
inline NESolution solve_ne_unconstrained(const QuadraticGame& game) {
  const Mat m = pseudo_gradient_jacobian(game);
  const auto n = static_cast<Eigen::Index>(game.dim());
  Vec rhs(m.rows());
  for (std::size_t i = 0; i < game.players(); ++i) {
    rhs.segment(static_cast<Eigen::Index>(i) * n, n) = -game.player(i).d;
  }
  Eigen::FullPivLU<Mat> lu(m);
  if (!lu.isInvertible()) {
    throw Error(Errc::singular_system, "NE linear system is singular (rank " +
                                           std::to_string(lu.rank()) + " of " +
                                           std::to_string(m.rows()) + ")");
  }
  NESolution sol;
  sol.x_star = lu.solve(rhs);
  // One step of iterative refinement keeps the residual at round-off level
  // for the badly scaled instances that large d produces.
  sol.x_star += lu.solve(rhs - m * sol.x_star);
  sol.s_star = aggregate(game, sol.x_star);
  sol.residual = pseudo_gradient(game, sol.x_star).norm();
  sol.method = NEMethod::linear_solve;
  sol.iterations = 1;
  const double tol = 1e-10 * (1.0 + rhs.norm());
  if (!(sol.residual <= tol)) {
    throw Error(Errc::singular_system, "NE linear solve residual " +
                                           std::to_string(sol.residual) +
                                           " exceeds tolerance; system is ill-conditioned");
  }
  return sol;
}

/// Natural residual ‖x − proj_𝒳(x − K F_pg(x))‖ of VI(𝒳, K F_pg).
template <AggregativeGame G>
double natural_residual(const G& game, const Eigen::Ref<const Vec>& x) {
  const Vec g = weighted_pseudo_gradient(game, x);
  const auto n = static_cast<Eigen::Index>(game.dim());
  double sq = 0.0;
  for (std::size_t i = 0; i < game.players(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * n;
    const Vec xi = x.segment(off, n);
    sq += (xi - game.box(i).project(xi - g.segment(off, n))).squaredNorm();
  }
  return std::sqrt(sq);
}

struct VIOptions {
  double tol = 1e-12;
  std::size_t max_iter = 200000;
  /// Per-player positive weights W used in the iteration
  /// x ← proj(x − τ W F_pg(x)). Boxes are a product over players, so every
  /// such W yields the same VI solution as W = K.
  Vec weights;
  double step = 0.0;
  std::optional<Vec> x0;
  /// When set, receives every iterate (for contraction tests).
  std::vector<Vec>* history = nullptr;
};

namespace detail {

/// Step τ = ε_W / L_W² for the affine map x ↦ W F_pg(x) of a quadratic game,
/// with ε_W = λ_min(sym(W J)) and L_W = ‖W J‖₂.
inline std::optional<double> exact_vi_step(const Mat& jac, const Vec& w, std::size_t n) {
  Mat wj = jac;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    wj.middleRows(i * static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) *= w(i);
  }
  const double eps = min_sym_eigenvalue(wj);
  if (!(eps > 0.0)) return std::nullopt;
  const double lip = spectral_norm(wj);
  return eps / (lip * lip);
}

}  // namespace detail

/// Projected pseudo-gradient fixed-point iteration. Stops when the natural
/// residual (measured with K) falls below `tol`; otherwise returns the last
/// iterate with `converged = false`.
template <AggregativeGame G>
NESolution solve_vi_constrained(const G& game, const VIOptions& opt) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  if (opt.weights.size() != big_n) {
    throw Error(Errc::dimension_mismatch, "VI weights need one entry per player");
  }
  if (!(opt.step > 0.0)) throw Error(Errc::invalid_argument, "VI step must be positive");
  Vec x(n * big_n);
  if (opt.x0) {
    if (opt.x0->size() != x.size()) {
      throw Error(Errc::dimension_mismatch, "VI start point has wrong length");
    }
    x = *opt.x0;
  } else {
    x.setZero();
  }
  for (std::size_t i = 0; i < game.players(); ++i) {
    game.box(i).clamp(x.segment(static_cast<Eigen::Index>(i) * n, n));
  }

  NESolution sol;
  sol.method = NEMethod::projected_gradient;
  sol.converged = false;
  std::size_t it = 0;
  double res = natural_residual(game, x);
  if (opt.history) opt.history->push_back(x);
  while (res > opt.tol && it < opt.max_iter) {
    const Vec g = pseudo_gradient(game, x);
    for (std::size_t i = 0; i < game.players(); ++i) {
      const Eigen::Index off = static_cast<Eigen::Index>(i) * n;
      auto xi = x.segment(off, n);
      xi -= opt.step * opt.weights(static_cast<Eigen::Index>(i)) * g.segment(off, n);
      game.box(i).clamp(xi);
    }
    if (!x.allFinite()) {
      throw Error(Errc::non_finite_state, "VI iteration produced a non-finite iterate");
    }
    ++it;
    res = natural_residual(game, x);
    if (opt.history) opt.history->push_back(x);
  }
  sol.x_star = x;
  sol.s_star = aggregate(game, x);
  sol.residual = res;
  sol.iterations = it;
  sol.converged = res <= opt.tol;
  return sol;
}

/// Quadratic games: picks the iteration weights (K itself, or unit weights if
/// that conditions the map better) and the exact step for them.
inline NESolution solve_vi_constrained(const QuadraticGame& game, double tol = 1e-12,
                                       std::size_t max_iter = 200000,
                                       std::vector<Vec>* history = nullptr) {
  const Mat jac = pseudo_gradient_jacobian(game);
  const Vec ones = Vec::Ones(static_cast<Eigen::Index>(game.players()));
  VIOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  opt.history = history;
  double best_rate = 0.0;
  for (const Vec& w : {game.gains(), ones}) {
    const auto step = detail::exact_vi_step(jac, w, game.dim());
    if (!step) continue;
    // Contraction factor per step is sqrt(1 − ε²/L²) = sqrt(1 − ε τ).
    Mat wj = jac;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      wj.middleRows(i * static_cast<Eigen::Index>(game.dim()),
                    static_cast<Eigen::Index>(game.dim())) *= w(i);
    }
    const double rate = min_sym_eigenvalue(wj) * *step;
    if (rate > best_rate) {
      best_rate = rate;
      opt.weights = w;
      opt.step = *step;
    }
  }
  if (best_rate <= 0.0) {
    throw Error(Errc::not_strongly_monotone,
                "weighted pseudo-gradient is not strongly monotone; no VI step available");
  }
  return solve_vi_constrained(game, opt);
}

/// ψ* = (L⁺ ⊗ Iₙ) H x* + 𝟙 ⊗ mean_i ψ_i(0).
inline Vec psi_star(const GraphTopology& graph, const Vec& weights, const Vec& x_star,
                    const Vec& psi0) {
  const std::size_t players = graph.size();
  if (static_cast<std::size_t>(weights.size()) != players || x_star.size() != psi0.size() ||
      x_star.size() % static_cast<Eigen::Index>(players) != 0) {
    throw Error(Errc::dimension_mismatch, "psi_star: inconsistent sizes");
  }
  const std::size_t n = static_cast<std::size_t>(x_star.size()) / players;
  const auto nn = static_cast<Eigen::Index>(n);
  Vec hx(x_star.size());
  Vec mean = Vec::Zero(nn);
  for (std::size_t i = 0; i < players; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * nn;
    hx.segment(off, nn) = weights(static_cast<Eigen::Index>(i)) * x_star.segment(off, nn);
    mean += psi0.segment(off, nn);
  }
  mean /= static_cast<double>(players);
  Vec out = graph.kron_apply(GraphOperator::pseudo_inverse, hx, n);
  for (std::size_t i = 0; i < players; ++i) {
    out.segment(static_cast<Eigen::Index>(i) * nn, nn) += mean;
  }
  return out;
}

struct KktResidual {
  double stationarity = 0.0;
  double budget = 0.0;
  double total() const noexcept { return stationarity + budget; }
};

/// KKT residual for box sets 𝒳¹ with per-player budgets 𝟙ᵀ x_i = γ_i. Box
/// multipliers are eliminated componentwise on g = K F_pg(x) + (I ⊗ 𝟙)λ:
/// interior components must vanish, components at the lower bound need
/// g ≥ 0 and at the upper bound g ≤ 0. Distance of x to the box is added.
template <AggregativeGame G>
KktResidual kkt_residual_pev_parts(const G& game, const Eigen::Ref<const Vec>& x,
                                   const Eigen::Ref<const Vec>& lambda,
                                   const Eigen::Ref<const Vec>& budgets) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  if (x.size() != n * big_n || lambda.size() != big_n || budgets.size() != big_n) {
    throw Error(Errc::dimension_mismatch, "kkt residual: inconsistent sizes");
  }
  const Vec g = weighted_pseudo_gradient(game, x);
  double stat_sq = 0.0;
  double eq_sq = 0.0;
  for (Eigen::Index i = 0; i < big_n; ++i) {
    const BoxSet& box = game.box(static_cast<std::size_t>(i));
    for (Eigen::Index t = 0; t < n; ++t) {
      const double xv = x(i * n + t);
      const double gv = g(i * n + t) + lambda(i);
      const double lo = box.lower(t);
      const double hi = box.upper(t);
      const double lo_tol = 1e-9 * (1.0 + std::abs(lo));
      const double hi_tol = 1e-9 * (1.0 + std::abs(hi));
      double v = gv;
      if (xv <= lo + lo_tol) {
        v = std::min(gv, 0.0);
      } else if (xv >= hi - hi_tol) {
        v = std::max(gv, 0.0);
      }
      const double outside = std::max({lo - xv, xv - hi, 0.0});
      stat_sq += v * v + outside * outside;
    }
    const double gap = x.segment(i * n, n).sum() - budgets(i);
    eq_sq += gap * gap;
  }
  return {std::sqrt(stat_sq), std::sqrt(eq_sq)};
}

template <AggregativeGame G>
double kkt_residual_pev(const G& game, const Eigen::Ref<const Vec>& x,
                        const Eigen::Ref<const Vec>& lambda,
                        const Eigen::Ref<const Vec>& budgets) {
  return kkt_residual_pev_parts(game, x, lambda, budgets).total();
}

}  // namespace aggnash
