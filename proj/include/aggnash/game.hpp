#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aggnash/error.hpp"
#include "aggnash/linalg.hpp"
#include "aggnash/rng.hpp"

namespace aggnash {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Axis-aligned box {x : lower <= x <= upper}; infinite bounds allowed. The
/// all-infinite box is the unconstrained action set.
struct BoxSet {
  Vec lower;
  Vec upper;

  static BoxSet unbounded(std::size_t n) {
    return {Vec::Constant(static_cast<Eigen::Index>(n), -kInf),
            Vec::Constant(static_cast<Eigen::Index>(n), kInf)};
  }

  static BoxSet make(Vec lower, Vec upper) {
    if (lower.size() != upper.size()) {
      throw Error(Errc::dimension_mismatch, "box bounds differ in length");
    }
    for (Eigen::Index j = 0; j < lower.size(); ++j) {
      if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j)) {
        throw Error(Errc::invalid_argument,
                    "empty box: lower > upper in coordinate " + std::to_string(j + 1));
      }
    }
    return {std::move(lower), std::move(upper)};
  }

  Eigen::Index dim() const noexcept { return lower.size(); }

  bool is_bounded() const {
    return lower.allFinite() && upper.allFinite();
  }

  bool is_unbounded() const {
    return (lower.array() == -kInf).all() && (upper.array() == kInf).all();
  }

  bool contains(const Eigen::Ref<const Vec>& x, double tol = 0.0) const {
    return x.size() == dim() && (x.array() >= lower.array() - tol).all() &&
           (x.array() <= upper.array() + tol).all();
  }

  Vec project(const Eigen::Ref<const Vec>& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }

  void clamp(Eigen::Ref<Vec> x) const { x = x.cwiseMax(lower).cwiseMin(upper); }
};

/// Cost J_i(x, s) = xᵀ Q x + (D s + d)ᵀ x of one player.
struct QuadraticPlayer {
  Mat Q;
  Mat D;
  Vec d;
};

namespace detail {

inline void check_weights(const Vec& v, std::size_t players, const char* what) {
  if (static_cast<std::size_t>(v.size()) != players) {
    throw Error(Errc::dimension_mismatch,
                std::string(what) + " must have one entry per player");
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0.0) || !std::isfinite(v(i))) {
      throw Error(Errc::invalid_argument, std::string(what) + " entry " +
                                              std::to_string(i + 1) +
                                              " must be a positive finite number");
    }
  }
}

inline std::vector<BoxSet> check_boxes(std::vector<BoxSet> boxes, std::size_t players,
                                       std::size_t n) {
  if (boxes.empty()) {
    boxes.assign(players, BoxSet::unbounded(n));
  }
  if (boxes.size() != players) {
    throw Error(Errc::dimension_mismatch, "need one action box per player");
  }
  for (const BoxSet& b : boxes) {
    BoxSet::make(b.lower, b.upper);
    if (static_cast<std::size_t>(b.dim()) != n) {
      throw Error(Errc::dimension_mismatch, "action box dimension differs from n");
    }
  }
  return boxes;
}

}  // namespace detail

/// Aggregative game with quadratic costs. f_i is affine:
///   f_i(x_i, σ_i) = A_i x_i + D_i σ_i + d_i,  A_i = 2 Q_i + (h_i / N) D_iᵀ.
class QuadraticGame {
 public:
  QuadraticGame(std::vector<QuadraticPlayer> players, Vec weights, Vec gains,
                std::vector<BoxSet> boxes = {})
      : players_(std::move(players)), h_(std::move(weights)), k_(std::move(gains)) {
    if (players_.empty()) throw Error(Errc::invalid_argument, "game has no players");
    n_ = static_cast<std::size_t>(players_.front().d.size());
    if (n_ == 0) throw Error(Errc::invalid_argument, "action dimension must be positive");
    detail::check_weights(h_, players_.size(), "weights h");
    detail::check_weights(k_, players_.size(), "gains k");
    const auto n = static_cast<Eigen::Index>(n_);
    const double big_n = static_cast<double>(players_.size());
    a_.reserve(players_.size());
    for (std::size_t i = 0; i < players_.size(); ++i) {
      const QuadraticPlayer& p = players_[i];
      if (p.Q.rows() != n || p.Q.cols() != n || p.D.rows() != n || p.D.cols() != n ||
          p.d.size() != n) {
        throw Error(Errc::dimension_mismatch,
                    "player " + std::to_string(i + 1) + " has inconsistent Q/D/d sizes");
      }
      if ((p.Q - p.Q.transpose()).norm() > 1e-12 * (1.0 + p.Q.norm())) {
        throw Error(Errc::invalid_argument,
                    "Q of player " + std::to_string(i + 1) + " is not symmetric");
      }
      Eigen::LLT<Mat> llt(p.Q);
      if (llt.info() != Eigen::Success) {
        throw Error(Errc::invalid_argument,
                    "Q of player " + std::to_string(i + 1) + " is not positive definite");
      }
      a_.push_back(2.0 * p.Q + (h_(static_cast<Eigen::Index>(i)) / big_n) * p.D.transpose());
      const bool diagonal = a_.back().isDiagonal(0.0) && p.D.isDiagonal(0.0);
      if (diagonal) {
        a_diag_.push_back(a_.back().diagonal());
        d_diag_.push_back(p.D.diagonal());
      } else {
        a_diag_.emplace_back();
        d_diag_.emplace_back();
      }
    }
    boxes_ = detail::check_boxes(std::move(boxes), players_.size(), n_);
  }

  std::size_t players() const noexcept { return players_.size(); }
  std::size_t dim() const noexcept { return n_; }
  double weight(std::size_t i) const { return h_(index(i)); }
  double gain(std::size_t i) const { return k_(index(i)); }
  const Vec& weights() const noexcept { return h_; }
  const Vec& gains() const noexcept { return k_; }
  const BoxSet& box(std::size_t i) const { return boxes_.at(i); }
  const std::vector<BoxSet>& boxes() const noexcept { return boxes_; }
  const QuadraticPlayer& player(std::size_t i) const { return players_.at(i); }
  const std::vector<QuadraticPlayer>& player_data() const noexcept { return players_; }

  /// A_i = 2 Q_i + (h_i / N) D_iᵀ.
  const Mat& A(std::size_t i) const { return a_.at(i); }

  void eval_f_into(std::size_t i, const Eigen::Ref<const Vec>& x_i,
                   const Eigen::Ref<const Vec>& sigma_i, Eigen::Ref<Vec> out) const {
    index(i);
    if (a_diag_[i].size() != 0) {
      out = a_diag_[i].cwiseProduct(x_i) + d_diag_[i].cwiseProduct(sigma_i) + players_[i].d;
      return;
    }
    out.noalias() = a_[i] * x_i;
    out.noalias() += players_[i].D * sigma_i;
    out += players_[i].d;
  }

  Vec eval_f(std::size_t i, const Eigen::Ref<const Vec>& x_i,
             const Eigen::Ref<const Vec>& sigma_i) const {
    check_block(x_i, sigma_i);
    Vec out(static_cast<Eigen::Index>(n_));
    eval_f_into(i, x_i, sigma_i, out);
    return out;
  }

  QuadraticGame with_gains(Vec gains) const {
    return QuadraticGame(players_, h_, std::move(gains), boxes_);
  }

  QuadraticGame with_boxes(std::vector<BoxSet> boxes) const {
    return QuadraticGame(players_, h_, k_, std::move(boxes));
  }

 private:
  Eigen::Index index(std::size_t i) const {
    if (i >= players_.size()) {
      throw Error(Errc::index_out_of_range, "player index " + std::to_string(i) +
                                                " out of range (N = " +
                                                std::to_string(players_.size()) + ")");
    }
    return static_cast<Eigen::Index>(i);
  }

  void check_block(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& s) const {
    if (static_cast<std::size_t>(x.size()) != n_ || static_cast<std::size_t>(s.size()) != n_) {
      throw Error(Errc::dimension_mismatch, "player action and estimate must have length n");
    }
  }

  std::vector<QuadraticPlayer> players_;
  Vec h_;
  Vec k_;
  std::vector<BoxSet> boxes_;
  std::vector<Mat> a_;
  // Diagonal A_i and D_i (as in the PEV game) are applied elementwise.
  std::vector<Vec> a_diag_;
  std::vector<Vec> d_diag_;
  std::size_t n_ = 0;
};

/// Aggregative game given only through its f_i oracle. Admissibility can then
/// only be checked by sampling.
class GameModel {
 public:
  using Oracle = std::function<Vec(std::size_t, const Vec&, const Vec&)>;

  GameModel(std::size_t players, std::size_t n, Vec weights, Vec gains, Oracle f,
            std::vector<BoxSet> boxes = {}, std::optional<Vec> grad_bounds = std::nullopt)
      : players_(players),
        n_(n),
        h_(std::move(weights)),
        k_(std::move(gains)),
        f_(std::move(f)),
        grad_bounds_(std::move(grad_bounds)) {
    if (players_ == 0 || n_ == 0) {
      throw Error(Errc::invalid_argument, "game needs N >= 1 and n >= 1");
    }
    if (!f_) throw Error(Errc::invalid_argument, "missing f oracle");
    detail::check_weights(h_, players_, "weights h");
    detail::check_weights(k_, players_, "gains k");
    if (grad_bounds_) detail::check_weights(*grad_bounds_, players_, "gradient bounds");
    boxes_ = detail::check_boxes(std::move(boxes), players_, n_);
  }

  static GameModel from(const QuadraticGame& q) {
    std::vector<QuadraticPlayer> data = q.player_data();
    Vec bounds(static_cast<Eigen::Index>(q.players()));
    for (std::size_t i = 0; i < q.players(); ++i) {
      Mat block(q.dim(), 2 * q.dim());
      block << q.A(i), q.player(i).D;
      bounds(static_cast<Eigen::Index>(i)) = spectral_norm(block);
    }
    auto oracle = [q](std::size_t i, const Vec& x, const Vec& s) { return q.eval_f(i, x, s); };
    return GameModel(q.players(), q.dim(), q.weights(), q.gains(), oracle, q.boxes(), bounds);
  }

  std::size_t players() const noexcept { return players_; }
  std::size_t dim() const noexcept { return n_; }
  double weight(std::size_t i) const { return h_(index(i)); }
  double gain(std::size_t i) const { return k_(index(i)); }
  const Vec& weights() const noexcept { return h_; }
  const Vec& gains() const noexcept { return k_; }
  const BoxSet& box(std::size_t i) const { return boxes_.at(i); }
  const std::vector<BoxSet>& boxes() const noexcept { return boxes_; }
  const std::optional<Vec>& grad_bounds() const noexcept { return grad_bounds_; }
  const Oracle& oracle() const noexcept { return f_; }

  void eval_f_into(std::size_t i, const Eigen::Ref<const Vec>& x_i,
                   const Eigen::Ref<const Vec>& sigma_i, Eigen::Ref<Vec> out) const {
    index(i);
    Vec r = f_(i, Vec(x_i), Vec(sigma_i));
    if (static_cast<std::size_t>(r.size()) != n_) {
      throw Error(Errc::dimension_mismatch, "f oracle returned a vector of wrong length");
    }
    out = r;
  }

  Vec eval_f(std::size_t i, const Eigen::Ref<const Vec>& x_i,
             const Eigen::Ref<const Vec>& sigma_i) const {
    Vec out(static_cast<Eigen::Index>(n_));
    eval_f_into(i, x_i, sigma_i, out);
    return out;
  }

  GameModel with_gains(Vec gains) const {
    return GameModel(players_, n_, h_, std::move(gains), f_, boxes_, grad_bounds_);
  }

 private:
  Eigen::Index index(std::size_t i) const {
    if (i >= players_) {
      throw Error(Errc::index_out_of_range, "player index " + std::to_string(i) +
                                                " out of range (N = " +
                                                std::to_string(players_) + ")");
    }
    return static_cast<Eigen::Index>(i);
  }

  std::size_t players_;
  std::size_t n_;
  Vec h_;
  Vec k_;
  Oracle f_;
  std::vector<BoxSet> boxes_;
  std::optional<Vec> grad_bounds_;
};

template <class G>
concept AggregativeGame = requires(const G& g, std::size_t i, const Vec& v, Vec& out) {
  { g.players() } -> std::convertible_to<std::size_t>;
  { g.dim() } -> std::convertible_to<std::size_t>;
  { g.weight(i) } -> std::convertible_to<double>;
  { g.gain(i) } -> std::convertible_to<double>;
  { g.box(i) } -> std::convertible_to<const BoxSet&>;
  g.eval_f_into(i, v, v, out);
};

// ---------------------------------------------------------------------------
// Stacked evaluations

/// s(x) = (1/N) Σ_j h_j x_j.
template <AggregativeGame G>
Vec aggregate(const G& game, const Eigen::Ref<const Vec>& x) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  if (x.size() != n * static_cast<Eigen::Index>(game.players())) {
    throw Error(Errc::dimension_mismatch, "stacked action has wrong length");
  }
  Vec s = Vec::Zero(n);
  for (std::size_t j = 0; j < game.players(); ++j) {
    s += game.weight(j) * x.segment(static_cast<Eigen::Index>(j) * n, n);
  }
  return s / static_cast<double>(game.players());
}

/// out = col(f_i(x_i, σ_i)).
template <AggregativeGame G>
void stacked_f_into(const G& game, const Eigen::Ref<const Vec>& x,
                    const Eigen::Ref<const Vec>& sigma, Eigen::Ref<Vec> out) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  for (std::size_t i = 0; i < game.players(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * n;
    game.eval_f_into(i, x.segment(off, n), sigma.segment(off, n), out.segment(off, n));
  }
}

/// Pseudo-gradient col(f_i(x_i, s(x))).
template <AggregativeGame G>
Vec pseudo_gradient(const G& game, const Eigen::Ref<const Vec>& x) {
  const Vec s = aggregate(game, x);
  const Vec sigma = s.replicate(static_cast<Eigen::Index>(game.players()), 1);
  Vec out(x.size());
  stacked_f_into(game, x, sigma, out);
  return out;
}

/// Weighted pseudo-gradient K col(f_i(x_i, s(x))).
template <AggregativeGame G>
Vec weighted_pseudo_gradient(const G& game, const Eigen::Ref<const Vec>& x) {
  Vec g = pseudo_gradient(game, x);
  const auto n = static_cast<Eigen::Index>(game.dim());
  for (std::size_t i = 0; i < game.players(); ++i) {
    g.segment(static_cast<Eigen::Index>(i) * n, n) *= game.gain(i);
  }
  return g;
}

/// F(x, σ) = col(K col(f_i(x_i, σ_i)), σ − H x).
template <AggregativeGame G>
Vec extended_operator(const G& game, const Eigen::Ref<const Vec>& x,
                      const Eigen::Ref<const Vec>& sigma) {
  const Eigen::Index len = x.size();
  const auto n = static_cast<Eigen::Index>(game.dim());
  Vec out(2 * len);
  stacked_f_into(game, x, sigma, out.head(len));
  for (std::size_t i = 0; i < game.players(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * n;
    out.segment(off, n) *= game.gain(i);
    out.segment(len + off, n) = sigma.segment(off, n) - game.weight(i) * x.segment(off, n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Admissibility constants for quadratic games

struct PlayerConstants {
  double mu = 0.0;   ///< λ_min(2Q + h (D + Dᵀ) / (2N))
  double ell = 0.0;  ///< ‖D‖₂
};

inline PlayerConstants mu_ell(const QuadraticGame& game, std::size_t i) {
  const QuadraticPlayer& p = game.player(i);
  const double big_n = static_cast<double>(game.players());
  const Mat m = 2.0 * p.Q + game.weight(i) * (p.D + p.D.transpose()) / (2.0 * big_n);
  return {min_sym_eigenvalue(m), spectral_norm(p.D)};
}

/// Per-player verdict of μ_i > ℓ_i h_i.
inline std::vector<bool> check_assumption2(const QuadraticGame& game) {
  std::vector<bool> verdict(game.players());
  for (std::size_t i = 0; i < game.players(); ++i) {
    const PlayerConstants c = mu_ell(game, i);
    verdict[i] = c.mu > c.ell * game.weight(i);
  }
  return verdict;
}

/// Open interval of admissible gains.
struct GainInterval {
  double lo = 0.0;
  double hi = kInf;

  bool contains(double k) const noexcept { return k > lo && k < hi; }

  /// Arithmetic midpoint; for the scalar-affine interval this is
  /// (2c + aN) / (aN)².
  double midpoint() const noexcept { return std::isfinite(hi) ? 0.5 * (lo + hi) : 1.0; }

  /// Geometric midpoint; 1 when the interval is (0, ∞).
  double log_midpoint() const noexcept {
    if (lo <= 0.0 || !std::isfinite(hi)) return 1.0;
    return std::sqrt(lo * hi);
  }
};

/// k ∈ ((√μ − √(μ−ℓh))² / ℓ², (√μ + √(μ−ℓh))² / ℓ²).
inline GainInterval gain_interval(double mu, double ell, double h) {
  if (ell < 0.0 || h <= 0.0) {
    throw Error(Errc::invalid_argument, "need ell >= 0 and h > 0");
  }
  if (ell == 0.0) {
    if (mu <= 0.0) throw Error(Errc::interval_undefined, "mu must be positive");
    return {0.0, kInf};
  }
  if (!(mu > ell * h)) {
    throw Error(Errc::interval_undefined,
                "mu = " + std::to_string(mu) + " does not exceed ell*h = " +
                    std::to_string(ell * h));
  }
  const double root_mu = std::sqrt(mu);
  const double root_gap = std::sqrt(mu - ell * h);
  const double ell2 = ell * ell;
  return {(root_mu - root_gap) * (root_mu - root_gap) / ell2,
          (root_mu + root_gap) * (root_mu + root_gap) / ell2};
}

/// Gain interval for scalar-form affine maps f = c x + aN σ + const with unit
/// weight: the exact strong-monotonicity region of col(k f, σ − x), i.e.
/// ((√c − √(c + aN))² / (aN)², (√c + √(c + aN))² / (aN)²).
inline GainInterval relaxed_gain_interval_affine(double c, double a, std::size_t players) {
  if (!(c > 0.0) || a < 0.0) {
    throw Error(Errc::invalid_argument, "need c > 0 and a >= 0");
  }
  const double coupling = a * static_cast<double>(players);
  if (coupling == 0.0) return {0.0, kInf};
  const double rc = std::sqrt(c);
  const double rcn = std::sqrt(c + coupling);
  const double c2 = coupling * coupling;
  return {(rc - rcn) * (rc - rcn) / c2, (rc + rcn) * (rc + rcn) / c2};
}

/// [[k μ, −(k ℓ + h)/2], [−(k ℓ + h)/2, 1]].
inline Eigen::Matrix2d monotonicity_matrix(double mu, double ell, double h, double k) {
  const double off = -(k * ell + h) / 2.0;
  Eigen::Matrix2d m;
  m << k * mu, off, off, 1.0;
  return m;
}

/// λ_min of the per-player 2x2 monotonicity matrix (closed form).
inline double player_epsilon(double mu, double ell, double h, double k) {
  const Eigen::Matrix2d m = monotonicity_matrix(mu, ell, h, k);
  const double tr = m.trace();
  const double det = m.determinant();
  return 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
}

/// ε = min_i ε_i; throws unless every 2x2 matrix is positive definite.
inline double compute_epsilon(const QuadraticGame& game) {
  double eps = kInf;
  for (std::size_t i = 0; i < game.players(); ++i) {
    const PlayerConstants c = mu_ell(game, i);
    const double e = player_epsilon(c.mu, c.ell, game.weight(i), game.gain(i));
    if (!(e > 0.0)) {
      throw Error(Errc::not_strongly_monotone,
                  "player " + std::to_string(i + 1) + ": gain k = " +
                      std::to_string(game.gain(i)) +
                      " does not make the 2x2 monotonicity matrix positive definite");
    }
    eps = std::min(eps, e);
  }
  return eps;
}

/// Jacobian of col(k_i f_i, σ_i − h_i x_i) for player i (constant for
/// quadratic games), ordered (x_i, σ_i).
inline Mat player_operator_jacobian(const QuadraticGame& game, std::size_t i) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  Mat j(2 * n, 2 * n);
  j.topLeftCorner(n, n) = game.gain(i) * game.A(i);
  j.topRightCorner(n, n) = game.gain(i) * game.player(i).D;
  j.bottomLeftCorner(n, n) = -game.weight(i) * Mat::Identity(n, n);
  j.bottomRightCorner(n, n).setIdentity();
  return j;
}

/// Exact strong-monotonicity modulus of F for a quadratic game. F is
/// separable across players, so this is min_i λ_min(sym(J_i)). Unlike
/// `compute_epsilon` it does not need μ_i > ℓ_i h_i and covers gains chosen
/// by the relaxed, case-study style condition.
inline double exact_epsilon(const QuadraticGame& game) {
  double eps = kInf;
  for (std::size_t i = 0; i < game.players(); ++i) {
    eps = std::min(eps, min_sym_eigenvalue(player_operator_jacobian(game, i)));
  }
  return eps;
}

/// γ_i = ‖[A_i D_i]‖₂, a bound on ‖∇f_i‖.
inline double gradient_bound(const QuadraticGame& game, std::size_t i) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  Mat block(n, 2 * n);
  block << game.A(i), game.player(i).D;
  return spectral_norm(block);
}

/// Dense Jacobian of the pseudo-gradient x ↦ col(f_i(x_i, s(x))).
inline Mat pseudo_gradient_jacobian(const QuadraticGame& game) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  Mat m = Mat::Zero(n * big_n, n * big_n);
  for (Eigen::Index i = 0; i < big_n; ++i) {
    const QuadraticPlayer& p = game.player(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < big_n; ++j) {
      m.block(i * n, j * n, n, n) =
          (game.weight(static_cast<std::size_t>(j)) / static_cast<double>(big_n)) * p.D;
    }
    m.block(i * n, i * n, n, n) += game.A(static_cast<std::size_t>(i));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sampled monotonicity

struct MonotonicityReport {
  std::size_t trials = 0;
  double min_ratio = kInf;       ///< min ⟨z − z′, T(z) − T(z′)⟩ / ‖z − z′‖²
  std::size_t nonpositive = 0;   ///< pairs with ratio <= 0
  std::size_t below_threshold = 0;

  bool passed() const noexcept { return nonpositive == 0; }
};

/// Draws `trials` pairs uniformly from `region` (a product of intervals, one
/// per coordinate of z) and records the monotonicity ratio of `op`. Pairs with
/// a ratio below `threshold` are counted separately.
template <class Op>
MonotonicityReport sample_operator_monotonicity(Op&& op, const BoxSet& region,
                                                std::size_t trials, std::uint64_t seed,
                                                double threshold = 0.0) {
  if (trials == 0) throw Error(Errc::invalid_argument, "trials must be >= 1");
  if (!region.is_bounded()) {
    throw Error(Errc::invalid_argument, "sampling region must be bounded");
  }
  RandomStream rng(seed, streams::sampling);
  MonotonicityReport report;
  const Eigen::Index dim = region.dim();
  Vec z(dim), w(dim);
  for (std::size_t t = 0; t < trials; ++t) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      z(j) = rng.uniform(region.lower(j), region.upper(j));
      w(j) = rng.uniform(region.lower(j), region.upper(j));
    }
    const Vec diff = z - w;
    const double denom = diff.squaredNorm();
    if (denom == 0.0) continue;
    const double ratio = diff.dot(op(z) - op(w)) / denom;
    ++report.trials;
    report.min_ratio = std::min(report.min_ratio, ratio);
    if (ratio <= 0.0) ++report.nonpositive;
    if (ratio < threshold) ++report.below_threshold;
  }
  return report;
}

/// Sampling region over stacked (x, σ): each action box widened by 50% around
/// its center, and σ in the hull of {h_i x_i} widened the same way.
template <AggregativeGame G>
BoxSet default_sampling_region(const G& game) {
  const auto n = static_cast<Eigen::Index>(game.dim());
  const auto big_n = static_cast<Eigen::Index>(game.players());
  BoxSet region{Vec(2 * n * big_n), Vec(2 * n * big_n)};
  Vec hull_lo = Vec::Constant(n, kInf);
  Vec hull_hi = Vec::Constant(n, -kInf);
  for (Eigen::Index i = 0; i < big_n; ++i) {
    const BoxSet& b = game.box(static_cast<std::size_t>(i));
    if (!b.is_bounded()) {
      throw Error(Errc::invalid_argument,
                  "default sampling region needs bounded action boxes");
    }
    const Vec center = 0.5 * (b.lower + b.upper);
    const Vec half = 0.75 * (b.upper - b.lower);
    region.lower.segment(i * n, n) = center - half;
    region.upper.segment(i * n, n) = center + half;
    const double h = game.weight(static_cast<std::size_t>(i));
    hull_lo = hull_lo.cwiseMin(h * b.lower);
    hull_hi = hull_hi.cwiseMax(h * b.upper);
  }
  const Vec center = 0.5 * (hull_lo + hull_hi);
  const Vec half = 0.75 * (hull_hi - hull_lo);
  for (Eigen::Index i = 0; i < big_n; ++i) {
    region.lower.segment(n * big_n + i * n, n) = center - half;
    region.upper.segment(n * big_n + i * n, n) = center + half;
  }
  return region;
}

/// Sampled strong-monotonicity check of F(x, σ) over `region` (stacked x then
/// σ). `threshold` is typically an ε to verify against.
template <AggregativeGame G>
MonotonicityReport sample_monotonicity_check(const G& game, std::size_t trials,
                                             std::uint64_t seed, const BoxSet& region,
                                             double threshold = 0.0) {
  const Eigen::Index len =
      static_cast<Eigen::Index>(game.players() * game.dim());
  if (region.dim() != 2 * len) {
    throw Error(Errc::dimension_mismatch, "sampling region must cover (x, sigma)");
  }
  auto op = [&](const Vec& z) { return extended_operator(game, z.head(len), z.tail(len)); };
  return sample_operator_monotonicity(op, region, trials, seed, threshold);
}

template <AggregativeGame G>
MonotonicityReport sample_monotonicity_check(const G& game, std::size_t trials,
                                             std::uint64_t seed) {
  return sample_monotonicity_check(game, trials, seed, default_sampling_region(game));
}

/// Sampled check of x ↦ K col(f_i(x_i, s(x))) over the x-part of `region`.
template <AggregativeGame G>
MonotonicityReport sample_pseudo_gradient_monotonicity(const G& game, std::size_t trials,
                                                       std::uint64_t seed,
                                                       const BoxSet& x_region,
                                                       double threshold = 0.0) {
  auto op = [&](const Vec& x) { return weighted_pseudo_gradient(game, x); };
  return sample_operator_monotonicity(op, x_region, trials, seed, threshold);
}

}  // namespace aggnash
