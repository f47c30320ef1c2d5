#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "aggnash/error.hpp"
#include "aggnash/game.hpp"
#include "aggnash/graph.hpp"
#include "aggnash/linalg.hpp"
#include "aggnash/rng.hpp"

namespace aggnash {

/// Exact projection of `v` onto the tangent cone of `box` at `x`.
inline Vec tangent_project(const BoxSet& box, const Eigen::Ref<const Vec>& x,
                           const Eigen::Ref<const Vec>& v) {
  if (x.size() != box.dim() || v.size() != box.dim()) {
    throw Error(Errc::dimension_mismatch, "tangent_project: size mismatch");
  }
  if (!box.contains(x)) {
    throw Error(Errc::point_outside_set, "tangent_project: x is not in the box");
  }
  Vec out = v;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if ((x(j) == box.lower(j) && v(j) < 0.0) || (x(j) == box.upper(j) && v(j) > 0.0)) {
      out(j) = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Disturbances

struct ZohUniform {
  double amplitude = 0.0;
  double hold = 0.1;
  std::uint64_t seed = 0;
};

struct Sinusoid {
  double amplitude = 0.0;
  double angular_frequency = 0.0;
  double phase = 0.0;
};

using DisturbanceTerm = std::variant<ZohUniform, Sinusoid>;

/// Disturbance ν(t) on the stacked (x, σ) block: one list of additive terms
/// per coordinate.
struct DisturbanceSignal {
  std::vector<std::vector<DisturbanceTerm>> coords;

  std::size_t dim() const noexcept { return coords.size(); }

  /// Σ of term amplitudes for one coordinate, a bound on |ν_j(t)|.
  double amplitude_bound(std::size_t j) const {
    double a = 0.0;
    for (const DisturbanceTerm& term : coords.at(j)) {
      a += std::visit([](const auto& c) { return std::abs(c.amplitude); }, term);
    }
    return a;
  }

  /// Bound on sup_t ‖ν(t)‖₂.
  double norm_bound() const {
    double sq = 0.0;
    for (std::size_t j = 0; j < coords.size(); ++j) {
      const double a = amplitude_bound(j);
      sq += a * a;
    }
    return std::sqrt(sq);
  }
};

/// Value of one zero-order-hold term for coordinate `coord` at time `t`.
/// Each coordinate draws from its own substream, segment m from counter m.
inline double zoh_value(const ZohUniform& z, std::size_t coord, double t) {
  const auto segment = static_cast<std::uint64_t>(std::floor(t / z.hold + 1e-9));
  const std::uint64_t stream = (streams::disturbance << 32) | static_cast<std::uint64_t>(coord);
  const double u = counter_uniform(z.seed, stream, segment);
  return z.amplitude * (2.0 * u - 1.0);
}

inline void eval_disturbance_into(const DisturbanceSignal& sig, double t, Eigen::Ref<Vec> out) {
  if (static_cast<std::size_t>(out.size()) != sig.dim()) {
    throw Error(Errc::dimension_mismatch, "disturbance dimension mismatch");
  }
  for (std::size_t j = 0; j < sig.coords.size(); ++j) {
    double v = 0.0;
    for (const DisturbanceTerm& term : sig.coords[j]) {
      if (const auto* z = std::get_if<ZohUniform>(&term)) {
        v += zoh_value(*z, j, t);
      } else {
        const auto& s = std::get<Sinusoid>(term);
        v += s.amplitude * std::sin(s.angular_frequency * t + s.phase);
      }
    }
    out(static_cast<Eigen::Index>(j)) = v;
  }
}

inline Vec eval_disturbance(const DisturbanceSignal& sig, double t) {
  Vec out(static_cast<Eigen::Index>(sig.dim()));
  eval_disturbance_into(sig, t, out);
  return out;
}

// ---------------------------------------------------------------------------
// State, trace and flow variants

struct SimState {
  Vec x;
  Vec sigma;
  Vec psi;
  std::optional<Vec> lambda;
  double t = 0.0;
};

struct Trace {
  std::vector<double> times;
  std::vector<SimState> states;
  std::vector<Vec> psi_mean;      ///< (1/N)(𝟙ᵀ ⊗ Iₙ) ψ per sample
  std::vector<double> dist_norm;  ///< ‖ν(t)‖ per sample (0 when undisturbed)
  std::vector<double> dist_sup;   ///< running sup of ‖ν‖ over [0, t]
  std::size_t players = 0;
  std::size_t dim = 0;
  double dt = 0.0;
  std::size_t stride = 1;

  std::size_t size() const noexcept { return times.size(); }
  const SimState& back() const { return states.back(); }
};

struct UnconstrainedFlow {};
struct DisturbedFlow {
  DisturbanceSignal nu;
};
struct ProjectedFlow {};
/// Budget constraints 𝟙ᵀ x_i = γ_i handled through multipliers λ_i.
struct LagrangianFlow {
  Vec budgets;
};

using FlowVariant = std::variant<UnconstrainedFlow, DisturbedFlow, ProjectedFlow, LagrangianFlow>;

inline const char* flow_name(const FlowVariant& v) noexcept {
  switch (v.index()) {
    case 0: return "unconstrained";
    case 1: return "disturbed";
    case 2: return "projected";
    default: return "lagrangian";
  }
}

struct SimOptions {
  double dt = 1e-3;
  double t_end = 1.0;
  std::size_t stride = 1;
  double divergence_bound = 1e9;
};

/// Right-hand side of the unconstrained flow
///   ẋ = −K col(f_i(x_i, σ_i)),  σ̇ = −σ + H x − (L ⊗ Iₙ) ψ,  ψ̇ = (L ⊗ Iₙ) σ.
template <AggregativeGame G>
SimState rhs_unconstrained(const G& game, const GraphTopology& graph, const SimState& s) {
  const auto len = static_cast<Eigen::Index>(game.players() * game.dim());
  if (graph.size() != game.players()) {
    throw Error(Errc::dimension_mismatch, "graph and game disagree on N");
  }
  if (s.x.size() != len || s.sigma.size() != len || s.psi.size() != len) {
    throw Error(Errc::dimension_mismatch, "state blocks must have length N*n");
  }
  const auto n = static_cast<Eigen::Index>(game.dim());
  SimState d;
  d.t = s.t;
  d.x.resize(len);
  stacked_f_into(game, s.x, s.sigma, d.x);
  d.sigma = graph.kron_apply(GraphOperator::laplacian, s.psi, game.dim());
  d.psi = graph.kron_apply(GraphOperator::laplacian, s.sigma, game.dim());
  for (std::size_t i = 0; i < game.players(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * n;
    d.x.segment(off, n) *= -game.gain(i);
    d.sigma.segment(off, n) =
        -s.sigma.segment(off, n) + game.weight(i) * s.x.segment(off, n) - d.sigma.segment(off, n);
  }
  return d;
}

namespace detail {

/// Flat layout z = (x, σ, ψ, λ) used by the integrator.
template <AggregativeGame G>
class FlowSystem {
 public:
  FlowSystem(const G& game, const GraphTopology& graph, const FlowVariant& flow)
      : game_(game), graph_(graph), flow_(flow) {
    n_ = static_cast<Eigen::Index>(game.dim());
    len_ = n_ * static_cast<Eigen::Index>(game.players());
    lagrangian_ = std::holds_alternative<LagrangianFlow>(flow);
    projected_ = lagrangian_ || std::holds_alternative<ProjectedFlow>(flow);
    if (const auto* d = std::get_if<DisturbedFlow>(&flow)) {
      if (static_cast<Eigen::Index>(d->nu.dim()) != 2 * len_) {
        throw Error(Errc::dimension_mismatch, "disturbance must have dimension 2*N*n");
      }
      nu_ = &d->nu;
      nu_buf_.resize(2 * len_);
    }
    if (lagrangian_) {
      budgets_ = &std::get<LagrangianFlow>(flow).budgets;
      if (budgets_->size() != static_cast<Eigen::Index>(game.players())) {
        throw Error(Errc::dimension_mismatch, "need one budget per player");
      }
    }
    tmp_.resize(len_);
    xs_.resize(len_);
  }

  Eigen::Index size() const noexcept {
    return 3 * len_ + (lagrangian_ ? static_cast<Eigen::Index>(game_.players()) : 0);
  }
  bool projected() const noexcept { return projected_; }
  bool lagrangian() const noexcept { return lagrangian_; }
  Eigen::Index len() const noexcept { return len_; }

  /// Returns ‖ν(t)‖ (0 if undisturbed).
  double eval(double t, const Vec& z, Eigen::Ref<Vec> dz) {
    const auto x_in = z.segment(0, len_);
    const auto sigma = z.segment(len_, len_);
    const auto psi = z.segment(2 * len_, len_);
    xs_ = x_in;
    if (projected_) clamp_x(xs_);

    auto dx = dz.segment(0, len_);
    auto dsigma = dz.segment(len_, len_);
    auto dpsi = dz.segment(2 * len_, len_);
    stacked_f_into(game_, xs_, sigma, dx);
    graph_.kron_apply_into(GraphOperator::laplacian, psi, game_.dim(), tmp_);
    graph_.kron_apply_into(GraphOperator::laplacian, sigma, game_.dim(), dpsi);
    for (std::size_t i = 0; i < game_.players(); ++i) {
      const Eigen::Index off = static_cast<Eigen::Index>(i) * n_;
      dx.segment(off, n_) *= -game_.gain(i);
      if (lagrangian_) {
        dx.segment(off, n_).array() -= z(3 * len_ + static_cast<Eigen::Index>(i));
      }
      dsigma.segment(off, n_) =
          game_.weight(i) * xs_.segment(off, n_) - sigma.segment(off, n_) - tmp_.segment(off, n_);
    }
    double nu_norm = 0.0;
    if (nu_ != nullptr) {
      eval_disturbance_into(*nu_, t, nu_buf_);
      dz.segment(0, 2 * len_) += nu_buf_;
      nu_norm = nu_buf_.norm();
    }
    if (projected_) {
      for (std::size_t i = 0; i < game_.players(); ++i) {
        const Eigen::Index off = static_cast<Eigen::Index>(i) * n_;
        const BoxSet& box = game_.box(i);
        for (Eigen::Index j = 0; j < n_; ++j) {
          const double xv = xs_(off + j);
          double& v = dx(off + j);
          if ((xv == box.lower(j) && v < 0.0) || (xv == box.upper(j) && v > 0.0)) v = 0.0;
        }
      }
    }
    if (lagrangian_) {
      for (std::size_t i = 0; i < game_.players(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        dz(3 * len_ + ii) = xs_.segment(ii * n_, n_).sum() - (*budgets_)(ii);
      }
    }
    return nu_norm;
  }

  void clamp_x(Eigen::Ref<Vec> x) const {
    for (std::size_t i = 0; i < game_.players(); ++i) {
      game_.box(i).clamp(x.segment(static_cast<Eigen::Index>(i) * n_, n_));
    }
  }

 private:
  const G& game_;
  const GraphTopology& graph_;
  const FlowVariant& flow_;
  const DisturbanceSignal* nu_ = nullptr;
  const Vec* budgets_ = nullptr;
  Eigen::Index n_ = 0;
  Eigen::Index len_ = 0;
  bool projected_ = false;
  bool lagrangian_ = false;
  Vec tmp_;
  Vec xs_;
  Vec nu_buf_;
};

}  // namespace detail

/// Integrates one of the four flows with classical fixed-step RK4 and records
/// every `stride`-th step. Projected variants use the exact tangent-cone
/// projection inside each stage and clamp x to the boxes after each step.
template <AggregativeGame G>
Trace simulate(const G& game, const GraphTopology& graph, const FlowVariant& flow,
               const SimState& init, const SimOptions& opt) {
  if (graph.size() != game.players()) {
    throw Error(Errc::dimension_mismatch, "graph and game disagree on N");
  }
  if (!(opt.dt > 0.0) || !(opt.t_end >= 0.0) || opt.stride == 0) {
    throw Error(Errc::invalid_argument, "need dt > 0, t_end >= 0 and stride >= 1");
  }
  const double steps_real = opt.t_end / opt.dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-6 * std::max(1.0, steps_real)) {
    throw Error(Errc::invalid_argument, "t_end must be an integer multiple of dt");
  }
  if (steps % opt.stride != 0) {
    throw Error(Errc::invalid_argument, "number of steps must be a multiple of stride");
  }

  detail::FlowSystem<G> sys(game, graph, flow);
  const Eigen::Index len = sys.len();
  if (init.x.size() != len || init.sigma.size() != len || init.psi.size() != len) {
    throw Error(Errc::dimension_mismatch, "initial state blocks must have length N*n");
  }
  const auto big_n = static_cast<Eigen::Index>(game.players());
  const auto n = static_cast<Eigen::Index>(game.dim());
  if (sys.lagrangian() && (!init.lambda || init.lambda->size() != big_n)) {
    throw Error(Errc::dimension_mismatch, "lagrangian flow needs an initial lambda of length N");
  }
  if (sys.projected()) {
    for (std::size_t i = 0; i < game.players(); ++i) {
      if (!game.box(i).contains(init.x.segment(static_cast<Eigen::Index>(i) * n, n))) {
        throw Error(Errc::infeasible_initial_state,
                    "x(0) of player " + std::to_string(i + 1) + " is outside its box");
      }
    }
  }

  Vec z(sys.size());
  z.segment(0, len) = init.x;
  z.segment(len, len) = init.sigma;
  z.segment(2 * len, len) = init.psi;
  if (sys.lagrangian()) z.tail(big_n) = *init.lambda;
  if (!z.allFinite()) throw Error(Errc::non_finite_state, "initial state is not finite");

  Trace trace;
  trace.players = game.players();
  trace.dim = game.dim();
  trace.dt = opt.dt;
  trace.stride = opt.stride;
  const std::size_t samples = steps / opt.stride + 1;
  trace.times.reserve(samples);
  trace.states.reserve(samples);
  trace.psi_mean.reserve(samples);
  trace.dist_norm.reserve(samples);
  trace.dist_sup.reserve(samples);

  Vec k1(z.size()), k2(z.size()), k3(z.size()), k4(z.size()), stage(z.size());
  double sup = 0.0;
  double nu_now = 0.0;

  auto record = [&](std::size_t step) {
    SimState s;
    s.t = static_cast<double>(step) * opt.dt;
    s.x = z.segment(0, len);
    s.sigma = z.segment(len, len);
    s.psi = z.segment(2 * len, len);
    if (sys.lagrangian()) s.lambda = z.tail(big_n);
    Vec mean = Vec::Zero(n);
    for (Eigen::Index i = 0; i < big_n; ++i) mean += s.psi.segment(i * n, n);
    trace.psi_mean.push_back(mean / static_cast<double>(big_n));
    trace.times.push_back(s.t);
    trace.states.push_back(std::move(s));
    trace.dist_norm.push_back(nu_now);
    trace.dist_sup.push_back(sup);
  };

  // ‖ν(0)‖ enters the sup before the first sample.
  nu_now = sys.eval(0.0, z, k1);
  sup = nu_now;
  record(0);

  const double h = opt.dt;
  const double bound_sq = opt.divergence_bound * opt.divergence_bound;
  for (std::size_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * h;
    sup = std::max(sup, sys.eval(t, z, k1));
    stage = z + 0.5 * h * k1;
    sup = std::max(sup, sys.eval(t + 0.5 * h, stage, k2));
    stage = z + 0.5 * h * k2;
    sys.eval(t + 0.5 * h, stage, k3);
    stage = z + h * k3;
    const double t_next = static_cast<double>(step + 1) * h;
    nu_now = sys.eval(t_next, stage, k4);
    sup = std::max(sup, nu_now);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (sys.projected()) sys.clamp_x(z.segment(0, len));
    const double norm_sq = z.squaredNorm();
    if (!std::isfinite(norm_sq) || norm_sq > bound_sq) {
      throw Error(Errc::non_finite_state,
                  "state diverged at t = " + std::to_string(t_next) +
                      " (check that the gains are admissible)");
    }
    if ((step + 1) % opt.stride == 0) record(step + 1);
  }
  return trace;
}

/// max over samples of ‖(𝟙ᵀ ⊗ Iₙ)(ψ(t) − ψ(0))‖∞.
inline double conservation_drift(const Trace& trace) {
  if (trace.psi_mean.empty()) return 0.0;
  double drift = 0.0;
  const double big_n = static_cast<double>(trace.players);
  for (const Vec& m : trace.psi_mean) {
    drift = std::max(drift, big_n * (m - trace.psi_mean.front()).cwiseAbs().maxCoeff());
  }
  return drift;
}

}  // namespace aggnash
