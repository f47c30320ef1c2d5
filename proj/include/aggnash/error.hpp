#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aggnash {

enum class Errc {
  disconnected_graph,
  invalid_edge,
  dimension_mismatch,
  index_out_of_range,
  invalid_argument,
  interval_undefined,
  not_strongly_monotone,
  singular_system,
  non_finite_state,
  infeasible_initial_state,
  point_outside_set,
  grid_mismatch,
  non_positive_scaling,
  weights_not_unit,
  certificate_failure,
  missing_equilibrium,
  infeasible_player,
  config_error,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::disconnected_graph: return "DisconnectedGraph";
    case Errc::invalid_edge: return "InvalidEdge";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::interval_undefined: return "IntervalUndefined";
    case Errc::not_strongly_monotone: return "NotStronglyMonotone";
    case Errc::singular_system: return "SingularSystem";
    case Errc::non_finite_state: return "NonFiniteState";
    case Errc::infeasible_initial_state: return "InfeasibleInitialState";
    case Errc::point_outside_set: return "PointOutsideSet";
    case Errc::grid_mismatch: return "GridMismatch";
    case Errc::non_positive_scaling: return "NonPositiveScaling";
    case Errc::weights_not_unit: return "WeightsNotUnit";
    case Errc::certificate_failure: return "CertificateFailure";
    case Errc::missing_equilibrium: return "MissingEquilibrium";
    case Errc::infeasible_player: return "InfeasiblePlayer";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

/// Numeric failures map to CLI exit code 2; everything else is a usage or
/// input problem (exit code 1).
constexpr bool is_numeric_failure(Errc code) noexcept {
  switch (code) {
    case Errc::non_finite_state:
    case Errc::certificate_failure:
    case Errc::singular_system:
    case Errc::not_strongly_monotone:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace aggnash
