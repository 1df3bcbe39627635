#pragma once

#include "covrecon/geometry.hpp"
#include "covrecon/importance.hpp"
#include "covrecon/partition.hpp"
#include "covrecon/qp.hpp"
#include "covrecon/sensing.hpp"

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace covrecon {

struct ControlParams {
  double gamma = 0.012;  ///< prescribed decay rate of J
  double a1 = 1.0;       ///< sampling-performance class-K gain
  double a2 = 1.0;       ///< pitch barrier gain
  double a3 = 1.0;       ///< collision barrier gain
  double a4 = 1.0;       ///< flight-boundary barrier gain
  double epsilon = 0.01;
  double d = 1.0;        ///< minimum separation, meters
  double theta_v_min = std::numbers::pi / 3;
  double theta_v_max = std::numbers::pi / 2;
  Vec5d u_max = Vec5d::Ones();
  /// Use (range/2)^2 as the pitch barrier's leading term, whose zero set is
  /// exactly [theta_v_min, theta_v_max]. The default uses range^2.
  bool pitch_barrier_halfrange = false;
  /// Add a collision row for every other drone instead of only the closest.
  /// The closest-only row lets a drone squeezed between two near-equidistant
  /// neighbours alternate rows and close in on both.
  bool collision_all_neighbors = false;
  /// Input components held at zero (e.g. altitude or gimbal pitch).
  std::array<bool, 5> locked{};

  void validate() const;
  double pitch_mid() const { return 0.5 * (theta_v_min + theta_v_max); }
  /// Half-width of the pitch barrier's zero superlevel set.
  double pitch_half_width() const {
    const double range = theta_v_max - theta_v_min;
    return pitch_barrier_halfrange ? 0.5 * range : range;
  }
  bool operator==(const ControlParams&) const = default;
};

/// Violation margins tolerated before a state counts as unsafe.
struct SafetyTolerance {
  double distance = 0.05;  ///< meters below d, and outside the flight box
  double pitch = 0.01;     ///< radians outside the pitch barrier set
};

/// normal' u + offset >= 0.
struct LinearRow {
  Vec5d normal = Vec5d::Zero();
  double offset = 0.0;
};

struct SamplingCoefficients {
  Vec5d xi1 = Vec5d::Zero();
  double xi2 = 0.0;
};

/// Everything compute_control reads; all references are to an immutable
/// snapshot of the current step.
struct ControlSnapshot {
  std::span<const DroneStated> drones;
  const PartitionAssignment& partition;
  const SensingTable& h1;
  const FieldSensord& sensor;
  const ImportanceField& importance;
  const Regiond& flight_region;
};

SamplingCoefficients sampling_constraint_coeffs(std::size_t drone, const ControlSnapshot& snap,
                                                const SensingParamsd& sensing, const ControlParams& control);

LinearRow pitch_constraint_coeffs(const DroneStated& p, const ControlParams& control);

/// Barrier against the closest other drone; absent with a single drone.
std::optional<LinearRow> collision_constraint_coeffs(std::size_t drone, std::span<const DroneStated> drones,
                                                     const ControlParams& control);

/// The rows the controller enforces: the closest neighbour only, or one per
/// other drone when collision_all_neighbors is set.
std::vector<LinearRow> collision_rows(std::size_t drone, std::span<const DroneStated> drones,
                                      const ControlParams& control);

/// One row per face, ordered x_min, x_max, y_min, y_max, z_min, z_max.
std::array<LinearRow, 6> boundary_constraint_coeffs(const DroneStated& p, const Regiond& flight_region, double a4);

/// Bit positions of ControlDiagnostics::active_mask.
enum ActiveRow : std::uint32_t {
  kActivePerformance = 1u << 0,
  kActivePitch = 1u << 1,
  kActiveCollision = 1u << 2,
  kActiveBoundary = 1u << 3,  ///< six consecutive bits
  kActiveInputBox = 1u << 9,  ///< ten consecutive bits (lower, upper per component)
};

/// Assembled per-drone QP: the slack-coupled performance row plus hard rows.
struct QpProblem {
  SamplingCoefficients performance;
  std::vector<LinearRow> hard;          ///< pitch, collision?, six boundary rows
  std::vector<std::uint32_t> hard_bits;  ///< ActiveRow bit for each hard row
  double epsilon = 0.01;
  Vec5d u_max = Vec5d::Ones();
  std::array<bool, 5> locked{};
};

QpProblem build_control_problem(std::size_t drone, const ControlSnapshot& snap, const SensingParamsd& sensing,
                                const ControlParams& control);

struct ControlDiagnostics {
  SamplingCoefficients performance;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::uint32_t active_mask = 0;
};

struct ControlOutput {
  Vec5d u = Vec5d::Zero();
  double w = 0.0;
  ControlDiagnostics diagnostics;
};

/// minimize epsilon |u|^2 + w^2 s.t. xi1'u + xi2 >= w, hard rows, |u_k| <= u_max_k.
ControlOutput solve_control_problem(const QpProblem& problem);

/// Thrown when a drone starts a step outside its safe set; the caller stops
/// the mission.
class UnsafeStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Empty when safe, else a human-readable report.
std::string safety_report(std::size_t drone, std::span<const DroneStated> drones, const Regiond& flight_region,
                          const ControlParams& control, const SafetyTolerance& tol = {});

ControlOutput compute_control(std::size_t drone, const ControlSnapshot& snap, const SensingParamsd& sensing,
                              const ControlParams& control, const SafetyTolerance& tol = {});

/// min |u - u_ref|^2 over the hard rows and input box. Used by baselines that
/// track a reference velocity.
ControlOutput safety_filter(const Vec5d& u_ref, std::size_t drone, std::span<const DroneStated> drones,
                            const Regiond& flight_region, const ControlParams& control, const SafetyTolerance& tol = {});

}  // namespace covrecon
