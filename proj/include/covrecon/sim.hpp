#pragma once

#include "covrecon/cbf_controller.hpp"
#include "covrecon/geometry.hpp"
#include "covrecon/importance.hpp"
#include "covrecon/mesh.hpp"
#include "covrecon/metrics.hpp"
#include "covrecon/partition.hpp"
#include "covrecon/recon_oracle.hpp"
#include "covrecon/sensing.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace covrecon {

enum class FeedbackMethod { kNone, kGrid, kM3c2 };
enum class BaselineMode { kNone, kLawnmower };

struct LawnmowerParams {
  double altitude = 1.5;
  double lane_spacing = 0.3;
  double speed = 0.5;
  bool operator==(const LawnmowerParams&) const = default;
};

/// A fully resolved mission: geometry, gains, feedback and oracle.
struct MissionConfig {
  Regiond target{Vec3d(-3, -3, 0), Vec3d(3, 3, 2)};
  Regiond flight{Vec3d(-4, -4, 0.5), Vec3d(4, 4, 5)};
  AngleRange<double> yaw{-std::numbers::pi, std::numbers::pi};
  AngleRange<double> pitch{std::numbers::pi / 3, std::numbers::pi / 2};
  Vec5d resolution = Vec5d::Constant(0.3);

  std::vector<DroneStated> initial;
  SensingParamsd sensing;
  ControlParams control;
  SafetyTolerance tolerance;

  double delta1 = 3.0;
  double delta2 = 1.0;
  double j_threshold = 0.5;
  FeedbackMethod method = FeedbackMethod::kGrid;
  FeedbackParams feedback;
  double event_period = 5.0;

  OracleParams oracle;
  TriangleMesh ground_truth;
  double eta = kDefaultEta;

  double dt = 0.05;
  double j_stop = 0.02;
  double t_max = 2000.0;

  BaselineMode baseline = BaselineMode::kNone;
  LawnmowerParams lawnmower;

  /// Keep every k-th event mesh (and always the last) in the log.
  std::size_t mesh_stride = 10;
};

/// Step counter times dt; never accumulated as a float sum.
struct SimClock {
  std::uint64_t steps = 0;
  double dt = 0.05;
  double time() const { return static_cast<double>(steps) * dt; }
};

struct StepRecord {
  double t = 0.0;
  double J_begin = 0.0;    ///< before this step's decay
  double J_decayed = 0.0;  ///< after decay, before any event jump
  double J = 0.0;          ///< end of step
  std::vector<Vec5d> pose;
  std::vector<Vec5d> u;    ///< input applied during the step (zero for the initial record)
  std::vector<double> w;
  std::vector<std::uint32_t> active;
  double min_pair_dist = 0.0;
  bool event = false;
};

struct EventRecord {
  long long index = 0;
  double sim_time = 0.0;
  double h2_max = 0.0;
  double h2_mean = 0.0;
  double jump_total = 0.0;  ///< sum of importance added / m
  std::size_t mesh_vertices = 0;
  std::size_t mesh_faces = 0;
  MetricsReport metrics;
  bool terminal = false;  ///< end-of-mission snapshot without feedback
};

struct MissionLog {
  std::vector<StepRecord> steps;
  std::vector<EventRecord> events;
  std::vector<MeshEvent> meshes;
  MetricsReport final_metrics;
  std::string termination;  ///< "j_stop", "t_max", "path_complete" or "emergency_stop"
  std::string safety_report;
  double wall_seconds = 0.0;
};

struct Waypoint {
  Vec3d position;
  double time = 0.0;  ///< arrival time at the nominal speed
};

/// Serpentine sweep over the flight region's xy-rectangle; lanes run along x.
std::vector<Waypoint> lawnmower_waypoints(const Regiond& flight, double altitude, double lane_spacing, double speed);

/// floor(width / spacing) + 1.
std::size_t lawnmower_lane_count(double width, double lane_spacing);

struct StepDiagnostics {
  std::uint64_t step = 0;
  double J_begin = 0.0;
  double J_decayed = 0.0;
  double delta2 = 0.0;
  std::optional<EventRecord> event;
  std::vector<ControlOutput> control;
  std::vector<double> contribution;  ///< I_i
};

class World;
/// Called once per step after the controller has run and before the drones
/// move, with the snapshot the controller saw.
using StepObserver = std::function<void(const World&, const StepDiagnostics&)>;

class World {
 public:
  explicit World(MissionConfig config);

  const MissionConfig& config() const { return cfg_; }
  const SimClock& clock() const { return clock_; }
  const std::vector<DroneStated>& drones() const { return drones_; }
  const VirtualFieldd& field() const { return field_; }
  const FieldSensord& sensor() const { return sensor_; }
  const ImportanceField& importance() const { return importance_; }
  const ExposureField& exposure() const { return exposure_; }
  const SensingTable& sensing_table() const { return h1_; }
  const PartitionAssignment& partition() const { return partition_; }

  double objective() const { return global_objective(importance_); }
  bool finished() const;
  std::string termination() const;

  StepRecord initial_record() const;
  /// One pipeline step. Throws UnsafeStateError on an emergency stop.
  StepRecord step(const StepObserver& observer = {}, std::optional<EventRecord>* event_out = nullptr,
                  std::optional<MeshEvent>* mesh_out = nullptr);

  /// Final mesh event without feedback, for end-of-mission scoring.
  std::pair<EventRecord, MeshEvent> terminal_event();

 private:
  std::pair<EventRecord, MeshEvent> reconstruction_event(double delta2);
  Vec5d lawnmower_reference(std::size_t drone);
  double min_pair_distance() const;
  void refresh_sensing();

  MissionConfig cfg_;
  SimClock clock_;
  std::uint64_t event_steps_ = 0;
  std::vector<DroneStated> drones_;
  VirtualFieldd field_;
  FieldSensord sensor_;
  ImportanceField importance_;
  ExposureField exposure_;
  KernelWeights weights_;
  std::optional<CoreBinner> binner_;
  std::vector<int> prev_counts_;
  std::vector<Vec3d> prev_cloud_;
  SensingTable h1_;
  PartitionAssignment partition_;
  long long last_event_ = 0;
  bool last_step_had_event_ = false;
  std::vector<std::vector<Waypoint>> paths_;
  std::vector<std::size_t> path_cursor_;
};

/// Runs until J <= J_stop (coverage) or the path completes (lawnmower), or
/// t_max. Emergency stops end the run early and are recorded in the log.
MissionLog run_mission(const MissionConfig& config, const StepObserver& observer = {});

const char* to_string(FeedbackMethod m);
const char* to_string(BaselineMode m);

}  // namespace covrecon
