#pragma once

#include "covrecon/sim.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covrecon {

/// Declarative run configuration; every field has a key in the flat
/// key=value file format.
struct Scenario {
  Vec3d target_min{-3, -3, 0};
  Vec3d target_max{3, 3, 2};
  Vec3d flight_min{-4, -4, 0.5};
  Vec3d flight_max{4, 4, 5};
  Eigen::Vector2d theta_h{-std::numbers::pi, std::numbers::pi};
  Eigen::Vector2d theta_v{std::numbers::pi / 3, std::numbers::pi / 2};
  Vec5d resolution = Vec5d::Constant(0.3);

  std::size_t drone_count = 1;
  std::vector<Vec5d> initial;  ///< explicit poses; empty means automatic placement
  double init_jitter = 0.0;

  SensingParamsd sensing;
  double delta1 = 3.0;

  FeedbackMethod method = FeedbackMethod::kGrid;
  double delta2 = 1.0;
  double j_threshold = 0.5;
  double sigma4 = 0.4;
  double kappa = 0.7;
  double core_spacing = 0.6;
  double normal_radius = 1.2;
  double cylinder_radius = 0.6;
  double event_period = 5.0;

  ControlParams control;
  bool freeze_altitude = false;
  bool freeze_gimbal = false;

  std::string scene = "bundled";  ///< "bundled" or an absolute PLY path
  OracleParams oracle;            ///< seed is taken from `seed`

  double eta = kDefaultEta;
  double dt = 0.05;
  double j_stop = 0.02;
  double t_max = 2000.0;
  std::uint64_t seed = 0;

  std::string out_dir = "out";
  std::size_t mesh_stride = 10;

  BaselineMode baseline = BaselineMode::kNone;
  LawnmowerParams lawnmower;

  bool operator==(const Scenario&) const = default;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (key, value) pairs applied after the file, in order.
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// `origin` names the source in error messages; relative scene paths are
/// resolved against `base_dir`.
Scenario parse_scenario_text(const std::string& text, const Overrides& overrides = {},
                             const std::string& origin = "<scenario>",
                             const std::filesystem::path& base_dir = std::filesystem::current_path());
Scenario parse_scenario(const std::filesystem::path& path, const Overrides& overrides = {});

/// Every key at round-trip precision, in canonical order.
std::string resolved_text(const Scenario& s);

/// All recognised keys, canonical order.
std::vector<std::string> scenario_keys();

/// Initial poses: the explicit list, or automatic placement (one drone at
/// (0, 1, 2); more on a ring of radius 1.5 at z = 2) with seeded xy jitter.
std::vector<DroneStated> initial_states(const Scenario& s);

MissionConfig mission_config(const Scenario& s);

/// steps.csv, events.csv, metrics.json, meshes/event_<t>.ply, scenario.resolved.
void write_outputs(const MissionLog& log, const Scenario& s, const std::filesystem::path& out_dir);

/// First step time with J <= target, or a negative value when never reached.
double time_to_objective(const MissionLog& log, double target);

/// %.9g, the serialization precision of every CSV/JSON real.
std::string format_real9(double v);

}  // namespace covrecon
