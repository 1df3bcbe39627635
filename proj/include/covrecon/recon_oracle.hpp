#pragma once

#include "covrecon/geometry.hpp"
#include "covrecon/mesh.hpp"
#include "covrecon/sensing.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace covrecon {

struct OracleParams {
  double reveal_threshold = 0.5;  ///< exposure (seconds of h1 = 1) before a vertex appears
  double noise_scale = 0.08;      ///< meters of perturbation at zero exposure
  double noise_halflife = 1.0;    ///< exposure halving the perturbation
  double refine_threshold = 3.0;  ///< exposure at which faces are subdivided
  std::uint64_t seed = 0;
  /// Draw a fresh noise direction per event instead of one per vertex.
  bool resample_noise = false;

  void validate() const;
  bool operator==(const OracleParams&) const = default;
};

/// splitmix64 finalizer; the counter-based generator behind the noise.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic unit vector for (seed, vertex, event).
Vec3d noise_direction(std::uint64_t seed, std::uint64_t vertex, std::uint64_t event);

/// Hidden ground truth plus how well each of its vertices has been seen.
class ExposureField {
 public:
  /// Observation directions of the vertex normals are clamped into the pitch
  /// range so near-vertical surfaces keep a usable h1 kernel.
  ExposureField(TriangleMesh ground_truth, const OracleParams& params, AngleRange<double> pitch_range);

  const TriangleMesh& ground_truth() const { return truth_; }
  const std::vector<Vec3d>& normals() const { return normals_; }
  const std::vector<double>& exposure() const { return exposure_; }
  std::vector<double>& exposure() { return exposure_; }
  const OracleParams& params() const { return params_; }
  const FieldSensord& sensor() const { return sensor_; }
  long long last_event() const { return last_event_; }

  /// Exposure-dependent perturbation magnitude.
  double noise_magnitude(double exposure) const {
    return params_.noise_scale / (1.0 + exposure / params_.noise_halflife);
  }

 private:
  friend MeshEvent emit_reconstruction_event(ExposureField&, long long, double);

  TriangleMesh truth_;
  std::vector<Vec3d> normals_;
  std::vector<double> exposure_;
  OracleParams params_;
  FieldSensord sensor_;
  long long last_event_ = -1;
  std::vector<double> scratch_;
  friend void accumulate_exposure(ExposureField&, std::span<const DroneStated>, const SensingParamsd&, double);
};

/// e_l += dt * max_i h1(p_i, q(v_l, n_l)).
void accumulate_exposure(ExposureField& field, std::span<const DroneStated> drones, const SensingParamsd& sensing,
                         double dt);

class EventOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Revealed, perturbed and partially refined view of the ground truth.
MeshEvent emit_reconstruction_event(ExposureField& field, long long event_index, double sim_time = 0.0);

/// Floor slab, two boxes and a wedge, meshed at `spacing` with one vertex set
/// per planar face.
TriangleMesh bundled_scene(double spacing = 0.05);

}  // namespace covrecon
