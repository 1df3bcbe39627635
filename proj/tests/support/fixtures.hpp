#pragma once

// Small hand-built controller snapshots shared by unit and acceptance tests.

#include "covrecon/cbf_controller.hpp"

#include <numbers>
#include <random>
#include <vector>

namespace fixture {

struct Scene {
  std::vector<covrecon::DroneStated> drones;
  covrecon::VirtualFieldd field;
  covrecon::FieldSensord sensor;
  covrecon::SensingTable h1;
  covrecon::PartitionAssignment partition;
  covrecon::ImportanceField importance;
  covrecon::Regiond flight;
  covrecon::SensingParamsd sensing;

  Scene(std::vector<covrecon::DroneStated> d, covrecon::VirtualFieldd f, covrecon::SensingParamsd s,
        covrecon::Regiond flight_region)
      : drones(std::move(d)),
        field(std::move(f)),
        sensor(field),
        importance(field.size(), 3.0, 1.0, 0.5),
        flight(flight_region),
        sensing(s) {
    refresh();
  }

  void refresh() {
    h1 = covrecon::sensing_table(drones, sensor, sensing);
    partition = covrecon::assign_partition(h1);
  }

  covrecon::ControlSnapshot snapshot() const {
    return {drones, partition, h1, sensor, importance, flight};
  }
};

/// Random drones over a coarse desk-sized field with random importance.
/// Wide tolerances keep most cells inside the numerically relevant range.
inline Scene random_scene(std::mt19937_64& rng, std::size_t n) {
  using std::numbers::pi;
  std::uniform_real_distribution<double> xy(-1.5, 1.5), z(1.0, 2.0), th(-pi, pi), tv(1.1, 1.5), u(0.0, 1.0);
  covrecon::SensingParamsd s;
  s.sigma1 = 0.35;
  s.sigma2 = 0.45;
  s.sigma3 = 0.5;
  const covrecon::Regiond target(covrecon::Vec3d(-2, -2, 0), covrecon::Vec3d(2, 2, 1));
  covrecon::VirtualFieldd field(target, {-pi, pi}, {pi / 3, pi / 2}, covrecon::Vec5d(0.5, 0.5, 0.5, 0.9, 0.3));
  std::vector<covrecon::DroneStated> drones;
  for (std::size_t i = 0; i < n; ++i) drones.emplace_back(xy(rng), xy(rng), z(rng), th(rng), tv(rng));
  Scene sc(std::move(drones), std::move(field), s,
           covrecon::Regiond(covrecon::Vec3d(-4, -4, 0.5), covrecon::Vec3d(4, 4, 5)));
  for (Eigen::Index j = 0; j < sc.importance.phi.size(); ++j) sc.importance.phi[j] = u(rng);
  return sc;
}

}  // namespace fixture
