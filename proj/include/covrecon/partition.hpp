#pragma once

#include "covrecon/geometry.hpp"
#include "covrecon/importance.hpp"
#include "covrecon/sensing.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace covrecon {

/// h1 of every (drone, cell) pair; one contiguous row per drone.
using SensingTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

SensingTable sensing_table(std::span<const DroneStated> drones, const FieldSensord& sensor,
                           const SensingParamsd& params);

/// Cell ownership: each cell goes to the drone with the largest h1 at it,
/// lowest drone index on ties.
struct PartitionAssignment {
  std::vector<int> owner;                       ///< per cell
  std::vector<std::vector<std::size_t>> cells;  ///< per drone, ascending

  std::size_t count(std::size_t drone) const { return cells.at(drone).size(); }
};

PartitionAssignment assign_partition(const SensingTable& h1);
PartitionAssignment assign_partition(std::span<const DroneStated> drones, const VirtualFieldd& field,
                                     const SensingParamsd& params);

/// Per-cell max over drones of h1 (0 with no drones).
Eigen::VectorXd max_over_drones(const SensingTable& h1);

/// I_i = sum over the drone's cells of delta1 * h1 * phi.
double drone_contribution(std::size_t drone, const PartitionAssignment& assignment, const SensingTable& h1,
                          const ImportanceField& importance);

}  // namespace covrecon
