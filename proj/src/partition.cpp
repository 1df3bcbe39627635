#include "covrecon/partition.hpp"

#include <stdexcept>

namespace covrecon {

SensingTable sensing_table(std::span<const DroneStated> drones, const FieldSensord& sensor,
                           const SensingParamsd& params) {
  SensingTable table(static_cast<Eigen::Index>(drones.size()), static_cast<Eigen::Index>(sensor.size()));
  for (std::size_t i = 0; i < drones.size(); ++i) {
    sensor.evaluate(drones[i], params, std::span<double>(table.row(static_cast<Eigen::Index>(i)).data(), sensor.size()));
  }
  return table;
}

PartitionAssignment assign_partition(const SensingTable& h1) {
  if (h1.rows() == 0) throw std::invalid_argument("assign_partition: no drones");
  const auto n = h1.rows();
  const auto m = h1.cols();
  PartitionAssignment out;
  out.owner.assign(static_cast<std::size_t>(m), 0);
  out.cells.assign(static_cast<std::size_t>(n), {});
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index best = 0;
    double best_h = h1(0, j);
    for (Eigen::Index i = 1; i < n; ++i) {
      if (h1(i, j) > best_h) {
        best_h = h1(i, j);
        best = i;
      }
    }
    out.owner[static_cast<std::size_t>(j)] = static_cast<int>(best);
    out.cells[static_cast<std::size_t>(best)].push_back(static_cast<std::size_t>(j));
  }
  return out;
}

PartitionAssignment assign_partition(std::span<const DroneStated> drones, const VirtualFieldd& field,
                                     const SensingParamsd& params) {
  if (drones.empty()) throw std::invalid_argument("assign_partition: no drones");
  return assign_partition(sensing_table(drones, FieldSensord(field), params));
}

Eigen::VectorXd max_over_drones(const SensingTable& h1) {
  if (h1.rows() == 0) return Eigen::VectorXd::Zero(h1.cols());
  return h1.colwise().maxCoeff().transpose();
}

double drone_contribution(std::size_t drone, const PartitionAssignment& assignment, const SensingTable& h1,
                          const ImportanceField& importance) {
  if (drone >= assignment.cells.size() || static_cast<Eigen::Index>(drone) >= h1.rows())
    throw std::out_of_range("drone_contribution: drone index out of range");
  double sum = 0.0;
  const auto row = static_cast<Eigen::Index>(drone);
  for (const std::size_t j : assignment.cells[drone]) {
    const auto jj = static_cast<Eigen::Index>(j);
    sum += h1(row, jj) * importance.phi[jj];
  }
  return importance.delta1 * sum;
}

}  // namespace covrecon
