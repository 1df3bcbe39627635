#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace covrecon {

/// Per-cell importance index plus the gains governing its decay and
/// feedback jumps.
struct ImportanceField {
  Eigen::VectorXd phi;
  double delta1 = 3.0;
  double delta2_active = 1.0;    ///< gain applied once feedback is switched on
  double j_threshold = 0.5;      ///< fraction of initial_j below which feedback is on
  double initial_j = 1.0;

  ImportanceField() = default;
  /// All cells start at 1.
  ImportanceField(std::size_t cells, double delta1, double delta2_active, double j_threshold);

  std::size_t size() const { return static_cast<std::size_t>(phi.size()); }
};

/// phi_j <- phi_j * exp(-delta1 * h_j * dt): exact solution with h frozen
/// over the step.
void decay_step(ImportanceField& field, std::span<const double> per_cell_max_h1, double dt);

/// Mean importance.
double global_objective(const ImportanceField& field);

/// phi_j <- phi_j + delta2 * h2_j. Returns the total added importance.
double feedback_jump(ImportanceField& field, std::span<const double> h2, double delta2);

/// 0 while J >= j_threshold * initial_j, delta2_active below it.
double feedback_gain(double J, const ImportanceField& field);

}  // namespace covrecon
