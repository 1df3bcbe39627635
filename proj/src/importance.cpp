#include "covrecon/importance.hpp"

#include <cmath>
#include <stdexcept>

namespace covrecon {

ImportanceField::ImportanceField(std::size_t cells, double d1, double d2, double jth)
    : phi(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cells))),
      delta1(d1),
      delta2_active(d2),
      j_threshold(jth),
      initial_j(1.0) {
  if (!(d1 > 0)) throw std::invalid_argument("importance: delta1 must be positive");
  if (d2 < 0) throw std::invalid_argument("importance: delta2 must be nonnegative");
  if (!(jth > 0) || jth > 1) throw std::invalid_argument("importance: J threshold must lie in (0, 1]");
}

void decay_step(ImportanceField& field, std::span<const double> h, double dt) {
  if (h.size() != field.size()) throw std::invalid_argument("decay_step: length mismatch");
  if (!(dt > 0)) throw std::invalid_argument("decay_step: dt must be positive");
  const double rate = field.delta1 * dt;
  for (std::size_t j = 0; j < h.size(); ++j) {
    if (h[j] != 0.0) field.phi[static_cast<Eigen::Index>(j)] *= std::exp(-rate * h[j]);
  }
}

double global_objective(const ImportanceField& field) {
  if (field.size() == 0) throw std::invalid_argument("global_objective: empty field");
  return field.phi.mean();
}

double feedback_jump(ImportanceField& field, std::span<const double> h2, double delta2) {
  if (h2.size() != field.size()) throw std::invalid_argument("feedback_jump: length mismatch");
  for (const double v : h2)
    if (!(v >= 0.0)) throw std::invalid_argument("feedback_jump: h2 must be nonnegative");
  if (delta2 == 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < h2.size(); ++j) {
    const double add = delta2 * h2[j];
    field.phi[static_cast<Eigen::Index>(j)] += add;
    total += add;
  }
  return total;
}

double feedback_gain(double J, const ImportanceField& field) {
  if (J < 0) throw std::invalid_argument("feedback_gain: J must be nonnegative");
  return J >= field.j_threshold * field.initial_j ? 0.0 : field.delta2_active;
}

}  // namespace covrecon
