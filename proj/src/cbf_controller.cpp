#include "covrecon/cbf_controller.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace covrecon {

void ControlParams::validate() const {
  if (!(gamma > 0)) throw std::invalid_argument("control: gamma must be positive");
  if (!(a1 > 0) || !(a2 > 0) || !(a3 > 0) || !(a4 > 0))
    throw std::invalid_argument("control: class-K gains must be positive");
  if (!(epsilon > 0)) throw std::invalid_argument("control: epsilon must be positive");
  if (!(d > 0)) throw std::invalid_argument("control: d must be positive");
  if (!(theta_v_min < theta_v_max)) throw std::invalid_argument("control: theta_v_min must be below theta_v_max");
  if ((u_max.array() <= 0).any()) throw std::invalid_argument("control: u_max must be positive");
}

SamplingCoefficients sampling_constraint_coeffs(std::size_t drone, const ControlSnapshot& snap,
                                                const SensingParamsd& sensing, const ControlParams& control) {
  const auto& cells = snap.partition.cells.at(drone);
  const auto row = static_cast<Eigen::Index>(drone);
  const double delta1 = snap.importance.delta1;
  SamplingCoefficients c;
  double tail = 0.0;
  for (const std::size_t j : cells) {
    const double h = snap.h1(row, static_cast<Eigen::Index>(j));
    if (h == 0.0) continue;
    const double phi = snap.importance.phi[static_cast<Eigen::Index>(j)];
    tail += delta1 * h * phi * (control.a1 - delta1 * h);
  }
  c.xi2 = -control.a1 * static_cast<double>(cells.size()) * control.gamma + tail;
  c.xi1 = delta1 * snap.sensor.weighted_gradient(snap.drones[drone], sensing, cells, [&](std::size_t j) {
    return snap.h1(row, static_cast<Eigen::Index>(j)) == 0.0 ? 0.0 : snap.importance.phi[static_cast<Eigen::Index>(j)];
  });
  return c;
}

LinearRow pitch_constraint_coeffs(const DroneStated& p, const ControlParams& control) {
  const double off = p.theta_v() - control.pitch_mid();
  const double half = control.pitch_half_width();
  LinearRow r;
  // d/dtheta of half^2 - off^2.
  r.normal[kPitch] = -2.0 * off;
  r.offset = control.a2 * (half * half - off * off);
  return r;
}

std::optional<LinearRow> collision_constraint_coeffs(std::size_t drone, std::span<const DroneStated> drones,
                                                     const ControlParams& control) {
  if (drones.size() < 2) return std::nullopt;
  const Vec3d pi = drones[drone].position();
  double best = std::numeric_limits<double>::infinity();
  Vec3d diff = Vec3d::Zero();
  for (std::size_t j = 0; j < drones.size(); ++j) {
    if (j == drone) continue;
    const Vec3d dj = pi - drones[j].position();
    const double d2 = dj.squaredNorm();
    if (d2 < best) {
      best = d2;
      diff = dj;
    }
  }
  LinearRow r;
  r.normal.head<3>() = 2.0 * diff;
  r.offset = control.a3 * (best - control.d * control.d);
  return r;
}

std::vector<LinearRow> collision_rows(std::size_t drone, std::span<const DroneStated> drones,
                                      const ControlParams& control) {
  std::vector<LinearRow> rows;
  if (!control.collision_all_neighbors) {
    if (auto c = collision_constraint_coeffs(drone, drones, control)) rows.push_back(*c);
    return rows;
  }
  const Vec3d pi = drones[drone].position();
  for (std::size_t j = 0; j < drones.size(); ++j) {
    if (j == drone) continue;
    const Vec3d dj = pi - drones[j].position();
    LinearRow r;
    r.normal.head<3>() = 2.0 * dj;
    r.offset = control.a3 * (dj.squaredNorm() - control.d * control.d);
    rows.push_back(r);
  }
  return rows;
}

std::array<LinearRow, 6> boundary_constraint_coeffs(const DroneStated& p, const Regiond& flight, double a4) {
  std::array<LinearRow, 6> rows;
  const Vec3d pos = p.position();
  for (int a = 0; a < 3; ++a) {
    LinearRow& lo = rows[static_cast<std::size_t>(2 * a)];
    lo.normal[a] = 1.0;
    lo.offset = a4 * (pos[a] - flight.min[a]);
    LinearRow& hi = rows[static_cast<std::size_t>(2 * a + 1)];
    hi.normal[a] = -1.0;
    hi.offset = a4 * (flight.max[a] - pos[a]);
  }
  return rows;
}

QpProblem build_control_problem(std::size_t drone, const ControlSnapshot& snap, const SensingParamsd& sensing,
                                const ControlParams& control) {
  QpProblem qp;
  qp.performance = sampling_constraint_coeffs(drone, snap, sensing, control);
  qp.epsilon = control.epsilon;
  qp.u_max = control.u_max;
  qp.locked = control.locked;
  qp.hard.push_back(pitch_constraint_coeffs(snap.drones[drone], control));
  qp.hard_bits.push_back(kActivePitch);
  for (const auto& c : collision_rows(drone, snap.drones, control)) {
    qp.hard.push_back(c);
    qp.hard_bits.push_back(kActiveCollision);
  }
  const auto boundary = boundary_constraint_coeffs(snap.drones[drone], snap.flight_region, control.a4);
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    qp.hard.push_back(boundary[k]);
    qp.hard_bits.push_back(kActiveBoundary << k);
  }
  return qp;
}

namespace {

/// Hard rows and the input box on the free components, plus an optional
/// trailing slack variable. Returns the row bits alongside.
struct Assembled {
  DenseQpd qp;
  std::vector<int> free;  // pose slot of each free variable
  std::vector<std::uint32_t> bits;
  bool zero_feasible = true;
};

Assembled assemble(const std::vector<LinearRow>& hard, const std::vector<std::uint32_t>& hard_bits,
                   const Vec5d& u_max, const std::array<bool, 5>& locked, bool with_slack) {
  Assembled out;
  for (int k = 0; k < 5; ++k)
    if (!locked[static_cast<std::size_t>(k)]) out.free.push_back(k);
  const auto nu = static_cast<Eigen::Index>(out.free.size());
  const Eigen::Index nv = nu + (with_slack ? 1 : 0);
  out.qp.H = Eigen::MatrixXd::Zero(nv, nv);
  out.qp.f = Eigen::VectorXd::Zero(nv);
  out.qp.A = Eigen::MatrixXd::Zero(0, nv);
  out.qp.b = Eigen::VectorXd::Zero(0);
  const Eigen::Index slack_rows = with_slack ? 1 : 0;
  out.qp.A.resize(slack_rows, nv);
  out.qp.A.setZero();
  out.qp.b.resize(slack_rows);
  out.qp.b.setZero();
  if (with_slack) out.bits.push_back(kActivePerformance);
  Eigen::VectorXd row(nv);
  for (std::size_t r = 0; r < hard.size(); ++r) {
    row.setZero();
    for (Eigen::Index k = 0; k < nu; ++k) row[k] = hard[r].normal[out.free[static_cast<std::size_t>(k)]];
    if (row.cwiseAbs().maxCoeff() == 0.0) {
      if (hard[r].offset < 0.0) out.zero_feasible = false;
      continue;
    }
    out.qp.add_row(row, -hard[r].offset);
    out.bits.push_back(hard_bits[r]);
    if (hard[r].offset < 0.0) out.zero_feasible = false;
  }
  for (Eigen::Index k = 0; k < nu; ++k) {
    const int slot = out.free[static_cast<std::size_t>(k)];
    row.setZero();
    row[k] = 1.0;
    out.qp.add_row(row, -u_max[slot]);
    out.bits.push_back(kActiveInputBox << (2 * slot));
    row[k] = -1.0;
    out.qp.add_row(row, -u_max[slot]);
    out.bits.push_back(kActiveInputBox << (2 * slot + 1));
  }
  return out;
}

std::uint32_t active_mask(const QpSolutiond& sol, const std::vector<std::uint32_t>& bits) {
  std::uint32_t mask = 0;
  for (const int r : sol.active_set) mask |= bits[static_cast<std::size_t>(r)];
  return mask;
}

}  // namespace

ControlOutput solve_control_problem(const QpProblem& problem) {
  Assembled a = assemble(problem.hard, problem.hard_bits, problem.u_max, problem.locked, true);
  const auto nu = static_cast<Eigen::Index>(a.free.size());
  const Eigen::Index w_index = nu;
  for (Eigen::Index k = 0; k < nu; ++k) a.qp.H(k, k) = 2.0 * problem.epsilon;
  a.qp.H(w_index, w_index) = 2.0;
  // xi1'u - w >= -xi2
  for (Eigen::Index k = 0; k < nu; ++k) a.qp.A(0, k) = problem.performance.xi1[a.free[static_cast<std::size_t>(k)]];
  a.qp.A(0, w_index) = -1.0;
  a.qp.b[0] = -problem.performance.xi2;

  std::optional<Eigen::VectorXd> start;
  if (a.zero_feasible) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(nu + 1);
    s[w_index] = std::min(0.0, problem.performance.xi2);
    start = s;
  }
  const QpSolutiond sol = solve_qp(a.qp, start);
  ControlOutput out;
  for (Eigen::Index k = 0; k < nu; ++k) out.u[a.free[static_cast<std::size_t>(k)]] = sol.x[k];
  out.w = sol.x[w_index];
  out.diagnostics.performance = problem.performance;
  out.diagnostics.kkt_residual = sol.kkt_residual;
  out.diagnostics.iterations = sol.iterations;
  out.diagnostics.active_mask = active_mask(sol, a.bits);
  return out;
}

std::string safety_report(std::size_t drone, std::span<const DroneStated> drones, const Regiond& flight,
                          const ControlParams& control, const SafetyTolerance& tol) {
  std::ostringstream msg;
  const DroneStated& p = drones[drone];
  const double off = std::abs(p.theta_v() - control.pitch_mid());
  if (off > control.pitch_half_width() + tol.pitch)
    msg << "drone " << drone << ": pitch " << p.theta_v() << " outside barrier set; ";
  for (std::size_t j = 0; j < drones.size(); ++j) {
    if (j == drone) continue;
    const double dist = (p.position() - drones[j].position()).norm();
    if (dist < control.d - tol.distance)
      msg << "drone " << drone << ": separation " << dist << " from drone " << j << " below " << control.d << "; ";
  }
  const Vec3d pos = p.position();
  if ((pos.array() < flight.min.array() - tol.distance).any() || (pos.array() > flight.max.array() + tol.distance).any())
    msg << "drone " << drone << ": position (" << pos.x() << ", " << pos.y() << ", " << pos.z()
        << ") outside flight region; ";
  return msg.str();
}

ControlOutput compute_control(std::size_t drone, const ControlSnapshot& snap, const SensingParamsd& sensing,
                              const ControlParams& control, const SafetyTolerance& tol) {
  const std::string report = safety_report(drone, snap.drones, snap.flight_region, control, tol);
  if (!report.empty()) throw UnsafeStateError("emergency stop: " + report);
  const QpProblem qp = build_control_problem(drone, snap, sensing, control);
  try {
    return solve_control_problem(qp);
  } catch (const QpInfeasibleError&) {
    throw UnsafeStateError("emergency stop: drone " + std::to_string(drone) + " has no admissible input");
  }
}

ControlOutput safety_filter(const Vec5d& u_ref, std::size_t drone, std::span<const DroneStated> drones,
                            const Regiond& flight, const ControlParams& control, const SafetyTolerance& tol) {
  const std::string report = safety_report(drone, drones, flight, control, tol);
  if (!report.empty()) throw UnsafeStateError("emergency stop: " + report);
  std::vector<LinearRow> hard{pitch_constraint_coeffs(drones[drone], control)};
  std::vector<std::uint32_t> bits{kActivePitch};
  for (const auto& c : collision_rows(drone, drones, control)) {
    hard.push_back(c);
    bits.push_back(kActiveCollision);
  }
  const auto boundary = boundary_constraint_coeffs(drones[drone], flight, control.a4);
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    hard.push_back(boundary[k]);
    bits.push_back(kActiveBoundary << k);
  }
  Assembled a = assemble(hard, bits, control.u_max, control.locked, false);
  const auto nu = static_cast<Eigen::Index>(a.free.size());
  for (Eigen::Index k = 0; k < nu; ++k) {
    a.qp.H(k, k) = 2.0;
    a.qp.f[k] = -2.0 * u_ref[a.free[static_cast<std::size_t>(k)]];
  }
  std::optional<Eigen::VectorXd> start;
  if (a.zero_feasible) start = Eigen::VectorXd::Zero(nu);
  QpSolutiond sol;
  try {
    sol = solve_qp(a.qp, start);
  } catch (const QpInfeasibleError&) {
    throw UnsafeStateError("emergency stop: drone " + std::to_string(drone) + " has no admissible input");
  }
  ControlOutput out;
  for (Eigen::Index k = 0; k < nu; ++k) out.u[a.free[static_cast<std::size_t>(k)]] = sol.x[k];
  out.diagnostics.kkt_residual = sol.kkt_residual;
  out.diagnostics.iterations = sol.iterations;
  out.diagnostics.active_mask = active_mask(sol, a.bits);
  return out;
}

}  // namespace covrecon
