#pragma once

#include "covrecon/geometry.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace covrecon {

/// Ideal observation distance and the three Gaussian tolerances of the
/// sensing performance (alignment, surface orientation, distance).
template <typename Scalar>
struct SensingParams {
  Scalar D = Scalar(1.0);
  Scalar sigma1 = Scalar(0.07);
  Scalar sigma2 = Scalar(0.095);
  Scalar sigma3 = Scalar(0.3);

  void validate() const {
    if (!(D > 0)) throw std::invalid_argument("sensing: D must be positive");
    if (!(sigma1 > 0) || !(sigma2 > 0) || !(sigma3 > 0))
      throw std::invalid_argument("sensing: sigma1, sigma2, sigma3 must be positive");
  }
  bool operator==(const SensingParams&) const = default;
};

/// Below this distance a drone/point pair has no defined line of sight.
template <typename Scalar>
inline constexpr Scalar kDegenerateDistance = Scalar(1e-6);

class DegenerateGeometryError : public std::domain_error {
 public:
  DegenerateGeometryError() : std::domain_error("drone and observation point coincide") {}
};

template <typename Scalar>
struct SensingGeometry {
  Scalar phi1;  ///< optical axis vs line of sight
  Scalar phi2;  ///< surface direction vs line of sight back to the drone
  Scalar rho;   ///< distance minus D, signed
};

namespace detail {

template <typename Scalar>
Scalar clamp_unit(Scalar c) {
  return c > Scalar(1) ? Scalar(1) : (c < Scalar(-1) ? Scalar(-1) : c);
}

/// Value and (optionally) drone-pose gradient of h1, written on cosines only.
/// `cam`, `dcam_dh`, `dcam_dv` are the optical axis and its yaw/pitch partials.
template <typename Scalar>
struct Kernel {
  Scalar inv_2s1sq, inv_2s2sq, inv_2s3sq;
  Scalar inv_s1sq, inv_s2sq, inv_s3sq;
  Scalar D;

  explicit Kernel(const SensingParams<Scalar>& p)
      : inv_2s1sq(Scalar(0.5) / (p.sigma1 * p.sigma1)),
        inv_2s2sq(Scalar(0.5) / (p.sigma2 * p.sigma2)),
        inv_2s3sq(Scalar(0.5) / (p.sigma3 * p.sigma3)),
        inv_s1sq(Scalar(1) / (p.sigma1 * p.sigma1)),
        inv_s2sq(Scalar(1) / (p.sigma2 * p.sigma2)),
        inv_s3sq(Scalar(1) / (p.sigma3 * p.sigma3)),
        D(p.D) {}

  /// Exponent E with h1 = exp(-E); returns false when degenerate.
  bool exponent(const Vec3<Scalar>& drone_pos, const Vec3<Scalar>& cam, const Vec3<Scalar>& q_pos,
                const Vec3<Scalar>& q_dir, Scalar& e) const {
    const Vec3<Scalar> r = q_pos - drone_pos;
    const Scalar dist = r.norm();
    if (dist < kDegenerateDistance<Scalar>) return false;
    const Scalar c1 = cam.dot(r) / dist;
    const Scalar c2 = -q_dir.dot(r) / dist;
    const Scalar rho = dist - D;
    e = (Scalar(1) - c1) * (Scalar(1) - c1) * inv_2s1sq + (Scalar(1) - c2) * (Scalar(1) - c2) * inv_2s2sq +
        rho * rho * inv_2s3sq;
    return true;
  }

  bool value_and_gradient(const Vec3<Scalar>& drone_pos, const Vec3<Scalar>& cam, const Vec3<Scalar>& dcam_dh,
                          const Vec3<Scalar>& dcam_dv, const Vec3<Scalar>& q_pos, const Vec3<Scalar>& q_dir,
                          Scalar& h, Vec5<Scalar>& grad) const {
    const Vec3<Scalar> r = q_pos - drone_pos;
    const Scalar dist = r.norm();
    if (dist < kDegenerateDistance<Scalar>) return false;
    const Vec3<Scalar> u = r / dist;
    const Scalar c1 = cam.dot(u);
    const Scalar c2 = -q_dir.dot(u);
    const Scalar rho = dist - D;
    const Scalar e = (Scalar(1) - c1) * (Scalar(1) - c1) * inv_2s1sq +
                     (Scalar(1) - c2) * (Scalar(1) - c2) * inv_2s2sq + rho * rho * inv_2s3sq;
    h = std::exp(-e);
    // dE/dc1, dE/dc2, dE/drho
    const Scalar e_c1 = -(Scalar(1) - c1) * inv_s1sq;
    const Scalar e_c2 = -(Scalar(1) - c2) * inv_s2sq;
    const Scalar e_rho = rho * inv_s3sq;
    const Vec3<Scalar> dc1_dp = -(cam - c1 * u) / dist;
    const Vec3<Scalar> dc2_dp = (q_dir + c2 * u) / dist;
    const Vec3<Scalar> dE_dp = e_c1 * dc1_dp + e_c2 * dc2_dp - e_rho * u;
    grad.template head<3>() = -h * dE_dp;
    grad[kYaw] = -h * e_c1 * dcam_dh.dot(u);
    grad[kPitch] = -h * e_c1 * dcam_dv.dot(u);
    return true;
  }
};

template <typename Scalar>
struct CameraFrame {
  Vec3<Scalar> axis, d_yaw, d_pitch;

  explicit CameraFrame(const DroneState<Scalar>& p) {
    const Scalar ch = std::cos(p.theta_h()), sh = std::sin(p.theta_h());
    const Scalar cv = std::cos(p.theta_v()), sv = std::sin(p.theta_v());
    axis = {ch * cv, sh * cv, -sv};
    d_yaw = {-sh * cv, ch * cv, Scalar(0)};
    d_pitch = {-ch * sv, -sh * sv, -cv};
  }
};

}  // namespace detail

template <typename Scalar>
SensingGeometry<Scalar> sensing_geometry(const DroneState<Scalar>& p, const ObservationPoint<Scalar>& q,
                                         const SensingParams<Scalar>& params) {
  const Vec3<Scalar> r = q.position - p.position();
  const Scalar dist = r.norm();
  if (dist < kDegenerateDistance<Scalar>) throw DegenerateGeometryError();
  const Vec3<Scalar> u = r / dist;
  return {std::acos(detail::clamp_unit(p.direction().dot(u))), std::acos(detail::clamp_unit(-q.direction().dot(u))),
          dist - params.D};
}

/// Product-of-Gaussians sensing performance in [0, 1]; 0 for coincident
/// positions.
template <typename Scalar>
Scalar sensing_performance(const DroneState<Scalar>& p, const ObservationPoint<Scalar>& q,
                           const SensingParams<Scalar>& params) {
  const detail::Kernel<Scalar> k(params);
  Scalar e;
  if (!k.exponent(p.position(), p.direction(), q.position, q.direction(), e)) return Scalar(0);
  return std::exp(-e);
}

template <typename Scalar>
struct SensingGradient {
  Vec5<Scalar> gradient = Vec5<Scalar>::Zero();
  bool degenerate = false;
};

/// Analytic d h1 / d pose of the drone.
template <typename Scalar>
SensingGradient<Scalar> sensing_gradient(const DroneState<Scalar>& p, const ObservationPoint<Scalar>& q,
                                         const SensingParams<Scalar>& params) {
  const detail::Kernel<Scalar> k(params);
  const detail::CameraFrame<Scalar> cam(p);
  SensingGradient<Scalar> out;
  Scalar h;
  if (!k.value_and_gradient(p.position(), cam.axis, cam.d_yaw, cam.d_pitch, q.position, q.direction(), h,
                            out.gradient)) {
    out.gradient.setZero();
    out.degenerate = true;
  }
  return out;
}

/// sigma2 giving a performance of 0.5 halfway between points spaced
/// delta_theta apart.
template <typename Scalar>
Scalar sigma2_from_spacing(Scalar delta_theta) {
  if (!(delta_theta > 0)) throw std::invalid_argument("angular spacing must be positive");
  const Scalar a = Scalar(1) - std::cos(delta_theta / Scalar(2));
  return std::sqrt(a * a / (Scalar(2) * std::log(Scalar(2))));
}

/// Batched h1 over a fixed set of targets (field cells or mesh vertices).
///
/// Values whose exponent exceeds kFlushExponent (h1 < 4.3e-18) are stored as
/// exactly 0 so the gradient pass can skip them.
template <typename Scalar>
class FieldSensor {
 public:
  static constexpr Scalar kFlushExponent = Scalar(40);

  FieldSensor() = default;

  FieldSensor(std::vector<Vec3<Scalar>> positions, std::vector<Vec3<Scalar>> directions)
      : positions_(std::move(positions)), directions_(std::move(directions)) {
    if (positions_.size() != directions_.size()) throw std::invalid_argument("sensor: size mismatch");
  }

  explicit FieldSensor(const VirtualField<Scalar>& field) {
    positions_.reserve(field.size());
    directions_.reserve(field.size());
    for (const auto& q : field.points()) {
      positions_.push_back(q.position);
      directions_.push_back(q.direction());
    }
  }

  std::size_t size() const { return positions_.size(); }

  void evaluate(const DroneState<Scalar>& p, const SensingParams<Scalar>& params, std::span<Scalar> out) const {
    if (out.size() != size()) throw std::invalid_argument("sensor: output size mismatch");
    const detail::Kernel<Scalar> k(params);
    const Vec3<Scalar> pos = p.position();
    const Vec3<Scalar> cam = p.direction();
    for (std::size_t j = 0; j < size(); ++j) {
      Scalar e;
      if (!k.exponent(pos, cam, positions_[j], directions_[j], e) || e > kFlushExponent)
        out[j] = Scalar(0);
      else
        out[j] = std::exp(-e);
    }
  }

  /// Gradient at target j; zero (and flagged) when degenerate.
  SensingGradient<Scalar> gradient(const DroneState<Scalar>& p, const SensingParams<Scalar>& params,
                                   std::size_t j) const {
    const detail::Kernel<Scalar> k(params);
    const detail::CameraFrame<Scalar> cam(p);
    SensingGradient<Scalar> out;
    Scalar h;
    if (!k.value_and_gradient(p.position(), cam.axis, cam.d_yaw, cam.d_pitch, positions_[j], directions_[j], h,
                              out.gradient)) {
      out.gradient.setZero();
      out.degenerate = true;
    }
    return out;
  }

  /// sum_j weight_j * d h1_j / d pose over the selected targets.
  template <typename Weights, typename Indices>
  Vec5<Scalar> weighted_gradient(const DroneState<Scalar>& p, const SensingParams<Scalar>& params,
                                 const Indices& targets, const Weights& weight) const {
    const detail::Kernel<Scalar> k(params);
    const detail::CameraFrame<Scalar> cam(p);
    const Vec3<Scalar> pos = p.position();
    Vec5<Scalar> acc = Vec5<Scalar>::Zero();
    Vec5<Scalar> g;
    Scalar h;
    for (const auto j : targets) {
      const Scalar w = weight(j);
      if (w == Scalar(0)) continue;
      if (k.value_and_gradient(pos, cam.axis, cam.d_yaw, cam.d_pitch, positions_[j], directions_[j], h, g))
        acc += w * g;
    }
    return acc;
  }

  const Vec3<Scalar>& position(std::size_t j) const { return positions_[j]; }
  const Vec3<Scalar>& direction(std::size_t j) const { return directions_[j]; }

 private:
  std::vector<Vec3<Scalar>> positions_;
  std::vector<Vec3<Scalar>> directions_;
};

using SensingParamsd = SensingParams<double>;
using FieldSensord = FieldSensor<double>;

}  // namespace covrecon
