#include "covrecon/sensing.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace covrecon;
using std::numbers::pi;

namespace {

ObservationPointd point(double x, double y, double z, double th, double tv) {
  return {Vec3d(x, y, z), th, tv, 0};
}

}  // namespace

TEST_SUITE("sensing") {

TEST_CASE("geometry of aligned and perpendicular pairs") {
  const SensingParamsd prm;
  const DroneStated p(0, 0, 2, 0, pi / 2);
  const auto g0 = sensing_geometry(p, point(0, 0, 1, 0, pi / 2), prm);
  CHECK(std::abs(g0.phi1) < 1e-7);
  CHECK(std::abs(g0.phi2) < 1e-7);
  CHECK(std::abs(g0.rho) < 1e-15);

  const auto g1 = sensing_geometry(p, point(1, 0, 2, 0, pi / 2), prm);
  CHECK(g1.phi1 == doctest::Approx(pi / 2));
  CHECK(g1.phi2 == doctest::Approx(pi / 2));
  CHECK(std::abs(g1.rho) < 1e-15);

  CHECK_THROWS_AS(sensing_geometry(DroneStated(0, 0, 1, 0, pi / 2), point(0, 0, 1, 0, pi / 2), prm),
                  DegenerateGeometryError);
}

TEST_CASE("scalar performance values") {
  const SensingParamsd prm;
  CHECK(sensing_performance(DroneStated(0, 0, 2, 0, pi / 2), point(0, 0, 1, 0, pi / 2), prm) ==
        doctest::Approx(1.0));
  // Camera tilted to 45 degrees over a point straight below: phi1 = pi/4, phi2 = 0.
  const double h = sensing_performance(DroneStated(0, 0, 0, 0, pi / 4), point(0, 0, -1, 0, pi / 2), prm);
  const double a = 1 - std::sqrt(2.0) / 2;
  CHECK(h == doctest::Approx(std::exp(-a * a / (2 * 0.07 * 0.07))));
  CHECK(h == doctest::Approx(1.58e-4).epsilon(5e-3));
  CHECK(sensing_performance(DroneStated(0, 0, 2.3, 0, pi / 2), point(0, 0, 1, 0, pi / 2), prm) ==
        doctest::Approx(0.60653066));
  CHECK(sensing_performance(DroneStated(0, 0, 1, 0, pi / 2), point(0, 0, 1, 0, pi / 2), prm) == 0.0);
}

TEST_CASE("sigma2 from angular spacing") {
  CHECK(sigma2_from_spacing(pi / 2) == doctest::Approx(0.24876).epsilon(1e-4));
  CHECK(sigma2_from_spacing(1e-6) < 1e-12);
  CHECK_THROWS(sigma2_from_spacing(0.0));
  // Half-spacing misalignment of the surface direction yields exactly 0.5.
  for (double dtheta : {0.1, 0.3, pi / 2}) {
    SensingParamsd prm;
    prm.sigma2 = sigma2_from_spacing(dtheta);
    const double tv = pi / 2 - dtheta / 2;
    const double h = sensing_performance(DroneStated(0, 0, 1, 0, pi / 2), point(0, 0, 0, 0, tv), prm);
    CHECK(h == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("performance lies in [0, 1] and is invariant under rotation about z") {
  const SensingParamsd prm;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-2, 2), th(-pi, pi), tv(0.2, pi / 2);
  for (int k = 0; k < 500; ++k) {
    const DroneStated p(c(rng), c(rng), c(rng) + 2, th(rng), tv(rng));
    const ObservationPointd q = point(c(rng), c(rng), c(rng), th(rng), tv(rng));
    const double h = sensing_performance(p, q, prm);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    const double a = th(rng);
    const Eigen::Matrix3d R = Eigen::AngleAxisd(a, Vec3d::UnitZ()).toRotationMatrix();
    const Vec3d pr = R * p.position(), qr = R * q.position;
    const DroneStated p2(pr.x(), pr.y(), pr.z(), p.theta_h() + a, p.theta_v());
    const ObservationPointd q2 = point(qr.x(), qr.y(), qr.z(), q.theta_h + a, q.theta_v);
    CHECK(sensing_performance(p2, q2, prm) == doctest::Approx(h).epsilon(1e-9).scale(1e-300));
  }
}

TEST_CASE("performance decreases with distance error along the line of sight") {
  const SensingParamsd prm;
  const ObservationPointd q = point(0, 0, 0, 0, pi / 2);
  double prev = 2.0;
  for (double z = 1.0; z < 3.0; z += 0.05) {
    const double h = sensing_performance(DroneStated(0, 0, z, 0, pi / 2), q, prm);
    CHECK(h < prev);
    prev = h;
  }
  prev = 2.0;
  for (double z = 1.0; z > 0.05; z -= 0.05) {
    const double h = sensing_performance(DroneStated(0, 0, z, 0, pi / 2), q, prm);
    CHECK(h < prev);
    prev = h;
  }
}

TEST_CASE("analytic gradient matches central differences") {
  SensingParamsd prm;
  prm.sigma1 = 0.3;
  prm.sigma2 = 0.4;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(-0.5, 0.5), th(-pi, pi), tv(0.4, 1.4);
  int checked = 0;
  for (int k = 0; k < 400; ++k) {
    const DroneStated p(c(rng), c(rng), 1.0 + c(rng), th(rng), tv(rng));
    const Vec3d target = p.position() + 0.9 * p.direction() + 0.3 * Vec3d(c(rng), c(rng), c(rng));
    const ObservationPointd q = point(target.x(), target.y(), target.z(), th(rng), tv(rng));
    if (sensing_performance(p, q, prm) < 1e-6) continue;
    const auto an = sensing_gradient(p, q, prm);
    const Vec5d fd = oracle::fd_gradient(p, q, prm);
    CHECK_FALSE(an.degenerate);
    CHECK((an.gradient - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("gradient vanishes at perfect alignment and flags coincidence") {
  const SensingParamsd prm;
  const auto g = sensing_gradient(DroneStated(0, 0, 2, 0, pi / 2), point(0, 0, 1, 0, pi / 2), prm);
  CHECK(g.gradient.norm() < 1e-9);
  CHECK_FALSE(g.degenerate);
  const auto d = sensing_gradient(DroneStated(0, 0, 1, 0, pi / 2), point(0, 0, 1, 0, pi / 2), prm);
  CHECK(d.degenerate);
  CHECK(d.gradient.isZero());
}

TEST_CASE("batched sensor agrees with the scalar function") {
  const SensingParamsd prm;
  const Regiond b(Vec3d(-1, -1, 0), Vec3d(1, 1, 1));
  const VirtualFieldd f(b, {-pi, pi}, {pi / 3, pi / 2}, Vec5d(0.5, 0.5, 0.5, 0.6, 0.3));
  const FieldSensord sensor(f);
  const DroneStated p(0.2, -0.1, 1.6, 0.4, 1.3);
  std::vector<double> out(f.size());
  sensor.evaluate(p, prm, out);
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double h = sensing_performance(p, f[j], prm);
    if (h < 1e-17)
      CHECK(out[j] <= h);
    else
      CHECK(out[j] == doctest::Approx(h).epsilon(1e-12));
    const auto g = sensor.gradient(p, prm, j);
    CHECK((g.gradient - sensing_gradient(p, f[j], prm).gradient).norm() < 1e-12);
  }
}

}
