#include "covrecon/geometry.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace covrecon;
using std::numbers::pi;

TEST_SUITE("geometry") {

TEST_CASE("observation direction examples") {
  const ObservationPointd q{Vec3d(1, 2, 3), 0.0, pi / 2, 0};
  const auto pr = state_projections(q);
  CHECK(pr.position == Vec3d(1, 2, 3));
  CHECK(pr.angles.isApprox(Eigen::Vector2d(0, pi / 2)));
  CHECK((pr.direction - Vec3d(0, 0, 1)).norm() < 1e-15);

  CHECK((upward_direction(0.0, pi / 6) - Vec3d(std::sqrt(3.0) / 2, 0, 0.5)).norm() < 1e-15);
  CHECK((upward_direction(pi, pi / 2) - Vec3d(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("camera looks down for pitch pi/2") {
  const DroneStated p(0, 0, 2, 0.3, pi / 2);
  CHECK((p.direction() - Vec3d(0, 0, -1)).norm() < 1e-15);
}

TEST_CASE("directions are unit length") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> yaw(-10, 10), pitch(1e-3, pi / 2);
  for (int k = 0; k < 1000; ++k) {
    const DroneStated p(0, 0, 0, yaw(rng), pitch(rng));
    CHECK(std::abs(p.direction().norm() - 1.0) < 1e-12);
    CHECK(std::abs(upward_direction(p.theta_h(), p.theta_v()).norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("drone state validation and yaw wrapping") {
  CHECK_THROWS_AS(DroneStated(0, 0, 0, 0, 0), GeometryError);
  CHECK_THROWS_AS(DroneStated(0, 0, 0, 0, pi / 2 + 1e-9), GeometryError);
  CHECK_THROWS_AS(DroneStated(std::nan(""), 0, 0, 0, 1), GeometryError);
  const DroneStated p(0, 0, 0, 3 * pi / 2, 1.0);
  CHECK(p.theta_h() == doctest::Approx(-pi / 2));
  CHECK(DroneStated(0, 0, 0, pi, 1.0).theta_h() == doctest::Approx(-pi));
  const auto moved = p.integrated(Vec5d(1, 0, 0, -pi, 0), 1.0);
  CHECK(moved.x() == 1.0);
  CHECK(moved.theta_h() == doctest::Approx(pi / 2));
}

TEST_CASE("wrap_angle range") {
  for (double a = -20; a < 20; a += 0.01) {
    const double w = wrap_angle(a);
    CHECK(w >= -pi);
    CHECK(w < pi);
    CHECK(std::abs(std::remainder(w - a, 2 * pi)) < 1e-9);
  }
  CHECK(angle_difference(pi - 0.1, -pi + 0.1) == doctest::Approx(-0.2));
}

TEST_CASE("discretization counts") {
  const Regiond small(Vec3d::Constant(-0.3), Vec3d::Constant(0.3));
  const VirtualFieldd f(small, {0.0, 0.3}, {pi / 3, pi / 3 + 0.3}, Vec5d::Constant(0.3));
  CHECK(f.size() == 8);

  const Regiond full(Vec3d(-3, -3, 0), Vec3d(3, 3, 2));
  const VirtualFieldd g(full, {-pi, pi}, {pi / 3, pi / 2}, Vec5d::Constant(0.3));
  CHECK(g.counts() == std::array<std::size_t, 5>{20, 20, 7, 21, 2});
  CHECK(g.size() == 117600);

  const VirtualFieldd h(small, {0.0, 0.3}, {pi / 3, pi / 2}, Vec5d(10, 0.3, 0.3, 0.3, 5));
  CHECK(h.counts()[0] == 1);
  CHECK(h.counts()[4] == 1);

  CHECK_THROWS_AS(VirtualFieldd(small, {0.0, 0.3}, {0.5, 1.0}, Vec5d(0.3, 0, 0.3, 0.3, 0.3)), GeometryError);
  CHECK_THROWS_AS(Regiond(Vec3d(0, 0, 0), Vec3d(1, 0, 1)), GeometryError);
}

TEST_CASE("cell centres are interval midpoints in x-major order") {
  const Regiond b(Vec3d(0, 0, 0), Vec3d(1, 2, 1));
  const VirtualFieldd f(b, {-pi, pi}, {pi / 3, pi / 2}, Vec5d(0.5, 1.0, 1.0, pi, pi / 6));
  REQUIRE(f.counts() == std::array<std::size_t, 5>{2, 2, 1, 2, 1});
  CHECK(f[0].position.isApprox(Vec3d(0.25, 0.5, 0.5)));
  CHECK(f[0].theta_h == doctest::Approx(-pi / 2));
  CHECK(f[1].theta_h == doctest::Approx(pi / 2));
  CHECK(f[2].position.isApprox(Vec3d(0.25, 1.5, 0.5)));
  CHECK(f[4].position.isApprox(Vec3d(0.75, 0.5, 0.5)));
  for (std::size_t j = 0; j < f.size(); ++j) {
    CHECK(f[j].cell_index == j);
    CHECK(f.spatial_index(j) == j / 2);
  }
}

TEST_CASE("locate round-trips cell centres and partitions the field") {
  const Regiond b(Vec3d(-3, -3, 0), Vec3d(3, 3, 2));
  const VirtualFieldd f(b, {-pi, pi}, {pi / 3, pi / 2}, Vec5d(0.5, 0.5, 0.5, 0.3, 0.3));
  for (std::size_t j = 0; j < f.size(); j += 37) CHECK(f.locate(f[j].position, f[j].theta_h, f[j].theta_v) == j);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(-3, 3), z(0, 2), th(-pi, pi), tv(pi / 3, pi / 2);
  for (int k = 0; k < 500; ++k) {
    const Vec3d pos(x(rng), x(rng), z(rng));
    const double a = th(rng), v = tv(rng);
    const std::size_t j = f.locate(pos, a, v);
    REQUIRE(j < f.size());
    CHECK(f.locate(f[j].position, f[j].theta_h, f[j].theta_v) == j);
    CHECK(f.locate(pos, a + 2 * pi, v) == j);
  }
  CHECK_THROWS_AS(f.locate(Vec3d(4, 0, 1), 0, 1.2), GeometryError);
}

TEST_CASE("region_contains is closed") {
  const Regiond r(Vec3d::Constant(-1), Vec3d::Constant(1));
  CHECK(region_contains(r, Vec3d(0, 0, 0)));
  CHECK(region_contains(r, Vec3d(1, 0, -1)));
  CHECK_FALSE(region_contains(r, Vec3d(2, 0, 0)));
}

}
