#include "covrecon/metrics.hpp"

#include <doctest.h>

#include <random>

using namespace covrecon;

namespace {

TriangleMesh cloud(std::vector<Vec3d> v) {
  TriangleMesh m;
  m.vertices = std::move(v);
  return m;
}

TriangleMesh grid(int n, double step, const Vec3d& offset = Vec3d::Zero()) {
  std::vector<Vec3d> v;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v.push_back(offset + Vec3d(i * step, j * step, 0));
  return cloud(v);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("closest point distance") {
  const auto tri = cloud({Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(0, 1, 0)});
  CHECK(closest_point_distance(Vec3d(0, 0, 1), tri) == doctest::Approx(1.0));
  CHECK(closest_point_distance(Vec3d(1, 0, 0), tri) == 0.0);
  CHECK_THROWS(closest_point_distance(Vec3d(0, 0, 0), TriangleMesh{}));
}

TEST_CASE("identical meshes score exactly one") {
  const auto g = grid(20, 0.05);
  const auto r = evaluate_reconstruction(g, g, 0.05);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f_score == 1.0);
}

TEST_CASE("half copy") {
  const auto g = grid(20, 0.2);
  TriangleMesh half;
  half.vertices.assign(g.vertices.begin(), g.vertices.begin() + 200);
  const auto [p, r] = precision_recall(half, g, 0.05);
  CHECK(p == 1.0);
  CHECK(r == 0.5);
}

TEST_CASE("shift by twice eta") {
  const auto g = grid(10, 0.5);
  const auto s = grid(10, 0.5, Vec3d(0, 0, 0.1));
  const auto r = evaluate_reconstruction(s, g, 0.05);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f_score == 0.0);
}

TEST_CASE("threshold is strict") {
  const auto a = cloud({Vec3d(0, 0, 0)});
  const auto b = cloud({Vec3d(0.25, 0, 0)});
  CHECK(precision_recall(a, b, 0.25).first == 0.0);
  CHECK(precision_recall(a, b, 0.2500001).first == 1.0);
}

TEST_CASE("F-score arithmetic") {
  CHECK(f_score(1.0, 0.5) == doctest::Approx(2.0 / 3.0));
  CHECK(f_score(0.0, 0.0) == 0.0);
  CHECK(f_score(0.6, 0.6) == doctest::Approx(0.6));
  CHECK_THROWS(f_score(1.2, 0.5));
  CHECK_THROWS(f_score(-0.1, 0.5));
}

TEST_CASE("errors and empty reconstructions") {
  const auto g = grid(3, 0.1);
  CHECK_THROWS(precision_recall(TriangleMesh{}, g, 0.05));
  CHECK_THROWS(precision_recall(g, g, 0.0));
  const auto r = evaluate_reconstruction(TriangleMesh{}, g, 0.05, 12.5);
  CHECK(r.f_score == 0.0);
  CHECK(r.sim_time == 12.5);
  CHECK(r.truth_vertices == 9);
  CHECK_THROWS(evaluate_reconstruction(g, TriangleMesh{}, 0.05));
}

TEST_CASE("hashed counts equal brute force") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_int_distribution<int> size(1, 500);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Vec3d> q(static_cast<std::size_t>(size(rng))), r(static_cast<std::size_t>(size(rng)));
    for (auto& v : q) v = Vec3d(u(rng), u(rng), u(rng));
    for (auto& v : r) v = Vec3d(u(rng), u(rng), u(rng));
    // points on exact eta-spaced lattice positions stress the cell boundaries
    for (std::size_t k = 0; k < r.size() / 4; ++k) q[k % q.size()] = r[k] + Vec3d(0.05, 0, 0);
    for (const double eta : {0.01, 0.05, 0.2}) CHECK(count_within(q, r, eta) == count_within_brute_force(q, r, eta));
  }
}

}
