#include "covrecon/mesh.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <numbers>
#include <random>

using namespace covrecon;
using std::numbers::pi;

namespace {

TriangleMesh unit_triangle() {
  TriangleMesh m;
  m.vertices = {Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(0, 1, 0)};
  m.faces = {{0, 1, 2}};
  return m;
}

std::vector<Vec3d> planar_grid(double z, double half, double step) {
  std::vector<Vec3d> out;
  const int n = static_cast<int>(std::lround(2 * half / step));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) out.emplace_back(-half + i * step, -half + j * step, z);
  return out;
}

}  // namespace

TEST_SUITE("mesh") {

TEST_CASE("PLY round trips") {
  const TriangleMesh empty;
  const std::string e = write_mesh(empty);
  CHECK(e.find("element vertex 0") != std::string::npos);
  CHECK(parse_mesh(e) == empty);

  const std::string t = write_mesh(unit_triangle());
  CHECK(parse_mesh(t) == unit_triangle());
  CHECK(write_mesh(parse_mesh(t)) == t);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 10);
  TriangleMesh r;
  for (int k = 0; k < 50; ++k) r.vertices.emplace_back(g(rng), g(rng), g(rng) * 1e-7);
  for (std::uint32_t k = 0; k + 2 < 50; ++k) r.faces.push_back({k, k + 1, k + 2});
  CHECK(parse_mesh(write_mesh(r)) == r);
}

TEST_CASE("PLY parser accepts extra properties, elements and polygons") {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment hi\nelement vertex 4\nproperty float y\nproperty float x\n"
      "property uchar red\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n"
      "element edge 1\nproperty int a\nproperty int b\nend_header\n"
      "0 0 9 0\n0 1 9 0\n1 1 9 0\n1 0 9 0\n4 0 1 2 3\n0 1\n";
  const auto m = parse_mesh(text);
  REQUIRE(m.vertices.size() == 4);
  CHECK(m.vertices[1] == Vec3d(1, 0, 0));
  CHECK(m.faces.size() == 2);
  CHECK(m.faces[1] == std::array<std::uint32_t, 3>{0, 2, 3});
}

TEST_CASE("PLY errors") {
  std::string bad = write_mesh(unit_triangle());
  bad.replace(bad.rfind("3 0 1 2"), 7, "3 0 1 99");
  CHECK_THROWS_AS(parse_mesh(bad), MeshFormatError);
  CHECK_THROWS_AS(parse_mesh("not a ply"), MeshFormatError);
  CHECK_THROWS_AS(parse_mesh("ply\nformat binary_little_endian 1.0\nend_header\n"), MeshFormatError);
  CHECK_THROWS_AS(parse_mesh("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                             "property float z\nend_header\n0 0 0\n"),
                  MeshFormatError);
  CHECK_THROWS_AS(read_mesh_file("/nonexistent/dir/x.ply"), std::exception);
}

TEST_CASE("PLY file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "covrecon_mesh_test.ply";
  write_mesh_file(path, unit_triangle());
  CHECK(read_mesh_file(path) == unit_triangle());
  std::filesystem::remove(path);
}

TEST_CASE("vertex normals") {
  const auto n = vertex_normals(unit_triangle());
  for (const auto& v : n) CHECK((v - Vec3d(0, 0, 1)).norm() < 1e-15);
  TriangleMesh lone = unit_triangle();
  lone.vertices.emplace_back(5, 5, 5);
  CHECK(vertex_normals(lone)[3].isZero());
}

TEST_CASE("core point grid") {
  const Regiond b(Vec3d(-3, -3, 0), Vec3d(3, 3, 2));
  const auto pts = grid_core_points(b, 0.6);
  CHECK(pts.size() == 10 * 10 * 4);
  CHECK(pts.front().isApprox(Vec3d(-2.7, -2.7, 0.25)));
  for (const auto& p : pts) CHECK(region_contains(b, p));
}

TEST_CASE("binning") {
  FeedbackParams p;
  p.core_points = {Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(2, 0, 0), Vec3d(3, 0, 0)};
  const Regiond b(Vec3d(-1, -1, -1), Vec3d(4, 1, 1));
  TriangleMesh m;
  m.vertices = {Vec3d(3, 0, 0), Vec3d(9, 0, 0), Vec3d(0.5, 0, 0), Vec3d(1.4, 0.2, 0), Vec3d(2.6, 0, 0.5)};
  const auto c = bin_vertices(m, p, b);
  CHECK(c == std::vector<int>{1, 1, 0, 2});
  CHECK(std::accumulate(c.begin(), c.end(), 0) == 4);
  FeedbackParams none;
  CHECK_THROWS(bin_vertices(m, none, b));
}

TEST_CASE("binning matches brute-force nearest core") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3), z(0, 2);
  const Regiond b(Vec3d(-3, -3, 0), Vec3d(3, 3, 2));
  FeedbackParams p;
  p.core_points = grid_core_points(b, 0.6);
  std::vector<Vec3d> pts;
  for (int k = 0; k < 3000; ++k) pts.emplace_back(u(rng) * 1.1, u(rng) * 1.1, z(rng) * 1.1);
  // grid-aligned points hit exact ties between neighbouring cores
  for (int k = 0; k < 200; ++k) pts.emplace_back(-3 + 0.6 * (k % 10), -2.7, 0.25 + 0.5 * (k % 4));
  const auto counts = CoreBinner(p.core_points).bin(pts, b);
  std::vector<int> ref(p.core_points.size(), 0);
  for (const auto& v : pts) {
    if (!region_contains(b, v)) continue;
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.core_points.size(); ++k)
      if ((v - p.core_points[k]).squaredNorm() < (v - p.core_points[best]).squaredNorm()) best = k;
    ++ref[best];
  }
  CHECK(counts == ref);
}

TEST_CASE("binning a single layer of cores stays fast and exact") {
  // one core layer in z used to collapse the bucket size to ~1e-3 m
  const Regiond b(Vec3d(-0.6, 0.4, 0), Vec3d(0.6, 1.6, 0.4));
  const auto cores = grid_core_points(b, 0.6);
  REQUIRE(cores.size() == 4);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3d> pts;
  for (int k = 0; k < 20000; ++k) pts.emplace_back(-0.6 + 1.2 * u(rng), 0.4 + 1.2 * u(rng), 0.4 * u(rng));
  const auto start = std::chrono::steady_clock::now();
  const auto counts = CoreBinner(cores).bin(pts, b);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 0.5);
  std::vector<int> ref(cores.size(), 0);
  for (const auto& v : pts) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cores.size(); ++k)
      if ((v - cores[k]).squaredNorm() < (v - cores[best]).squaredNorm()) best = k;
    ++ref[best];
  }
  CHECK(counts == ref);
}

TEST_CASE("grid delta") {
  CHECK(grid_delta(std::vector<int>{12}, std::vector<int>{5}) == std::vector<int>{7});
  CHECK(grid_delta(std::vector<int>{3, 4}, std::vector<int>{}) == std::vector<int>{3, 4});
  CHECK(grid_delta(std::vector<int>{3, 4}, std::vector<int>{3, 4}) == std::vector<int>{0, 0});
  CHECK_THROWS(grid_delta(std::vector<int>{3, 4}, std::vector<int>{3}));
}

TEST_CASE("kernel weights and h2 scalar values") {
  const Regiond b(Vec3d(-0.25, -0.25, -0.25), Vec3d(0.25, 0.25, 0.25));
  const VirtualFieldd f(b, {-pi, pi}, {pi / 3, pi / 2}, Vec5d(0.5, 0.5, 0.5, pi, pi / 6));
  REQUIRE(f.spatial_cells() == 1);
  const double sigma4 = 0.4;
  const Vec3d c = f[0].position;
  const std::vector<Vec3d> cores{c, c + Vec3d(sigma4, 0, 0), c + Vec3d(0, sigma4, sigma4)};
  const auto w = precompute_kernel_weights(f, cores, sigma4);
  CHECK(w.weights(0, 0) == 1.0);
  CHECK(w.weights(0, 1) == doctest::Approx(0.60653066));
  CHECK(w.weights(0, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(w.cells() == f.size());

  const auto zero = h2_grid(std::vector<int>{0, 0, 0}, w, 0.7);
  CHECK(zero.isZero());
  CHECK(zero.size() == static_cast<Eigen::Index>(f.size()));

  const auto one = h2_grid(std::vector<int>{1, 0, 0}, w, 1.0);
  for (Eigen::Index j = 0; j < one.size(); ++j) CHECK(one[j] == doctest::Approx(0.58002).epsilon(1e-4));
  const auto diag = h2_grid(std::vector<int>{0, 0, 1}, w, 1.0);
  CHECK(diag[0] == doctest::Approx(0.21339).epsilon(1e-4));

  CHECK(h2_m3c2(std::vector<double>{0, 0, 0}, w).isZero());
  CHECK(h2_m3c2(std::vector<double>{0.1, 0, 0}, w)[0] == doctest::Approx(0.1));
  CHECK(h2_m3c2(std::vector<double>{0, 0.1, 0}, w)[0] == doctest::Approx(0.060653).epsilon(1e-4));
  CHECK_THROWS(h2_m3c2(std::vector<double>{-0.1, 0, 0}, w));
}

TEST_CASE("h2 with precomputed weights equals dense re-evaluation") {
  const Regiond b(Vec3d(-3, -3, 0), Vec3d(3, 3, 2));
  const VirtualFieldd f(b, {-pi, pi}, {pi / 3, pi / 2}, Vec5d(0.5, 0.5, 0.5, 0.6, 0.3));
  const auto cores = grid_core_points(b, 0.6);
  const double sigma4 = 0.4, kappa = 0.7;
  const auto w = precompute_kernel_weights(f, cores, sigma4);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> dv(-4, 4);
  std::vector<int> delta(cores.size());
  for (auto& v : delta) v = dv(rng) * (dv(rng) > 2 ? 1 : 0);
  const auto h2 = h2_grid(delta, w, kappa);
  double worst = 0.0;
  for (std::size_t j = 0; j < f.size(); j += 7) {
    double ref = 0.0;
    for (std::size_t k = 0; k < cores.size(); ++k) {
      const double x = delta[k] / kappa;
      const double t = std::tanh(x * x);
      ref += t * t * std::exp(-(f[j].position - cores[k]).squaredNorm() / (2 * sigma4 * sigma4));
    }
    worst = std::max(worst, std::abs(ref - h2[static_cast<Eigen::Index>(j)]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("M3C2 on identical and offset planes") {
  FeedbackParams p;
  p.core_points = {Vec3d(0, 0, 0), Vec3d(0.5, -0.5, 0.05), Vec3d(10, 10, 0)};
  const auto prev = planar_grid(0.0, 2.0, 0.05);
  const auto same = m3c2_distance(prev, prev, p);
  CHECK(same.valid[0]);
  CHECK(same.distance[0] == doctest::Approx(0).scale(1));
  CHECK_FALSE(same.valid[2]);
  CHECK(same.distance[2] == 0.0);

  const auto now = planar_grid(0.1, 2.0, 0.05);
  const auto off = m3c2_distance(prev, now, p);
  CHECK(off.valid[0]);
  CHECK(off.valid[1]);
  CHECK(std::abs(off.distance[0] - 0.1) <= 1e-6);
  CHECK(std::abs(off.distance[1] - 0.1) <= 1e-6);
  CHECK_THROWS(m3c2_distance(std::vector<Vec3d>{}, now, p));
}

TEST_CASE("M3C2 measures displacement along the local normal only") {
  FeedbackParams p;
  p.core_points = {Vec3d(0, 0, 0)};
  const auto prev = planar_grid(0.0, 2.0, 0.05);
  auto now = prev;
  for (auto& v : now) v += Vec3d(0.02, 0.0, 0.0);  // tangential slide
  CHECK(m3c2_distance(prev, now, p).distance[0] < 1e-3);
  const std::vector<Vec3d> line{Vec3d(0, 0, 0), Vec3d(0.1, 0, 0), Vec3d(0.2, 0, 0), Vec3d(0.3, 0, 0)};
  CHECK_FALSE(m3c2_distance(line, line, p).valid[0]);
}

}
