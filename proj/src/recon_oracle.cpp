#include "covrecon/recon_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>

namespace covrecon {

void OracleParams::validate() const {
  if (!(reveal_threshold > 0) || !(noise_scale >= 0) || !(noise_halflife > 0) || !(refine_threshold > 0))
    throw std::invalid_argument("oracle: thresholds and half-life must be positive, noise nonnegative");
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec3d noise_direction(std::uint64_t seed, std::uint64_t vertex, std::uint64_t event) {
  const std::uint64_t key = mix64(mix64(mix64(seed) ^ vertex) ^ event);
  const std::uint64_t a = mix64(key);
  const std::uint64_t b = mix64(key ^ 0xd1b54a32d192ed03ULL);
  // 53-bit uniforms; z uniform on [-1, 1] with a uniform azimuth is uniform on the sphere.
  const double u1 = static_cast<double>(a >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  const double z = 2.0 * u1 - 1.0;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi), z};
}

namespace {

Vec3d observation_direction(const Vec3d& normal, const AngleRange<double>& pitch) {
  if (normal.squaredNorm() == 0.0) return upward_direction(0.0, pitch.hi);
  const double th = std::atan2(normal.y(), normal.x());
  const double tv = std::clamp(std::asin(std::clamp(normal.z(), -1.0, 1.0)), pitch.lo, pitch.hi);
  return upward_direction(th, tv);
}

}  // namespace

ExposureField::ExposureField(TriangleMesh ground_truth, const OracleParams& params, AngleRange<double> pitch_range)
    : truth_(std::move(ground_truth)), params_(params) {
  params_.validate();
  truth_.validate();
  normals_ = vertex_normals(truth_);
  exposure_.assign(truth_.vertices.size(), 0.0);
  std::vector<Vec3d> dirs;
  dirs.reserve(normals_.size());
  for (const auto& n : normals_) dirs.push_back(observation_direction(n, pitch_range));
  sensor_ = FieldSensord(truth_.vertices, std::move(dirs));
}

void accumulate_exposure(ExposureField& field, std::span<const DroneStated> drones, const SensingParamsd& sensing,
                         double dt) {
  if (!(dt > 0)) throw std::invalid_argument("accumulate_exposure: dt must be positive");
  if (drones.empty()) return;
  const std::size_t n = field.exposure_.size();
  std::vector<double> best(n, 0.0);
  field.scratch_.resize(n);
  for (const auto& p : drones) {
    field.sensor_.evaluate(p, sensing, field.scratch_);
    for (std::size_t l = 0; l < n; ++l) best[l] = std::max(best[l], field.scratch_[l]);
  }
  for (std::size_t l = 0; l < n; ++l) field.exposure_[l] += dt * best[l];
}

MeshEvent emit_reconstruction_event(ExposureField& field, long long event_index, double sim_time) {
  if (event_index <= field.last_event_)
    throw EventOrderError("reconstruction event " + std::to_string(event_index) + " does not follow " +
                          std::to_string(field.last_event_));
  field.last_event_ = event_index;
  const OracleParams& prm = field.params_;
  const auto& truth = field.truth_;
  const auto& e = field.exposure_;
  constexpr std::uint32_t kHidden = 0xffffffffu;

  MeshEvent ev;
  ev.index = event_index;
  ev.sim_time = sim_time;
  std::vector<std::uint32_t> remap(truth.vertices.size(), kHidden);
  const auto noise_event = static_cast<std::uint64_t>(prm.resample_noise ? event_index : 0);
  for (std::size_t l = 0; l < truth.vertices.size(); ++l) {
    if (!(e[l] >= prm.reveal_threshold)) continue;
    remap[l] = static_cast<std::uint32_t>(ev.mesh.vertices.size());
    ev.mesh.vertices.push_back(truth.vertices[l] +
                               field.noise_magnitude(e[l]) * noise_direction(prm.seed, l, noise_event));
  }

  std::unordered_map<std::uint64_t, std::uint32_t> midpoints;
  auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
    const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
    const auto [it, inserted] = midpoints.try_emplace(key, static_cast<std::uint32_t>(ev.mesh.vertices.size()));
    if (inserted) ev.mesh.vertices.push_back(0.5 * (ev.mesh.vertices[a] + ev.mesh.vertices[b]));
    return it->second;
  };
  for (const auto& f : truth.faces) {
    const std::uint32_t a = remap[f[0]], b = remap[f[1]], c = remap[f[2]];
    if (a == kHidden || b == kHidden || c == kHidden) continue;
    const bool refine =
        e[f[0]] >= prm.refine_threshold && e[f[1]] >= prm.refine_threshold && e[f[2]] >= prm.refine_threshold;
    if (!refine) {
      ev.mesh.faces.push_back({a, b, c});
      continue;
    }
    const std::uint32_t ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    ev.mesh.faces.push_back({a, ab, ca});
    ev.mesh.faces.push_back({ab, b, bc});
    ev.mesh.faces.push_back({ca, bc, c});
    ev.mesh.faces.push_back({ab, bc, ca});
  }
  return ev;
}

namespace {

std::size_t steps_for(double length, double spacing) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(length / spacing)));
}

/// Grid-triangulated parallelogram; winding follows e1 x e2.
void add_quad(TriangleMesh& m, const Vec3d& origin, const Vec3d& e1, const Vec3d& e2, double spacing) {
  const std::size_t n1 = steps_for(e1.norm(), spacing), n2 = steps_for(e2.norm(), spacing);
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  for (std::size_t i = 0; i <= n1; ++i)
    for (std::size_t j = 0; j <= n2; ++j)
      m.vertices.push_back(origin + e1 * (static_cast<double>(i) / static_cast<double>(n1)) +
                           e2 * (static_cast<double>(j) / static_cast<double>(n2)));
  auto id = [&](std::size_t i, std::size_t j) { return base + static_cast<std::uint32_t>(i * (n2 + 1) + j); };
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
}

/// Barycentric-lattice triangle; winding follows (b - a) x (c - a).
void add_triangle(TriangleMesh& m, const Vec3d& a, const Vec3d& b, const Vec3d& c, double spacing) {
  const std::size_t k = steps_for(std::max((b - a).norm(), (c - a).norm()), spacing);
  std::vector<std::uint32_t> row_start(k + 1, 0);
  for (std::size_t i = 0; i <= k; ++i) {
    row_start[i] = static_cast<std::uint32_t>(m.vertices.size());
    for (std::size_t j = 0; i + j <= k; ++j)
      m.vertices.push_back(a + (b - a) * (static_cast<double>(i) / static_cast<double>(k)) +
                           (c - a) * (static_cast<double>(j) / static_cast<double>(k)));
  }
  auto id = [&](std::size_t i, std::size_t j) { return row_start[i] + static_cast<std::uint32_t>(j); };
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; i + j < k; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
      if (i + j + 1 < k) m.faces.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    }
}

/// Open-bottomed box resting on the floor.
void add_box(TriangleMesh& m, const Vec3d& lo, const Vec3d& hi, double spacing) {
  const Vec3d ext = hi - lo;
  const Vec3d X(ext.x(), 0, 0), Y(0, ext.y(), 0), Z(0, 0, ext.z());
  add_quad(m, {lo.x(), lo.y(), hi.z()}, X, Y, spacing);
  add_quad(m, lo, Z, Y, spacing);
  add_quad(m, {hi.x(), lo.y(), lo.z()}, Y, Z, spacing);
  add_quad(m, lo, X, Z, spacing);
  add_quad(m, {lo.x(), hi.y(), lo.z()}, Z, X, spacing);
}

/// Ramp rising along +x from the floor to `height`, closed by a back wall.
void add_wedge(TriangleMesh& m, const Vec3d& lo, double length, double width, double height, double spacing) {
  const double x1 = lo.x() + length, y1 = lo.y() + width, top = lo.z() + height;
  add_quad(m, lo, {length, 0, height}, {0, width, 0}, spacing);
  add_quad(m, {x1, lo.y(), lo.z()}, {0, width, 0}, {0, 0, height}, spacing);
  add_triangle(m, lo, {x1, lo.y(), lo.z()}, {x1, lo.y(), top}, spacing);
  add_triangle(m, {lo.x(), y1, lo.z()}, {x1, y1, top}, {x1, y1, lo.z()}, spacing);
}

}  // namespace

TriangleMesh bundled_scene(double spacing) {
  if (!(spacing > 0)) throw std::invalid_argument("scene spacing must be positive");
  constexpr double kFloor = 0.05;
  TriangleMesh m;
  add_quad(m, {-2.5, -2.5, kFloor}, {5.0, 0, 0}, {0, 5.0, 0}, spacing);
  add_box(m, {-1.8, 0.4, kFloor}, {-0.4, 1.2, 0.8}, spacing);    // sofa
  add_box(m, {0.6, 0.6, kFloor}, {1.6, 1.6, 0.75}, spacing);     // table
  add_wedge(m, {-0.5, -1.8, kFloor}, 1.5, 1.0, 0.95, spacing);  // wardrobe-height ramp
  return m;
}

}  // namespace covrecon
