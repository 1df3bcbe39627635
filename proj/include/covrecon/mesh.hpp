#pragma once

#include "covrecon/geometry.hpp"
#include "covrecon/spatial_hash.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace covrecon {

struct TriangleMesh {
  std::vector<Vec3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  /// Throws MeshFormatError on out-of-range or repeated face indices.
  void validate() const;
  bool operator==(const TriangleMesh&) const = default;
};

/// One reconstruction output of the stream; indices strictly increase.
struct MeshEvent {
  long long index = 0;
  TriangleMesh mesh;
  double sim_time = 0.0;
};

class MeshFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ASCII PLY 1.0. Vertex elements need x, y, z properties (others are
/// ignored); polygon faces are fan-triangulated. Elements other than vertex
/// and face are skipped.
TriangleMesh parse_mesh(std::string_view text);
/// Writes doubles at 17 significant digits so parse_mesh round-trips exactly.
std::string write_mesh(const TriangleMesh& mesh);

TriangleMesh read_mesh_file(const std::filesystem::path& path);
void write_mesh_file(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Area-weighted unit vertex normals; zero for vertices without faces.
std::vector<Vec3d> vertex_normals(const TriangleMesh& mesh);

/// Core points and kernel parameters of the mesh-change quantifiers.
struct FeedbackParams {
  std::vector<Vec3d> core_points;
  double sigma4 = 0.4;
  double kappa = 0.7;
  double normal_radius = 1.2;
  double cylinder_radius = 0.6;

  void validate() const;
};

/// Cell-centred uniform grid of core points over a box (ceil cell-count rule).
std::vector<Vec3d> grid_core_points(const Regiond& region, double spacing);

/// Nearest-core-point lookup, built once per core-point set.
class CoreBinner {
 public:
  explicit CoreBinner(std::span<const Vec3d> core_points);
  std::size_t size() const { return hash_.size(); }
  /// Per-core count of in-region vertices; ties go to the lowest core index.
  std::vector<int> bin(std::span<const Vec3d> vertices, const Regiond& region) const;

 private:
  static double spacing_hint(std::span<const Vec3d> core_points);
  SpatialHash hash_;
};

std::vector<int> bin_vertices(const TriangleMesh& mesh, const FeedbackParams& params, const Regiond& region);

/// counts_now - counts_prev; an empty prev stands for all zeros.
std::vector<int> grid_delta(std::span<const int> counts_now, std::span<const int> counts_prev);

/// exp(-|pos - r_k|^2 / (2 sigma4^2)) for every spatial cell of the field
/// (rows) and core point (columns). Angle cells share their spatial row.
struct KernelWeights {
  Eigen::MatrixXd weights;
  std::size_t angle_cells = 1;

  std::size_t cells() const { return static_cast<std::size_t>(weights.rows()) * angle_cells; }
  std::size_t core_points() const { return static_cast<std::size_t>(weights.cols()); }
};

KernelWeights precompute_kernel_weights(const VirtualFieldd& field, std::span<const Vec3d> core_points,
                                        double sigma4);

/// Spread per-core scores g_k through the kernel: h2_j = sum_k g_k w(j, k).
Eigen::VectorXd spread_core_scores(const Eigen::VectorXd& scores, const KernelWeights& weights);

/// Grid method: scores tanh^2((dV_k / kappa)^2).
Eigen::VectorXd h2_grid(std::span<const int> delta, const KernelWeights& weights, double kappa);

struct M3c2Result {
  std::vector<double> distance;  ///< 0 where invalid
  std::vector<bool> valid;
};

/// Per-core M3C2 distance between consecutive vertex clouds: local normal
/// from cloud_prev within normal_radius, then |mean offset difference| along
/// it over an unbounded cylinder of cylinder_radius. Invalid (0) when the
/// normal is undetermined or either cylinder is empty.
M3c2Result m3c2_distance(std::span<const Vec3d> cloud_prev, std::span<const Vec3d> cloud_now,
                         const FeedbackParams& params);

Eigen::VectorXd h2_m3c2(std::span<const double> distance, const KernelWeights& weights);

}  // namespace covrecon
