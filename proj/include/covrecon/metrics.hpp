#pragma once

#include "covrecon/geometry.hpp"
#include "covrecon/mesh.hpp"

#include <cstddef>
#include <span>
#include <utility>

namespace covrecon {

inline constexpr double kDefaultEta = 0.05;

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  double eta = kDefaultEta;
  std::size_t recon_vertices = 0;
  std::size_t truth_vertices = 0;
  double sim_time = 0.0;
};

/// Distance from x to the nearest vertex of the mesh.
double closest_point_distance(const Vec3d& x, const TriangleMesh& mesh);

/// Number of `query` points with some `reference` point strictly closer than
/// eta. Brute-force reference for the hashed version.
std::size_t count_within_brute_force(std::span<const Vec3d> query, std::span<const Vec3d> reference, double eta);
std::size_t count_within(std::span<const Vec3d> query, std::span<const Vec3d> reference, double eta);

std::pair<double, double> precision_recall(const TriangleMesh& recon, const TriangleMesh& truth, double eta);

double f_score(double precision, double recall);

/// Full report. An empty reconstruction scores zero instead of raising, so a
/// mission can be scored before anything has been revealed.
MetricsReport evaluate_reconstruction(const TriangleMesh& recon, const TriangleMesh& truth, double eta,
                                      double sim_time = 0.0);

}  // namespace covrecon
