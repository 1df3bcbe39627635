#include "covrecon/metrics.hpp"

#include "covrecon/spatial_hash.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace covrecon {

double closest_point_distance(const Vec3d& x, const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw std::invalid_argument("closest_point_distance: empty mesh");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) best = std::min(best, (v - x).squaredNorm());
  return std::sqrt(best);
}

std::size_t count_within_brute_force(std::span<const Vec3d> query, std::span<const Vec3d> reference, double eta) {
  const double eta2 = eta * eta;
  std::size_t count = 0;
  for (const auto& q : query)
    for (const auto& r : reference)
      if ((q - r).squaredNorm() < eta2) {
        ++count;
        break;
      }
  return count;
}

std::size_t count_within(std::span<const Vec3d> query, std::span<const Vec3d> reference, double eta) {
  if (reference.empty()) return 0;
  const SpatialHash index(reference, eta);
  std::size_t count = 0;
  for (const auto& q : query) count += index.any_within(q, eta) ? 1 : 0;
  return count;
}

std::pair<double, double> precision_recall(const TriangleMesh& recon, const TriangleMesh& truth, double eta) {
  if (recon.vertices.empty() || truth.vertices.empty()) throw std::invalid_argument("precision_recall: empty mesh");
  if (!(eta > 0)) throw std::invalid_argument("precision_recall: eta must be positive");
  const double p = static_cast<double>(count_within(recon.vertices, truth.vertices, eta)) /
                   static_cast<double>(recon.vertices.size());
  const double r = static_cast<double>(count_within(truth.vertices, recon.vertices, eta)) /
                   static_cast<double>(truth.vertices.size());
  return {p, r};
}

double f_score(double precision, double recall) {
  if (!(precision >= 0 && precision <= 1) || !(recall >= 0 && recall <= 1))
    throw std::invalid_argument("f_score: inputs must lie in [0, 1]");
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricsReport evaluate_reconstruction(const TriangleMesh& recon, const TriangleMesh& truth, double eta,
                                      double sim_time) {
  if (!(eta > 0)) throw std::invalid_argument("evaluate_reconstruction: eta must be positive");
  if (truth.vertices.empty()) throw std::invalid_argument("evaluate_reconstruction: empty ground truth");
  MetricsReport r;
  r.eta = eta;
  r.recon_vertices = recon.vertices.size();
  r.truth_vertices = truth.vertices.size();
  r.sim_time = sim_time;
  if (recon.vertices.empty()) return r;
  std::tie(r.precision, r.recall) = precision_recall(recon, truth, eta);
  r.f_score = f_score(r.precision, r.recall);
  return r;
}

}  // namespace covrecon
