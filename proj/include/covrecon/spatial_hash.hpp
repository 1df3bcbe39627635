#pragma once

#include "covrecon/geometry.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace covrecon {

/// Uniform-grid bucket index over a fixed point set for nearest-point and
/// radius queries. Results are identical to exhaustive search, including the
/// lowest-index tie rule.
class SpatialHash {
 public:
  SpatialHash(std::span<const Vec3d> points, double cell_size);

  std::size_t size() const { return points_.size(); }

  /// (index, squared distance) of the nearest point. Throws when empty.
  std::pair<std::size_t, double> nearest(const Vec3d& q) const;

  /// True when some point has squared distance < radius^2.
  bool any_within(const Vec3d& q, double radius) const;

  /// Indices with squared distance <= radius^2, ascending.
  void radius_query(const Vec3d& q, double radius, std::vector<std::size_t>& out) const;

 private:
  using Key = std::int64_t;
  std::array<std::int64_t, 3> cell_of(const Vec3d& p) const;
  static Key pack(std::int64_t x, std::int64_t y, std::int64_t z);
  std::span<const std::uint32_t> bucket(std::int64_t x, std::int64_t y, std::int64_t z) const;

  std::vector<Vec3d> points_;
  double cell_;
  std::vector<std::uint32_t> order_;
  std::unordered_map<Key, std::pair<std::uint32_t, std::uint32_t>> buckets_;
  std::array<std::int64_t, 3> lo_{}, hi_{};
};

}  // namespace covrecon
