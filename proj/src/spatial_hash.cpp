#include "covrecon/spatial_hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace covrecon {

namespace {
constexpr std::int64_t kOffset = std::int64_t(1) << 20;
}

SpatialHash::SpatialHash(std::span<const Vec3d> points, double cell_size)
    : points_(points.begin(), points.end()), cell_(cell_size) {
  if (!(cell_size > 0)) throw std::invalid_argument("spatial hash: cell size must be positive");
  std::vector<std::pair<Key, std::uint32_t>> keyed;
  keyed.reserve(points_.size());
  lo_ = {std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
         std::numeric_limits<std::int64_t>::max()};
  hi_ = {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(),
         std::numeric_limits<std::int64_t>::min()};
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto c = cell_of(points_[i]);
    for (int a = 0; a < 3; ++a) {
      lo_[a] = std::min(lo_[a], c[a]);
      hi_[a] = std::max(hi_[a], c[a]);
    }
    keyed.emplace_back(pack(c[0], c[1], c[2]), static_cast<std::uint32_t>(i));
  }
  std::sort(keyed.begin(), keyed.end());
  order_.reserve(keyed.size());
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t k = i;
    while (k < keyed.size() && keyed[k].first == keyed[i].first) order_.push_back(keyed[k++].second);
    buckets_.emplace(keyed[i].first, std::make_pair(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k)));
    i = k;
  }
}

std::array<std::int64_t, 3> SpatialHash::cell_of(const Vec3d& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

SpatialHash::Key SpatialHash::pack(std::int64_t x, std::int64_t y, std::int64_t z) {
  return ((x + kOffset) << 42) | ((y + kOffset) << 21) | (z + kOffset);
}

std::span<const std::uint32_t> SpatialHash::bucket(std::int64_t x, std::int64_t y, std::int64_t z) const {
  if (x < lo_[0] || x > hi_[0] || y < lo_[1] || y > hi_[1] || z < lo_[2] || z > hi_[2]) return {};
  const auto it = buckets_.find(pack(x, y, z));
  if (it == buckets_.end()) return {};
  return std::span<const std::uint32_t>(order_.data() + it->second.first, it->second.second - it->second.first);
}

std::pair<std::size_t, double> SpatialHash::nearest(const Vec3d& q) const {
  if (points_.empty()) throw std::invalid_argument("spatial hash: nearest query on empty set");
  const auto c = cell_of(q);
  std::int64_t max_ring = 0;
  for (int a = 0; a < 3; ++a) max_ring = std::max({max_ring, std::abs(c[a] - lo_[a]), std::abs(c[a] - hi_[a])});
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    for (const std::uint32_t i : bucket(x, y, z)) {
      const double d2 = (points_[i] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
        best_d2 = d2;
        best = i;
      }
    }
  };
  for (std::int64_t r = 0; r <= max_ring; ++r) {
    // Points in ring r or beyond are at least (r - 1) cells away from q.
    const double bound = static_cast<double>(r - 1) * cell_;
    if (r > 0 && best_d2 < bound * bound) break;
    // Only the part of the ring overlapping the occupied cell box can hold points.
    const auto lo = [&](int a) { return std::max(c[a] - r, lo_[a]); };
    const auto hi = [&](int a) { return std::min(c[a] + r, hi_[a]); };
    for (std::int64_t x = lo(0); x <= hi(0); ++x)
      for (std::int64_t y = lo(1); y <= hi(1); ++y) {
        const bool edge = std::abs(x - c[0]) == r || std::abs(y - c[1]) == r;
        if (edge) {
          for (std::int64_t z = lo(2); z <= hi(2); ++z) visit(x, y, z);
        } else {
          visit(x, y, c[2] - r);
          if (r > 0) visit(x, y, c[2] + r);
        }
      }
  }
  return {best, best_d2};
}

bool SpatialHash::any_within(const Vec3d& q, double radius) const {
  const double r2 = radius * radius;
  const auto lo = cell_of(q - Vec3d::Constant(radius));
  const auto hi = cell_of(q + Vec3d::Constant(radius));
  for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
        for (const std::uint32_t i : bucket(x, y, z))
          if ((points_[i] - q).squaredNorm() < r2) return true;
  return false;
}

void SpatialHash::radius_query(const Vec3d& q, double radius, std::vector<std::size_t>& out) const {
  out.clear();
  const double r2 = radius * radius;
  const auto lo = cell_of(q - Vec3d::Constant(radius));
  const auto hi = cell_of(q + Vec3d::Constant(radius));
  for (std::int64_t x = std::max(lo[0], lo_[0]); x <= std::min(hi[0], hi_[0]); ++x)
    for (std::int64_t y = std::max(lo[1], lo_[1]); y <= std::min(hi[1], hi_[1]); ++y)
      for (std::int64_t z = std::max(lo[2], lo_[2]); z <= std::min(hi[2], hi_[2]); ++z)
        for (const std::uint32_t i : bucket(x, y, z))
          if ((points_[i] - q).squaredNorm() <= r2) out.push_back(i);
  std::sort(out.begin(), out.end());
}

}  // namespace covrecon
