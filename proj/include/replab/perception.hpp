#pragma once

// Background removal, DBSCAN clustering and per-cluster statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "replab/calibration.hpp"
#include "replab/camera.hpp"
#include "replab/geometry.hpp"
#include "replab/scene.hpp"

namespace replab {

struct PerceptionConfig {
  double eps = 1.5;          // neighborhood radius [cm]
  int min_pts = 10;          // neighbors (self included) that make a core point
  double floor_margin = 0.5; // points this close to the floor are background [cm]
  friend bool operator==(const PerceptionConfig&, const PerceptionConfig&) = default;
};

struct Cluster {
  int id = 0;
  std::vector<Vec3> points;            // robot frame
  std::vector<std::size_t> indices;    // positions in the clustered point list, ascending
};

struct ClusterStats {
  Vec3 center;
  Sym2 corr2;         // centered second moments of (x, y)
  Eig2 eig;
  Vec2 major_axis;
  double confidence = 1.0;  // lambda1 / max(lambda2, 1e-9)
};

/// Robot-frame object points: the cloud mapped through C, without points near
/// the floor or outside the workspace.
inline std::vector<Vec3> subtract_background(const PointCloud& cloud, const CalibrationModel& calib, double floor_z,
                                             const Workspace& ws = {}, double floor_margin = 0.5) {
  std::vector<Vec3> out;
  for (const auto& p : cloud.points) {
    const Vec3 r = calib.apply(p.position);
    if (r.z < floor_z + floor_margin) continue;
    if (!ws.contains(r.xy())) continue;
    out.push_back(r);
  }
  return out;
}

namespace detail {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.x));
    h = splitmix64(h ^ static_cast<std::uint64_t>(k.y));
    return static_cast<std::size_t>(splitmix64(h ^ static_cast<std::uint64_t>(k.z)));
  }
};

/// Uniform grid with cell size eps; neighbors are found in the 27 cells around.
class NeighborGrid {
public:
  NeighborGrid(std::span<const Vec3> pts, double eps) : pts_(pts), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(pts[i])].push_back(i);
  }

  void neighbors(std::size_t i, std::vector<std::size_t>& out) const {
    out.clear();
    const CellKey c = key(pts_[i]);
    const double e2 = eps_ * eps_;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second)
            if ((pts_[j] - pts_[i]).dot(pts_[j] - pts_[i]) <= e2) out.push_back(j);
        }
  }

private:
  CellKey key(Vec3 p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / eps_)), static_cast<std::int64_t>(std::floor(p.y / eps_)),
            static_cast<std::int64_t>(std::floor(p.z / eps_))};
  }
  std::span<const Vec3> pts_;
  double eps_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

inline bool lex_less(Vec3 a, Vec3 b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

}  // namespace detail

/// DBSCAN. Core points have at least min_pts points (itself included) within
/// eps; clusters are the connected components of core points plus their
/// border points. A border point reachable from several clusters joins the
/// one owning its nearest core point, which keeps the result independent of
/// input order. Clusters are ordered by their smallest point index.
inline std::vector<Cluster> dbscan(std::span<const Vec3> points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw InvalidArgument("perception", "dbscan: eps must be positive");
  if (min_pts < 1) throw InvalidArgument("perception", "dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();
  const detail::NeighborGrid grid(points, eps);
  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    grid.neighbors(i, nbrs[i]);
    core[i] = nbrs[i].size() >= static_cast<std::size_t>(min_pts);
  }

  constexpr int kUnassigned = -1;
  std::vector<int> label(n, kUnassigned);
  int components = 0;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] != kUnassigned) continue;
    const int c = components++;
    label[i] = c;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q : nbrs[p])
        if (core[q] && label[q] == kUnassigned) {
          label[q] = c;
          stack.push_back(q);
        }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    std::size_t owner = n;
    for (std::size_t q : nbrs[i]) {
      if (!core[q]) continue;
      const double d = (points[q] - points[i]).norm();
      if (d < best || (d == best && owner < n && detail::lex_less(points[q], points[owner]))) {
        best = d;
        owner = q;
      }
    }
    if (owner < n) label[i] = label[owner];
  }

  std::vector<Cluster> raw(static_cast<std::size_t>(components));
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == kUnassigned) continue;
    auto& c = raw[static_cast<std::size_t>(label[i])];
    c.indices.push_back(i);
    c.points.push_back(points[i]);
  }
  std::sort(raw.begin(), raw.end(),
            [](const Cluster& a, const Cluster& b) { return a.indices.front() < b.indices.front(); });
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i].id = static_cast<int>(i);
  return raw;
}

inline ClusterStats cluster_stats(const Cluster& c) {
  if (c.points.empty()) throw InvalidArgument("perception", "cluster_stats: empty cluster");
  ClusterStats s;
  Vec3 sum{};
  for (const auto& p : c.points) sum = sum + p;
  s.center = sum / static_cast<double>(c.points.size());
  for (const auto& p : c.points) {
    const double dx = p.x - s.center.x, dy = p.y - s.center.y;
    s.corr2.xx += dx * dx;
    s.corr2.xy += dx * dy;
    s.corr2.yy += dy * dy;
  }
  s.eig = eig2_sym(s.corr2);
  s.major_axis = s.eig.vectors[0];
  s.confidence = s.eig.values[0] / std::max(s.eig.values[1], 1e-9);
  if (s.eig.values[0] <= 0.0) s.confidence = 1.0;
  return s;
}

/// Cluster count is unusable: nothing found, or far more clusters than
/// objects left.
inline bool clustering_failed(std::size_t cluster_count, std::size_t remaining_objects) {
  return cluster_count == 0 || static_cast<double>(cluster_count) > 1.5 * static_cast<double>(remaining_objects);
}

/// Cloud -> clusters with statistics, as every planner consumes them.
struct Perception {
  std::vector<Cluster> clusters;
  std::vector<ClusterStats> stats;
  std::size_t object_points = 0;
};

inline Perception perceive(const PointCloud& cloud, const CalibrationModel& calib, double floor_z,
                           const Workspace& ws, const PerceptionConfig& cfg = {}) {
  const std::vector<Vec3> pts = subtract_background(cloud, calib, floor_z, ws, cfg.floor_margin);
  Perception out;
  out.object_points = pts.size();
  out.clusters = dbscan(pts, cfg.eps, cfg.min_pts);
  for (const auto& c : out.clusters) out.stats.push_back(cluster_stats(c));
  return out;
}

}  // namespace replab
