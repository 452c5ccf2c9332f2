#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "replab/perception.hpp"

using namespace replab;

namespace {

using Partition = std::set<std::set<std::size_t>>;

/// Textbook O(n^2) DBSCAN with the same border rule: a border point joins the
/// cluster of its nearest core point (ties to the lexicographically smaller).
Partition brute_dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int k = 0;
    for (std::size_t j = 0; j < n; ++j) k += (pts[i] - pts[j]).norm() <= eps;
    core[i] = k >= min_pts;
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && (pts[i] - pts[j]).norm() <= eps) parent[find(i)] = find(j);
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      groups[find(i)].insert(i);
      continue;
    }
    std::size_t owner = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!core[j] || (pts[i] - pts[j]).norm() > eps) continue;
      if (owner == n) {
        owner = j;
        continue;
      }
      const double dj = (pts[i] - pts[j]).norm(), db = (pts[i] - pts[owner]).norm();
      if (dj < db || (dj == db && detail::lex_less(pts[j], pts[owner]))) owner = j;
    }
    if (owner < n) groups[find(owner)].insert(i);
  }
  Partition out;
  for (auto& [_, g] : groups) out.insert(g);
  return out;
}

Partition partition_of(const std::vector<Cluster>& clusters) {
  Partition out;
  for (const auto& c : clusters) out.insert(std::set<std::size_t>(c.indices.begin(), c.indices.end()));
  return out;
}

std::vector<Vec3> random_blobs(Rng& rng, int blobs, int per_blob, double spread, double noise_points) {
  std::vector<Vec3> pts;
  for (int b = 0; b < blobs; ++b) {
    const Vec3 c{rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(1, 4)};
    for (int i = 0; i < per_blob; ++i)
      pts.push_back(c + Vec3{rng.normal(spread), rng.normal(spread), rng.normal(0.5 * spread)});
  }
  for (int i = 0; i < noise_points; ++i) pts.push_back({rng.uniform(-17, 17), rng.uniform(-20, 20), rng.uniform(0.5, 6)});
  // A few points on a coarse lattice so that distance ties occur.
  for (int i = 0; i < 20; ++i) pts.push_back({std::round(rng.uniform(-5, 5)), std::round(rng.uniform(-5, 5)), 1.0});
  return pts;
}

ObjectShape box(double lx, double ly, double h) {
  ObjectShape s;
  s.kind = ShapeKind::box;
  s.parts.push_back({PrimitiveKind::box, {0.5 * lx, 0.5 * ly, 0.5 * h}, {}, 0.0});
  return s;
}

RenderOptions noiseless() {
  RenderOptions o;
  o.depth_noise = 0.0;
  return o;
}

std::vector<Vec3> object_points(const Scene& s, const RigidTransform& pose) {
  const auto r = render(s, pose, {}, Seed{1}, noiseless());
  return subtract_background(r.cloud, CalibrationModel::from_pose(pose), 0.0);
}

}  // namespace

TEST(Dbscan, MatchesBruteForceOnRandomSets) {
  Rng rng(Seed{31});
  for (int t = 0; t < 100; ++t) {
    const auto pts = random_blobs(rng, 1 + static_cast<int>(rng.index(6)), 20 + static_cast<int>(rng.index(80)),
                                  rng.uniform(0.3, 1.5), static_cast<double>(rng.index(60)));
    const double eps = rng.uniform(0.5, 2.0);
    const int min_pts = 2 + static_cast<int>(rng.index(10));
    EXPECT_EQ(partition_of(dbscan(pts, eps, min_pts)), brute_dbscan(pts, eps, min_pts)) << "set " << t;
  }
}

TEST(Dbscan, MatchesBruteForceOnRenderedScenes) {
  const auto shapes = generate_object_set(ObjectProfile::seen, 20, Seed{2019});
  const RigidTransform pose = default_camera_pose();
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto pts = object_points(scatter_with_retry(shapes, Seed{s}), pose);
    // Subsample to keep the brute force affordable.
    std::vector<Vec3> sub;
    for (std::size_t i = 0; i < pts.size(); i += 3) sub.push_back(pts[i]);
    EXPECT_EQ(partition_of(dbscan(sub, 1.5, 5)), brute_dbscan(sub, 1.5, 5));
  }
}

TEST(Dbscan, TwoSeparatedBlobs) {
  Rng rng(Seed{2});
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({rng.normal(0.5), rng.normal(0.5), 2});
  for (int i = 0; i < 100; ++i) pts.push_back({10 + rng.normal(0.5), rng.normal(0.5), 2});
  const auto c = dbscan(pts, 1.0, 5);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].indices.front(), 0u);
  EXPECT_EQ(c[1].indices.front(), 100u);
}

TEST(Dbscan, EmptyAndInvalid) {
  EXPECT_TRUE(dbscan(std::vector<Vec3>{}, 1.0, 3).empty());
  const std::vector<Vec3> one{{0, 0, 0}};
  EXPECT_THROW(dbscan(one, 0.0, 3), InvalidArgument);
  EXPECT_THROW(dbscan(one, 1.0, 0), InvalidArgument);
  EXPECT_TRUE(dbscan(one, 1.0, 2).empty());
  EXPECT_EQ(dbscan(one, 1.0, 1).size(), 1u);
}

TEST(Dbscan, OrderInvariant) {
  Rng rng(Seed{8});
  for (int t = 0; t < 20; ++t) {
    const auto pts = random_blobs(rng, 4, 50, 0.8, 30);
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<Vec3> shuffled;
    for (std::size_t i : perm) shuffled.push_back(pts[i]);
    // Compare as sets of original indices.
    Partition a = partition_of(dbscan(pts, 1.2, 4)), b;
    for (const auto& c : dbscan(shuffled, 1.2, 4)) {
      std::set<std::size_t> g;
      for (std::size_t i : c.indices) g.insert(perm[i]);
      b.insert(g);
    }
    EXPECT_EQ(a, b);
  }
}

TEST(Dbscan, ClustersPartitionTheNonNoisePoints) {
  Rng rng(Seed{9});
  const auto pts = random_blobs(rng, 5, 60, 0.7, 50);
  const double eps = 1.0;
  const auto clusters = dbscan(pts, eps, 5);
  std::vector<int> owner(pts.size(), -1);
  for (const auto& c : clusters) {
    EXPECT_TRUE(std::is_sorted(c.indices.begin(), c.indices.end()));
    ASSERT_EQ(c.points.size(), c.indices.size());
    for (std::size_t k = 0; k < c.indices.size(); ++k) {
      EXPECT_EQ(owner[c.indices[k]], -1);
      owner[c.indices[k]] = c.id;
      EXPECT_EQ(c.points[k], pts[c.indices[k]]);
    }
  }
  // Noise points have no core point within eps.
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (owner[i] != -1) continue;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if ((pts[i] - pts[j]).norm() > eps) continue;
      int k = 0;
      for (const auto& q : pts) k += (pts[j] - q).norm() <= eps;
      EXPECT_LT(k, 5);
    }
  }
}

TEST(Dbscan, TouchingObjectsMergeSeparatedStayApart) {
  const RigidTransform pose = default_camera_pose();
  Scene touching;
  touching.objects.push_back({box(4, 2, 3), 0, 0, 0, 0});
  touching.objects.push_back({box(4, 2, 3), 0, 2.0, 0, 1});
  EXPECT_EQ(dbscan(object_points(touching, pose), 1.5, 10).size(), 1u);
  Scene apart = touching;
  apart.objects[1].y = 8.0;
  EXPECT_EQ(dbscan(object_points(apart, pose), 1.5, 10).size(), 2u);
}

TEST(ClusterStats, LineCircleAndEllipse) {
  Cluster line;
  for (int i = -50; i <= 50; ++i) line.points.push_back({0.1 * i, 0.1 * i, 1});
  const ClusterStats ls = cluster_stats(line);
  EXPECT_NEAR(std::abs(ls.major_axis.dot(Vec2{std::sqrt(0.5), std::sqrt(0.5)})), 1.0, 1e-9);
  EXPECT_GT(ls.confidence, 1e6);
  EXPECT_NEAR(ls.center.x, 0.0, 1e-12);

  Cluster circle;
  for (int i = 0; i < 360; ++i) circle.points.push_back({3 + std::cos(i * kPi / 180), std::sin(i * kPi / 180), 2});
  const ClusterStats cs = cluster_stats(circle);
  EXPECT_NEAR(cs.confidence, 1.0, 1e-6);
  EXPECT_NEAR(cs.center.x, 3.0, 1e-9);

  // Uniformly filled 4 x 1 ellipse at 30 degrees: eigenvalue ratio 16.
  Cluster ellipse;
  const double a = 0.5236;
  for (double u = -4; u <= 4; u += 0.05)
    for (double v = -1; v <= 1; v += 0.05)
      if (u * u / 16 + v * v <= 1)
        ellipse.points.push_back({u * std::cos(a) - v * std::sin(a), u * std::sin(a) + v * std::cos(a), 1});
  const ClusterStats es = cluster_stats(ellipse);
  EXPECT_NEAR(es.confidence, 16.0, 0.2 * 16.0);
  EXPECT_NEAR(std::abs(es.major_axis.dot({std::cos(a), std::sin(a)})), 1.0, 1e-4);

  Cluster single;
  single.points.push_back({1, 2, 3});
  EXPECT_DOUBLE_EQ(cluster_stats(single).confidence, 1.0);
  EXPECT_THROW(cluster_stats(Cluster{}), InvalidArgument);
}

TEST(ClusterStats, CentroidInsideConvexObject) {
  const auto shapes = generate_object_set(ObjectProfile::seen, 20, Seed{2019});
  const RigidTransform pose = default_camera_pose();
  Rng rng(Seed{4});
  for (int t = 0; t < 20; ++t) {
    Scene s;
    s.objects.push_back({shapes[rng.index(shapes.size())], rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(0, kPi), 0});
    const auto clusters = dbscan(object_points(s, pose), 1.5, 10);
    ASSERT_EQ(clusters.size(), 1u);
    const Vec3 c = cluster_stats(clusters[0]).center;
    const auto part = s.objects[0].placed().front();
    EXPECT_TRUE(part.contains({c.x, c.y, part.center_height()}));
  }
}

TEST(Background, MatchesTheRenderMask) {
  const auto shapes = generate_object_set(ObjectProfile::unseen, 20, Seed{2019});
  const RigidTransform pose = default_camera_pose();
  const CalibrationModel calib = CalibrationModel::from_pose(pose);
  const CameraIntrinsics k;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Scene scene = scatter_with_retry(shapes, Seed{seed});
    const auto r = render(scene, pose, k, Seed{1}, noiseless());
    std::size_t expected = 0;
    for (const auto& p : r.cloud.points) {
      const Vec3 w = pose.apply(p.position);
      const bool object = r.labels[p.pixel] >= 0;
      if (!object) {
        EXPECT_LT(w.z, 1e-3);
      }
      expected += object && w.z >= 0.5 && scene.workspace.contains(w.xy());
    }
    const auto kept = subtract_background(r.cloud, calib, 0.0);
    EXPECT_EQ(kept.size(), expected);
    for (const auto& p : kept) {
      EXPECT_GE(p.z, 0.5);
      EXPECT_TRUE(scene.workspace.contains(p.xy()));
    }
  }
}

TEST(Perceive, ClusterCountNearObjectCount) {
  const auto shapes = generate_object_set(ObjectProfile::seen, 20, Seed{2019});
  const RigidTransform pose = default_camera_pose();
  const auto r = render(scatter_with_retry(shapes, Seed{0}), pose, {}, Seed{1});
  const Perception p = perceive(r.cloud, CalibrationModel::from_pose(pose), 0.0, {});
  EXPECT_EQ(p.stats.size(), p.clusters.size());
  // Scattered objects clump, so touching groups come out as one cluster.
  EXPECT_GE(p.clusters.size(), 1u);
  EXPECT_LE(p.clusters.size(), 20u);
  EXPECT_FALSE(clustering_failed(p.clusters.size(), 20));
}

TEST(Perceive, ClusteringFailureRule) {
  EXPECT_TRUE(clustering_failed(0, 5));
  EXPECT_FALSE(clustering_failed(7, 5));
  EXPECT_TRUE(clustering_failed(8, 5));
  EXPECT_FALSE(clustering_failed(1, 1));
}
