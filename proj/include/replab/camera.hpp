#pragma once

// Pinhole depth camera. Depth is the camera-frame z coordinate of the first
// surface along a pixel's ray; 0 marks pixels without a return.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "replab/geometry.hpp"
#include "replab/scene.hpp"

namespace replab {

struct CameraIntrinsics {
  double fx = 450.0;
  double fy = 450.0;
  double cx = 159.5;
  double cy = 119.5;
  int width = 320;
  int height = 240;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw ConfigError("camera", "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("camera", "image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw ConfigError("camera", "principal point outside the image");
  }
  bool in_bounds(double u, double v) const {
    return u >= -0.5 && u < width - 0.5 && v >= -0.5 && v < height - 0.5;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Camera pose (camera frame -> robot frame) used when no config says
/// otherwise: mounted at the front of the cell, looking down at the floor
/// center, image x along robot -y.
inline RigidTransform default_camera_pose() {
  return look_at({-22.0, 0.0, 72.0}, {0.0, 0.0, 0.0}, {0.0, -1.0, 0.0});
}

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> depth;  // row-major, cm; 0 = no return

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), depth(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f) {}

  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  float& at(int u, int v) { return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0f; }
  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

struct CloudPoint {
  Vec3 position;  // camera frame
  std::optional<Rgb> color;
  std::uint32_t pixel = 0;  // v * width + u of the source pixel
  friend bool operator==(const CloudPoint&, const CloudPoint&) = default;
};

struct PointCloud {
  std::vector<CloudPoint> points;
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline constexpr int kFloorLabel = -1;
inline constexpr int kNoReturnLabel = -2;

struct RenderResult {
  DepthImage depth;
  PointCloud cloud;
  std::vector<int> labels;  // object id per pixel, kFloorLabel, or kNoReturnLabel
};

struct RenderOptions {
  double depth_noise = 0.15;  // per-pixel Gaussian sigma [cm]
  double min_depth = 10.0;
  double max_depth = 200.0;
  Rgb floor_color{90, 90, 90};
};

/// Camera-frame point for a pixel and its depth.
inline Vec3 deproject(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw InvalidArgument("camera", "deproject: depth must be positive (got sentinel)");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Pixel coordinates of a camera-frame point in front of the camera.
inline std::optional<PixelCoord> project(Vec3 p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0)) return std::nullopt;
  return PixelCoord{k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

namespace detail {

struct PixelRect {
  int u0 = 0, v0 = 0, u1 = -1, v1 = -1;
  bool contains(int u, int v) const { return u >= u0 && u <= u1 && v >= v0 && v <= v1; }
};

/// Screen-space bound of a primitive's world AABB.
inline PixelRect screen_bounds(const PlacedPrimitive& p, double floor_z, const RigidTransform& world_to_cam,
                               const CameraIntrinsics& k) {
  const double r = p.footprint_radius();
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner{p.center().x + ((i & 1) ? r : -r), p.center().y + ((i & 2) ? r : -r),
                      floor_z + ((i & 4) ? p.top() : 0.0)};
    const auto px = project(world_to_cam.apply(corner), k);
    if (!px) return {0, 0, k.width - 1, k.height - 1};
    umin = std::min(umin, px->u);
    umax = std::max(umax, px->u);
    vmin = std::min(vmin, px->v);
    vmax = std::max(vmax, px->v);
  }
  return {std::max(0, static_cast<int>(std::floor(umin)) - 1), std::max(0, static_cast<int>(std::floor(vmin)) - 1),
          std::min(k.width - 1, static_cast<int>(std::ceil(umax)) + 1),
          std::min(k.height - 1, static_cast<int>(std::ceil(vmax)) + 1)};
}

}  // namespace detail

/// Nearest-surface queries for one (scene, camera pose) pair.
class RayCaster {
public:
  struct Hit {
    double depth = 0.0;  // camera-frame z; 0 when nothing is hit
    int label = kNoReturnLabel;
    Rgb color{};
  };

  RayCaster(const Scene& scene, const RigidTransform& pose, const CameraIntrinsics& k, Rgb floor_color = {90, 90, 90})
      : pose_(pose), k_(k), floor_color_(floor_color) {
    const RigidTransform world_to_cam = pose.inverse();
    for (const auto& obj : scene.objects)
      for (const auto& p : obj.placed())
        targets_.push_back({p, detail::screen_bounds(p, scene.floor_z, world_to_cam, k), obj.id, obj.shape.color});
    origin_ = {pose.translation.x, pose.translation.y, pose.translation.z - scene.floor_z};
  }

  Hit cast(int u, int v) const {
    const Vec3 ray{(u - k_.cx) / k_.fx, (v - k_.cy) / k_.fy, 1.0};
    const Vec3 dir = pose_.apply_direction(ray);
    Hit h;
    double best = std::numeric_limits<double>::infinity();
    if (dir.z < 0.0) {
      best = -origin_.z / dir.z;
      h.label = kFloorLabel;
      h.color = floor_color_;
    }
    for (const auto& t : targets_) {
      if (!t.rect.contains(u, v)) continue;
      if (auto hit = t.prim.ray_hit(origin_, dir); hit && *hit < best) {
        best = *hit;
        h.label = t.id;
        h.color = t.color;
      }
    }
    // The ray direction has unit camera z, so the ray parameter is the depth.
    if (h.label != kNoReturnLabel) h.depth = best;
    return h;
  }

private:
  struct Target {
    PlacedPrimitive prim;
    detail::PixelRect rect;
    int id;
    Rgb color;
  };
  RigidTransform pose_;
  CameraIntrinsics k_;
  Rgb floor_color_;
  Vec3 origin_;
  std::vector<Target> targets_;
};

/// Ray-casts the scene (analytic primitives and the floor plane) from a
/// camera at `pose` (camera -> robot). Pure function of its arguments.
inline RenderResult render(const Scene& scene, const RigidTransform& pose, const CameraIntrinsics& k, Seed seed,
                           const RenderOptions& opts = {}) {
  k.validate();
  const RayCaster caster(scene, pose, k, opts.floor_color);
  RenderResult out;
  out.depth = DepthImage(k.width, k.height);
  out.labels.assign(k.pixel_count(), kNoReturnLabel);
  Rng noise(seed.stream("camera/depth-noise"));
  std::size_t floor_pixels = 0;

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const RayCaster::Hit hit = caster.cast(u, v);
      if (hit.label == kFloorLabel) ++floor_pixels;
      if (hit.label == kNoReturnLabel) continue;
      const std::size_t idx = static_cast<std::size_t>(v) * static_cast<std::size_t>(k.width) + static_cast<std::size_t>(u);
      const double d = hit.depth + noise.normal(opts.depth_noise);
      if (!(d > opts.min_depth && d < opts.max_depth)) continue;
      out.depth.depth[idx] = static_cast<float>(d);
      out.labels[idx] = hit.label;
      out.cloud.points.push_back({deproject(u, v, out.depth.depth[idx], k), hit.color, static_cast<std::uint32_t>(idx)});
    }
  }
  if (floor_pixels == 0) throw ConfigError("camera", "camera pose sees no floor pixels");
  return out;
}

/// Depth image rebuilt from a point cloud via each point's source pixel.
inline DepthImage depth_from_cloud(const PointCloud& cloud, const CameraIntrinsics& k) {
  DepthImage out(k.width, k.height);
  for (const auto& p : cloud.points) {
    if (p.pixel >= out.depth.size()) throw InvalidArgument("camera", "cloud point pixel index outside the image");
    out.depth[p.pixel] = static_cast<float>(p.position.z);
  }
  return out;
}

/// Depth of the floor plane for every pixel given a camera -> robot map
/// x_robot = A x_cam + t (an affine calibration or a rigid pose).
inline DepthImage floor_depth(const Mat3& a, Vec3 t, double floor_z, const CameraIntrinsics& k) {
  DepthImage out(k.width, k.height);
  const Vec3 row_z = a.row(2);
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      const double dz = row_z.dot(ray);
      if (dz >= 0.0) continue;
      out.at(u, v) = static_cast<float>((floor_z - t.z) / dz);
    }
  return out;
}

}  // namespace replab
