#pragma once

// Objects, the bin-dump scattering protocol, the quasi-static grasp outcome
// model and the sweep action. Every primitive rests on the floor (z = 0 in
// the object's frame); composites are unions of such primitives.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "replab/geometry.hpp"
#include "replab/grasp.hpp"

namespace replab {

enum class PrimitiveKind : std::uint8_t { ellipsoid, box, capsule };
enum class ShapeKind : std::uint8_t { ellipsoid, box, capsule, composite };
enum class ObjectProfile : std::uint8_t { seen, unseen };

inline std::string_view to_string(ObjectProfile p) { return p == ObjectProfile::seen ? "seen" : "unseen"; }
inline ObjectProfile profile_from_string(std::string_view s) {
  if (s == "seen") return ObjectProfile::seen;
  if (s == "unseen") return ObjectProfile::unseen;
  throw InvalidArgument("scene", "unknown object profile '" + std::string(s) + "'");
}

struct Rgb {
  std::uint8_t r = 128, g = 128, b = 128;
  friend bool operator==(Rgb, Rgb) = default;
};

/// Closed parameter interval on a line.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool overlaps(const Interval& o) const { return hi >= o.lo && o.hi >= lo; }
};

/// One convex solid resting on the floor.
///  - ellipsoid: `half` are the semi-axes (a, b, c)
///  - box: `half` are the half extents
///  - capsule: lying along local x; `half` = (half cylinder length, radius, radius)
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::box;
  Vec3 half{1, 1, 1};
  Vec2 offset{};     // in the object frame
  double yaw = 0.0;  // relative to the object frame

  double height() const { return 2.0 * half.z; }
  double center_height() const { return half.z; }
  friend bool operator==(const Primitive&, const Primitive&) = default;
};

/// A primitive placed in the robot frame. Heights are above the floor.
class PlacedPrimitive {
public:
  PlacedPrimitive(const Primitive& p, Vec2 center, double yaw)
      : kind_(p.kind), half_(p.half), center_(center), c_(std::cos(yaw)), s_(std::sin(yaw)) {}

  PrimitiveKind kind() const { return kind_; }
  Vec3 half() const { return half_; }
  Vec2 center() const { return center_; }
  double top() const { return 2.0 * half_.z; }
  double center_height() const { return half_.z; }

  Vec2 to_local(Vec2 p) const {
    const Vec2 d = p - center_;
    return {c_ * d.x + s_ * d.y, -s_ * d.x + c_ * d.y};
  }
  Vec2 dir_to_local(Vec2 d) const { return {c_ * d.x + s_ * d.y, -s_ * d.x + c_ * d.y}; }

  /// Radius of a circle about center() enclosing the footprint.
  double footprint_radius() const {
    switch (kind_) {
      case PrimitiveKind::ellipsoid: return std::max(half_.x, half_.y);
      case PrimitiveKind::box: return std::hypot(half_.x, half_.y);
      case PrimitiveKind::capsule: return half_.x + half_.y;
    }
    return 0.0;
  }

  /// Support function of the footprint (the largest horizontal slice).
  double support(Vec2 n) const {
    const Vec2 l = dir_to_local(n);
    double h = 0.0;
    switch (kind_) {
      case PrimitiveKind::ellipsoid: h = std::hypot(half_.x * l.x, half_.y * l.y); break;
      case PrimitiveKind::box: h = half_.x * std::abs(l.x) + half_.y * std::abs(l.y); break;
      case PrimitiveKind::capsule: h = half_.x * std::abs(l.x) + half_.y; break;
    }
    return h + center_.dot(n);
  }

  /// Point membership for the solid (z measured from the floor).
  bool contains(Vec3 p) const {
    const Vec2 l = to_local(p.xy());
    switch (kind_) {
      case PrimitiveKind::ellipsoid: {
        const double u = l.x / half_.x, v = l.y / half_.y, w = (p.z - half_.z) / half_.z;
        return u * u + v * v + w * w <= 1.0;
      }
      case PrimitiveKind::box:
        return std::abs(l.x) <= half_.x && std::abs(l.y) <= half_.y && p.z >= 0.0 && p.z <= 2.0 * half_.z;
      case PrimitiveKind::capsule: {
        const double r = half_.y;
        const double cx = std::clamp(l.x, -half_.x, half_.x);
        const double dx = l.x - cx, dz = p.z - r;
        return dx * dx + l.y * l.y + dz * dz <= r * r;
      }
    }
    return false;
  }

  /// Intersection of the horizontal slice at height `h` with the line
  /// origin + t * dir (dir a unit 2-vector).
  std::optional<Interval> line_section(double h, Vec2 origin, Vec2 dir) const {
    const Vec2 q = to_local(origin);
    const Vec2 u = dir_to_local(dir);
    switch (kind_) {
      case PrimitiveKind::ellipsoid: {
        const double dz = h - half_.z;
        if (std::abs(dz) >= half_.z) return std::nullopt;
        const double s = std::sqrt(1.0 - (dz / half_.z) * (dz / half_.z));
        return ellipse_line(half_.x * s, half_.y * s, q, u);
      }
      case PrimitiveKind::box:
        if (h < 0.0 || h > 2.0 * half_.z) return std::nullopt;
        return rect_line(half_.x, half_.y, q, u);
      case PrimitiveKind::capsule: {
        const double r = half_.y, dz = h - r;
        if (std::abs(dz) >= r) return std::nullopt;
        const double w = std::sqrt(r * r - dz * dz);
        std::optional<Interval> out = rect_line(half_.x, w, q, u);
        for (double end : {-half_.x, half_.x}) {
          if (auto c = circle_line(Vec2{end, 0.0}, w, q, u)) {
            out = out ? Interval{std::min(out->lo, c->lo), std::max(out->hi, c->hi)} : *c;
          }
        }
        return out;
      }
    }
    return std::nullopt;
  }

  /// Nearest positive ray parameter where origin + t * dir enters the solid.
  std::optional<double> ray_hit(Vec3 origin, Vec3 dir) const {
    const Vec2 oxy = to_local(origin.xy());
    const Vec2 dxy = dir_to_local(dir.xy());
    const Vec3 o{oxy.x, oxy.y, origin.z};
    const Vec3 d{dxy.x, dxy.y, dir.z};
    switch (kind_) {
      case PrimitiveKind::ellipsoid: {
        const Vec3 os{o.x / half_.x, o.y / half_.y, (o.z - half_.z) / half_.z};
        const Vec3 ds{d.x / half_.x, d.y / half_.y, d.z / half_.z};
        return smallest_positive_root(ds.dot(ds), 2.0 * os.dot(ds), os.dot(os) - 1.0);
      }
      case PrimitiveKind::box: {
        double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
        const std::array<double, 3> lo{-half_.x, -half_.y, 0.0}, hi{half_.x, half_.y, 2.0 * half_.z};
        const std::array<double, 3> oo{o.x, o.y, o.z}, dd{d.x, d.y, d.z};
        for (std::size_t i = 0; i < 3; ++i) {
          if (std::abs(dd[i]) < 1e-15) {
            if (oo[i] < lo[i] || oo[i] > hi[i]) return std::nullopt;
            continue;
          }
          double a = (lo[i] - oo[i]) / dd[i], b = (hi[i] - oo[i]) / dd[i];
          if (a > b) std::swap(a, b);
          t0 = std::max(t0, a);
          t1 = std::min(t1, b);
          if (t0 > t1) return std::nullopt;
        }
        return t0 > 0.0 ? std::optional<double>(t0) : std::nullopt;
      }
      case PrimitiveKind::capsule: {
        const double r = half_.y, L = half_.x;
        std::optional<double> best;
        auto keep = [&](std::optional<double> t) {
          if (t && (!best || *t < *best)) best = t;
        };
        // Cylinder about the local x axis at height r.
        const double oy = o.y, oz = o.z - r;
        const double a = d.y * d.y + d.z * d.z;
        if (a > 1e-18) {
          const double b = 2.0 * (oy * d.y + oz * d.z), c = oy * oy + oz * oz - r * r;
          const double disc = b * b - 4.0 * a * c;
          if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
              if (t > 0.0 && std::abs(o.x + t * d.x) <= L) {
                keep(t);
                break;
              }
            }
          }
        }
        for (double end : {-L, L}) {
          const Vec3 oc{o.x - end, o.y, o.z - r};
          keep(smallest_positive_root(d.dot(d), 2.0 * oc.dot(d), oc.dot(oc) - r * r));
        }
        return best;
      }
    }
    return std::nullopt;
  }

private:
  static std::optional<double> smallest_positive_root(double a, double b, double c) {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0 || a <= 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t0 = (-b - sq) / (2.0 * a), t1 = (-b + sq) / (2.0 * a);
    if (t0 > 0.0) return t0;
    if (t1 > 0.0) return t1;
    return std::nullopt;
  }

  static std::optional<Interval> ellipse_line(double A, double B, Vec2 q, Vec2 u) {
    const double a = u.x * u.x / (A * A) + u.y * u.y / (B * B);
    const double b = 2.0 * (q.x * u.x / (A * A) + q.y * u.y / (B * B));
    const double c = q.x * q.x / (A * A) + q.y * q.y / (B * B) - 1.0;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    return Interval{(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)};
  }

  static std::optional<Interval> rect_line(double hx, double hy, Vec2 q, Vec2 u) {
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    const std::array<double, 2> half{hx, hy}, qq{q.x, q.y}, uu{u.x, u.y};
    for (std::size_t i = 0; i < 2; ++i) {
      if (std::abs(uu[i]) < 1e-15) {
        if (std::abs(qq[i]) > half[i]) return std::nullopt;
        continue;
      }
      double a = (-half[i] - qq[i]) / uu[i], b = (half[i] - qq[i]) / uu[i];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
    }
    if (t0 > t1) return std::nullopt;
    return Interval{t0, t1};
  }

  static std::optional<Interval> circle_line(Vec2 c, double r, Vec2 q, Vec2 u) {
    const Vec2 d = q - c;
    const double b = d.dot(u), cc = d.dot(d) - r * r;
    const double disc = b * b - cc;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    return Interval{-b - sq, -b + sq};
  }

  PrimitiveKind kind_;
  Vec3 half_;
  Vec2 center_;
  double c_, s_;
};

struct ObjectShape {
  ShapeKind kind = ShapeKind::box;
  std::vector<Primitive> parts;
  Rgb color{};
  bool compliant = false;  // soft object: tolerates a slightly wider grip

  double top() const {
    double t = 0.0;
    for (const auto& p : parts) t = std::max(t, p.height());
    return t;
  }
  /// Largest dimension of the object's bounding box.
  double max_extent() const;
  friend bool operator==(const ObjectShape&, const ObjectShape&) = default;
};

/// Shape resting on the floor at planar pose (x, y, yaw).
struct ObjectInstance {
  ObjectShape shape;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  int id = 0;

  Vec2 position() const { return {x, y}; }

  std::vector<PlacedPrimitive> placed() const {
    std::vector<PlacedPrimitive> out;
    out.reserve(shape.parts.size());
    const Vec2 pos{x, y};
    for (const auto& p : shape.parts) out.emplace_back(p, pos + p.offset.rotated(yaw), yaw + p.yaw);
    return out;
  }

  double support(Vec2 n) const {
    double h = -std::numeric_limits<double>::infinity();
    for (const auto& p : placed()) h = std::max(h, p.support(n));
    return h;
  }

  double bounding_radius() const {
    double r = 0.0;
    for (const auto& p : placed()) r = std::max(r, (p.center() - position()).norm() + p.footprint_radius());
    return r;
  }

  bool contains(Vec3 p) const {
    for (const auto& q : placed())
      if (q.contains(p)) return true;
    return false;
  }
  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

inline double ObjectShape::max_extent() const {
  const ObjectInstance probe{*this, 0.0, 0.0, 0.0, 0};
  const double ex = probe.support({1, 0}) + probe.support({-1, 0});
  const double ey = probe.support({0, 1}) + probe.support({0, -1});
  return std::max({ex, ey, top()});
}

/// Axis-aligned floor region centered on the robot-frame origin.
struct Workspace {
  double size_x = 35.0;
  double size_y = 40.0;

  double half_x() const { return 0.5 * size_x; }
  double half_y() const { return 0.5 * size_y; }
  bool contains(Vec2 p) const { return std::abs(p.x) <= half_x() && std::abs(p.y) <= half_y(); }
  double diagonal() const { return std::hypot(size_x, size_y); }
  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct Scene {
  std::vector<ObjectInstance> objects;
  double floor_z = 0.0;
  Workspace workspace{};

  std::size_t size() const { return objects.size(); }
  bool empty() const { return objects.empty(); }
  const ObjectInstance* find(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  friend bool operator==(const Scene&, const Scene&) = default;
};

// ---------------------------------------------------------------------------
// Footprint overlap

struct Penetration {
  double depth = 0.0;  // minimum translation distance; <= 0 means separated
  Vec2 normal{1, 0};   // move the second object along +normal to separate
};

namespace detail {
inline const std::array<Vec2, 360>& overlap_directions() {
  static const std::array<Vec2, 360> dirs = [] {
    std::array<Vec2, 360> d{};
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double a = kPi * static_cast<double>(i) / static_cast<double>(d.size());
      d[i] = {std::cos(a), std::sin(a)};
    }
    return d;
  }();
  return dirs;
}
}  // namespace detail

/// Footprint penetration of two convex primitives by the separating-axis
/// form of the Minkowski difference, sampled every half degree.
inline Penetration penetration(const PlacedPrimitive& a, const PlacedPrimitive& b) {
  Penetration best{std::numeric_limits<double>::infinity(), {1, 0}};
  for (Vec2 n : detail::overlap_directions()) {
    const Vec2 m{-n.x, -n.y};
    const double push_pos = a.support(n) + b.support(m);  // move b along +n
    const double push_neg = b.support(n) + a.support(m);  // move b along -n
    if (push_pos < best.depth) best = {push_pos, n};
    if (push_neg < best.depth) best = {push_neg, m};
    if (best.depth <= 0.0) return best;
  }
  return best;
}

/// Deepest penetration over all part pairs of two objects.
inline Penetration penetration(const ObjectInstance& a, const ObjectInstance& b) {
  Penetration worst{-std::numeric_limits<double>::infinity(), {1, 0}};
  if ((a.position() - b.position()).norm() > a.bounding_radius() + b.bounding_radius()) return {-1.0, {1, 0}};
  const auto pa = a.placed();
  const auto pb = b.placed();
  for (const auto& p : pa)
    for (const auto& q : pb) {
      if ((p.center() - q.center()).norm() > p.footprint_radius() + q.footprint_radius()) continue;
      const Penetration d = penetration(p, q);
      if (d.depth > worst.depth) worst = d;
    }
  if (!std::isfinite(worst.depth)) return {-1.0, {1, 0}};
  return worst;
}

inline double max_interpenetration(const Scene& scene) {
  double worst = 0.0;
  for (std::size_t i = 0; i < scene.objects.size(); ++i)
    for (std::size_t j = i + 1; j < scene.objects.size(); ++j)
      worst = std::max(worst, penetration(scene.objects[i], scene.objects[j]).depth);
  return worst;
}

// ---------------------------------------------------------------------------
// Grasp outcome model

enum class FailureReason : std::uint8_t { none, empty_jaws, width_too_wide, width_too_narrow, slip, collision };

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "none";
    case FailureReason::empty_jaws: return "empty-jaws";
    case FailureReason::width_too_wide: return "width-too-wide";
    case FailureReason::width_too_narrow: return "width-too-narrow";
    case FailureReason::slip: return "slip";
    case FailureReason::collision: return "collision";
  }
  return "?";
}

struct GraspOutcome {
  bool success = false;
  std::optional<int> grasped_object;
  FailureReason failure_reason = FailureReason::empty_jaws;
  friend bool operator==(const GraspOutcome&, const GraspOutcome&) = default;
};

/// Geometry behind a grasp decision, exposed for oracles and diagnostics.
struct GraspAnalysis {
  GraspOutcome outcome;
  int engaged_objects = 0;
  std::optional<Interval> section;  // engaged extent along the closing axis
  double width_limit = 0.0;         // max width accepted for the engaged object
};

/// Union of a set of intervals into connected components (sorted).
inline std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!out.empty() && i.lo <= out.back().hi) out.back().hi = std::max(out.back().hi, i.hi);
    else out.push_back(i);
  }
  return out;
}

/// Section of `obj` seen by jaws closing along `dir` through `origin`, with
/// fingers covering heights [band_lo, band_hi] above the floor. Slices of a
/// primitive are nested around its center height, so the widest slice in the
/// band is the one closest to that height.
inline std::vector<Interval> object_section(const ObjectInstance& obj, Vec2 origin, Vec2 dir,
                                            double band_lo, double band_hi) {
  std::vector<Interval> parts;
  for (const auto& p : obj.placed()) {
    const double h = std::clamp(p.center_height(), band_lo, band_hi);
    if (auto iv = p.line_section(h, origin, dir)) parts.push_back(*iv);
  }
  return merge_intervals(std::move(parts));
}

inline GraspAnalysis analyze_grasp(const Scene& scene, const GraspPose& g, const GripperSpec& gripper) {
  GraspAnalysis a;
  auto fail = [&](FailureReason r) {
    a.outcome = {false, std::nullopt, r};
    return a;
  };
  if (!scene.workspace.contains({g.x, g.y})) return fail(FailureReason::collision);
  const double band_hi = g.z - scene.floor_z;
  const double band_lo = std::max(band_hi - gripper.jaw_length, gripper.floor_clearance);
  if (band_hi < gripper.floor_clearance) return fail(FailureReason::collision);

  const Vec2 origin{g.x, g.y};
  const Vec2 dir{std::cos(g.theta), std::sin(g.theta)};
  const double span = 0.5 * gripper.max_width;
  const Interval jaws{-span, span};

  const ObjectInstance* engaged = nullptr;
  Interval extent{};
  for (const auto& obj : scene.objects) {
    std::optional<Interval> hull;
    for (const auto& c : object_section(obj, origin, dir, band_lo, band_hi)) {
      if (c.hi <= jaws.lo || c.lo >= jaws.hi) continue;
      hull = hull ? Interval{std::min(hull->lo, c.lo), std::max(hull->hi, c.hi)} : c;
    }
    if (!hull) continue;
    ++a.engaged_objects;
    engaged = &obj;
    extent = *hull;
  }
  if (a.engaged_objects == 0) return fail(FailureReason::empty_jaws);
  if (a.engaged_objects > 1) return fail(FailureReason::collision);

  a.section = extent;
  const double tol = engaged->shape.compliant ? gripper.compliance_tolerance : 0.0;
  a.width_limit = gripper.max_width + tol;
  if (extent.length() > a.width_limit) return fail(FailureReason::width_too_wide);
  if (extent.lo < jaws.lo - 0.5 * tol || extent.hi > jaws.hi + 0.5 * tol) return fail(FailureReason::collision);
  if (extent.length() < gripper.min_width) return fail(FailureReason::width_too_narrow);
  if (std::abs(extent.center()) > gripper.slip_tolerance) return fail(FailureReason::slip);
  a.outcome = {true, engaged->id, FailureReason::none};
  return a;
}

/// Closes the jaws at `g`. On success the grasped object leaves the scene.
inline std::pair<GraspOutcome, Scene> execute_grasp(const Scene& scene, const GraspPose& g,
                                                    const GripperSpec& gripper) {
  const GraspAnalysis a = analyze_grasp(scene, g, gripper);
  Scene next = scene;
  if (a.outcome.success) {
    std::erase_if(next.objects, [&](const ObjectInstance& o) { return o.id == *a.outcome.grasped_object; });
  }
  return {a.outcome, std::move(next)};
}

/// Exhaustive search for a successful grasp on `shape` standing alone:
/// 0.5 cm position grid, 10 degree angle grid, 0.5 cm height grid.
inline std::optional<GraspPose> find_feasible_grasp(const ObjectShape& shape, const GripperSpec& gripper,
                                                    double step = 0.5, double angle_step_deg = 10.0) {
  Scene alone;
  alone.objects.push_back({shape, 0.0, 0.0, 0.0, 0});
  const ObjectInstance& o = alone.objects.front();
  const double x0 = -o.support({-1, 0}), x1 = o.support({1, 0});
  const double y0 = -o.support({0, -1}), y1 = o.support({0, 1});
  const int n_theta = static_cast<int>(std::lround(180.0 / angle_step_deg));
  for (double z = gripper.floor_clearance; z <= shape.top() + gripper.jaw_length; z += step)
    for (double x = std::floor(x0 / step) * step; x <= x1; x += step)
      for (double y = std::floor(y0 / step) * step; y <= y1; y += step)
        for (int k = 0; k < n_theta; ++k) {
          const GraspPose g{x, y, z, deg_to_rad(angle_step_deg * k)};
          if (analyze_grasp(alone, g, gripper).outcome.success) return g;
        }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Object sets

namespace detail {

inline Rgb random_color(Rng& rng) {
  return {static_cast<std::uint8_t>(40 + rng.index(200)), static_cast<std::uint8_t>(40 + rng.index(200)),
          static_cast<std::uint8_t>(40 + rng.index(200))};
}

/// A graspable convex primitive: its minor horizontal width lies inside the
/// gripper range, so grasping across it at mid height always works.
inline Primitive random_primitive(Rng& rng, PrimitiveKind kind, double max_length) {
  const double width = rng.uniform(1.0, 2.2);
  const double length = rng.uniform(std::max(width, 2.0), std::max(max_length, 2.0));
  Primitive p;
  p.kind = kind;
  switch (kind) {
    case PrimitiveKind::ellipsoid: p.half = {0.5 * length, 0.5 * width, 0.5 * rng.uniform(1.5, 4.5)}; break;
    case PrimitiveKind::box: p.half = {0.5 * length, 0.5 * width, 0.5 * rng.uniform(1.5, 4.5)}; break;
    case PrimitiveKind::capsule: {
      const double r = 0.5 * width;
      p.half = {std::max(0.5 * length - r, 0.0), r, r};
      break;
    }
  }
  return p;
}

inline PrimitiveKind random_kind(Rng& rng) { return static_cast<PrimitiveKind>(rng.index(3)); }

}  // namespace detail

/// Seen profile: single convex primitives with max extent 2-8 cm.
/// Unseen profile: 2-4 overlapping primitives fused into non-convex shapes.
inline std::vector<ObjectShape> generate_object_set(ObjectProfile profile, int count, Seed seed,
                                                    const GripperSpec& gripper = {}) {
  if (count < 1) throw InvalidArgument("scene", "generate_object_set: count must be >= 1");
  Rng rng(seed.stream(profile == ObjectProfile::seen ? "objects/seen" : "objects/unseen"));
  std::vector<ObjectShape> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    ObjectShape s;
    s.color = detail::random_color(rng);
    s.compliant = rng.bernoulli(0.5);
    if (profile == ObjectProfile::seen) {
      const PrimitiveKind k = detail::random_kind(rng);
      s.kind = static_cast<ShapeKind>(k);
      s.parts.push_back(detail::random_primitive(rng, k, 8.0));
    } else {
      s.kind = ShapeKind::composite;
      const std::size_t n = 2 + rng.index(3);
      s.parts.push_back(detail::random_primitive(rng, detail::random_kind(rng), 5.0));
      while (s.parts.size() < n) {
        Primitive p = detail::random_primitive(rng, detail::random_kind(rng), 5.0);
        const Primitive& anchor = s.parts[rng.index(s.parts.size())];
        p.yaw = rng.uniform(0.0, kPi);
        // Attach so that the new part's center sits inside the anchor's rim:
        // the volumes overlap and the union is connected.
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const Vec2 dir{std::cos(phi), std::sin(phi)};
        const PlacedPrimitive placed_anchor(anchor, anchor.offset, anchor.yaw);
        const double reach = placed_anchor.support(dir) - anchor.offset.dot(dir);
        p.offset = anchor.offset + rng.uniform(0.6, 0.9) * reach * dir;
        s.parts.push_back(p);
      }
    }
    if (s.max_extent() > 14.0) continue;
    if (!find_feasible_grasp(s, gripper)) continue;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scattering and sweeping

struct ScatterConfig {
  double sigma = 8.0;               // spread of the dump around the workspace center [cm]
  int max_iterations = 200;         // separation passes
  double max_penetration = 0.2;     // accepted residual overlap [cm]
  double settle_tolerance = 0.05;   // separation target [cm]
  double separation_gap = 0.02;     // clearance added when pushing a pair apart [cm]
  double sweep_sigma = 3.0;         // per-object displacement of a sweep [cm]
};

namespace detail {

/// Shifts `o` so its footprint lies inside the workspace.
inline void clamp_into(ObjectInstance& o, const Workspace& ws) {
  const double xmin = -o.support({-1, 0}), xmax = o.support({1, 0});
  const double ymin = -o.support({0, -1}), ymax = o.support({0, 1});
  if (xmin < -ws.half_x()) o.x += -ws.half_x() - xmin;
  else if (xmax > ws.half_x()) o.x -= xmax - ws.half_x();
  if (ymin < -ws.half_y()) o.y += -ws.half_y() - ymin;
  else if (ymax > ws.half_y()) o.y -= ymax - ws.half_y();
}

inline bool fits(const ObjectInstance& o, const Workspace& ws) {
  return -o.support({-1, 0}) >= -ws.half_x() && o.support({1, 0}) <= ws.half_x() &&
         -o.support({0, -1}) >= -ws.half_y() && o.support({0, 1}) <= ws.half_y();
}

/// Iterative pairwise separation. Returns the final max interpenetration.
inline double settle(std::vector<ObjectInstance>& objects, const Workspace& ws, const ScatterConfig& cfg) {
  for (int it = 0; it < cfg.max_iterations; ++it) {
    double worst = 0.0;
    for (std::size_t i = 0; i < objects.size(); ++i)
      for (std::size_t j = i + 1; j < objects.size(); ++j) {
        const Penetration p = penetration(objects[i], objects[j]);
        if (p.depth <= cfg.settle_tolerance) continue;
        worst = std::max(worst, p.depth);
        const double half = 0.5 * (p.depth + cfg.separation_gap);
        objects[i].x -= half * p.normal.x;
        objects[i].y -= half * p.normal.y;
        objects[j].x += half * p.normal.x;
        objects[j].y += half * p.normal.y;
      }
    for (auto& o : objects) clamp_into(o, ws);
    if (worst == 0.0) break;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < objects.size(); ++i)
    for (std::size_t j = i + 1; j < objects.size(); ++j)
      worst = std::max(worst, penetration(objects[i], objects[j]).depth);
  return worst;
}

}  // namespace detail

/// Dumps `shapes` around the workspace center and separates overlaps.
/// Object ids are the input indices.
inline Scene scatter(std::span<const ObjectShape> shapes, Seed seed, const ScatterConfig& cfg = {},
                     const Workspace& ws = {}) {
  Rng rng(seed.stream("scatter"));
  Scene scene;
  scene.workspace = ws;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    ObjectInstance o{shapes[i], 0.0, 0.0, rng.uniform(0.0, 2.0 * kPi), static_cast<int>(i)};
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      o.x = rng.normal(cfg.sigma);
      o.y = rng.normal(cfg.sigma);
      placed = detail::fits(o, ws);
    }
    if (!placed) throw ScatterError("scene", "object does not fit in the workspace");
    scene.objects.push_back(std::move(o));
  }
  const double residual = detail::settle(scene.objects, ws, cfg);
  if (residual > cfg.max_penetration)
    throw ScatterError("scene", "separation did not converge (residual " + std::to_string(residual) + " cm)");
  return scene;
}

/// Scatter with fresh seeds until separation succeeds.
inline Scene scatter_with_retry(std::span<const ObjectShape> shapes, Seed seed, const ScatterConfig& cfg = {},
                                const Workspace& ws = {}, int max_retries = 50) {
  for (int k = 0;; ++k) {
    try {
      return scatter(shapes, k == 0 ? seed : seed.child(static_cast<std::uint64_t>(k)), cfg, ws);
    } catch (const ScatterError&) {
      if (k + 1 >= max_retries) throw;
    }
  }
}

/// Arm pass over the floor: every object is displaced and turned, then the
/// scene is re-settled. If settling fails the pass is redrawn; after repeated
/// failures the scene is returned unchanged.
inline Scene sweep(const Scene& scene, Seed seed, const ScatterConfig& cfg = {}) {
  if (scene.empty()) return scene;
  Rng rng(seed.stream("sweep"));
  for (int attempt = 0; attempt < 20; ++attempt) {
    Scene next = scene;
    for (auto& o : next.objects) {
      o.x += rng.normal(cfg.sweep_sigma);
      o.y += rng.normal(cfg.sweep_sigma);
      o.yaw = wrap_full_turn(o.yaw + rng.uniform(-kPi, kPi));
      detail::clamp_into(o, next.workspace);
    }
    if (detail::settle(next.objects, next.workspace, cfg) <= cfg.max_penetration) return next;
  }
  return scene;
}

}  // namespace replab
