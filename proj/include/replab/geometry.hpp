#pragma once

// Shared linear algebra, frames and seeded randomness. All lengths are in
// centimeters and all angles in radians.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "replab/error.hpp"

namespace replab {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;

  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  /// Counter-clockwise rotation by `angle`.
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

/// A point or direction. Which frame (camera or robot) it lives in is a
/// property of the owning field, e.g. `Correspondence::p_cam`.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  Vec3& operator+=(Vec3 o) { x += o.x; y += o.y; z += o.z; return *this; }
  friend constexpr bool operator==(Vec3, Vec3) = default;

  constexpr double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(Vec3 o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
  constexpr Vec2 xy() const { return {x, y}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(Vec3 a, Vec3 b) { return (a - b).norm(); }

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static constexpr Mat3 identity() { return {}; }
  static constexpr Mat3 from_rows(Vec3 r0, Vec3 r1, Vec3 r2) {
    return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
  }
  static constexpr Mat3 from_cols(Vec3 c0, Vec3 c1, Vec3 c2) {
    return Mat3{{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
  }

  constexpr double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
  constexpr double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }

  constexpr Vec3 col(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
  constexpr Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

  friend constexpr Vec3 operator*(const Mat3& a, Vec3 v) {
    return {a.row(0).dot(v), a.row(1).dot(v), a.row(2).dot(v)};
  }
  friend constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out(r, c) = a.row(r).dot(b.col(c));
    return out;
  }
  constexpr Mat3 transposed() const {
    return from_cols(row(0), row(1), row(2));
  }
  constexpr double determinant() const {
    return row(0).dot(row(1).cross(row(2)));
  }
  friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}
inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}
inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
}

/// Rotation matrix for the rotation vector `w` (axis * angle).
inline Mat3 rotation_from_vector(Vec3 w) {
  const double angle = w.norm();
  if (angle < 1e-15) return Mat3::identity();
  const Vec3 k = w / angle;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return Mat3{{t * k.x * k.x + c, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y,
               t * k.x * k.y + s * k.z, t * k.y * k.y + c, t * k.y * k.z - s * k.x,
               t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c}};
}

/// Angle of the rotation R (geodesic distance from identity).
inline double rotation_angle(const Mat3& r) {
  const double c = std::clamp((r(0, 0) + r(1, 1) + r(2, 2) - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

/// Proper rigid motion p -> R p + t.
struct RigidTransform {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{};

  static RigidTransform identity() { return {}; }
  static RigidTransform translate(Vec3 t) { return {Mat3::identity(), t}; }
  static RigidTransform rotate(const Mat3& r) { return {r, {}}; }

  Vec3 apply(Vec3 p) const { return rotation * p + translation; }
  Vec3 apply_direction(Vec3 d) const { return rotation * d; }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transposed();
    return {rt, -(rt * translation)};
  }

  /// (*this) after `other`: p -> this(other(p)).
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  }

  /// Largest deviation of R^T R from identity and of det(R) from 1.
  double orthonormality_error() const {
    const Mat3 g = rotation.transposed() * rotation;
    double err = std::abs(rotation.determinant() - 1.0);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(g(r, c) - (r == c ? 1.0 : 0.0)));
    return err;
  }
};

inline Vec3 transform_point(const RigidTransform& t, Vec3 p) { return t.apply(p); }

/// Pose of a camera at `eye` looking at `target` in the camera convention
/// x right, y down (image rows), z forward. `right_hint` fixes the roll: the
/// image x axis is the component of `right_hint` orthogonal to the view ray.
inline RigidTransform look_at(Vec3 eye, Vec3 target, Vec3 right_hint) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = (right_hint - right_hint.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);
  return {Mat3::from_cols(x, y, z), eye};
}

// ---------------------------------------------------------------------------
// Symmetric 2x2 eigensolve

struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
  friend bool operator==(const Sym2&, const Sym2&) = default;
};

struct Eig2 {
  std::array<double, 2> values{};  // descending
  std::array<Vec2, 2> vectors{};   // unit, first nonzero component positive
};

namespace detail {
inline Vec2 canonical_sign(Vec2 v) {
  const double lead = (v.x != 0.0) ? v.x : v.y;
  return lead < 0.0 ? Vec2{-v.x, -v.y} : v;
}
}  // namespace detail

/// Eigen-decomposition of a symmetric 2x2 matrix. Equal eigenvalues return
/// the axis vectors (1,0), (0,1).
inline Eig2 eig2_sym(const Sym2& m) {
  if (!std::isfinite(m.xx) || !std::isfinite(m.xy) || !std::isfinite(m.yy))
    throw InvalidArgument("geometry", "eig2_sym: non-finite matrix entry");
  const double mean = 0.5 * (m.xx + m.yy);
  const double half_diff = 0.5 * (m.xx - m.yy);
  const double radius = std::hypot(half_diff, m.xy);
  Eig2 out;
  out.values = {mean + radius, mean - radius};
  if (m.xy == 0.0) {
    if (m.xx >= m.yy) out.vectors = {Vec2{1, 0}, Vec2{0, 1}};
    else out.vectors = {Vec2{0, 1}, Vec2{1, 0}};
    out.values = {std::max(m.xx, m.yy), std::min(m.xx, m.yy)};
    return out;
  }
  // Pick the better-conditioned row of (A - l1 I) v = 0.
  const double l1 = out.values[0];
  Vec2 v = (m.xx >= m.yy) ? Vec2{l1 - m.yy, m.xy} : Vec2{m.xy, l1 - m.xx};
  v = (1.0 / v.norm()) * v;
  out.vectors[0] = detail::canonical_sign(v);
  out.vectors[1] = detail::canonical_sign(Vec2{-out.vectors[0].y, out.vectors[0].x});
  return out;
}

// ---------------------------------------------------------------------------
// Angles

/// Maps an angle into [0, pi). Parallel jaws are symmetric under pi.
inline double wrap_half_turn(double a) {
  double r = std::fmod(a, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r -= kPi;
  return r;
}

/// Maps an angle into [-pi, pi).
inline double wrap_full_turn(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r - kPi;
}

/// Smallest difference between two angles modulo pi, in [0, pi/2].
inline double half_turn_distance(double a, double b) {
  const double d = wrap_half_turn(a - b);
  return std::min(d, kPi - d);
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// Seeds and random streams

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Master seed. Subsystems draw from named streams so that, e.g., changing
/// planner randomness never perturbs scene generation.
struct Seed {
  std::uint64_t value = 0;

  constexpr Seed stream(std::string_view name) const {
    return Seed{splitmix64(value ^ fnv1a(name))};
  }
  constexpr Seed child(std::uint64_t index) const {
    return Seed{splitmix64(value + 0x632be59bd9b4e019ULL * (index + 1))};
  }
  friend constexpr bool operator==(Seed, Seed) = default;
};

class Rng {
public:
  explicit Rng(Seed seed) : engine_(splitmix64(seed.value)) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double sigma) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(engine_);
  }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  std::uint64_t next_u64() { return engine_(); }
  Seed next_seed() { return Seed{engine_()}; }
  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace replab
