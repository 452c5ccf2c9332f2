#pragma once

// Camera -> robot calibration, the cross-cell calibration-error metric,
// control-noise fitting and compensation, and camera alignment between cells.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "replab/arm.hpp"
#include "replab/camera.hpp"
#include "replab/geometry.hpp"
#include "replab/scene.hpp"

namespace replab {

/// Affine map C (3x4, row-major) taking homogeneous camera-frame points
/// (x, y, depth, 1) to the robot frame.
struct CalibrationModel {
  std::array<double, 12> c{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  double residual_rms = 0.0;

  static CalibrationModel from_pose(const RigidTransform& camera_to_robot) {
    CalibrationModel m;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) m.c[static_cast<std::size_t>(4 * r + k)] = camera_to_robot.rotation(r, k);
    }
    m.c[3] = camera_to_robot.translation.x;
    m.c[7] = camera_to_robot.translation.y;
    m.c[11] = camera_to_robot.translation.z;
    return m;
  }

  Mat3 linear() const { return Mat3{{c[0], c[1], c[2], c[4], c[5], c[6], c[8], c[9], c[10]}}; }
  Vec3 offset() const { return {c[3], c[7], c[11]}; }
  Vec3 apply(Vec3 p_cam) const { return linear() * p_cam + offset(); }

  /// Camera-frame point mapped to `p_robot` (requires an invertible linear part).
  Vec3 unapply(Vec3 p_robot) const {
    Eigen::Matrix3d a;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) a(r, k) = c[static_cast<std::size_t>(4 * r + k)];
    const Vec3 d = p_robot - offset();
    const Eigen::Vector3d x = a.partialPivLu().solve(Eigen::Vector3d(d.x, d.y, d.z));
    return {x(0), x(1), x(2)};
  }

  bool finite() const {
    for (double v : c)
      if (!std::isfinite(v)) return false;
    return std::isfinite(residual_rms);
  }
  friend bool operator==(const CalibrationModel&, const CalibrationModel&) = default;
};

struct Correspondence {
  Vec3 p_cam;  // camera frame (x, y, depth)
  Vec3 p_arm;  // robot frame
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// Least-squares C from correspondences (column-pivoting QR on the n x 4
/// design matrix). Needs at least 4 non-coplanar camera points.
inline CalibrationModel solve_calibration(std::span<const Correspondence> pairs) {
  if (pairs.size() < 4) throw DegenerateInput("calibration", "solve_calibration needs at least 4 correspondences");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::MatrixXd b(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    if (!p.p_cam.finite() || !p.p_arm.finite()) throw InvalidArgument("calibration", "non-finite correspondence");
    a.row(i) << p.p_cam.x, p.p_cam.y, p.p_cam.z, 1.0;
    b.row(i) << p.p_arm.x, p.p_arm.y, p.p_arm.z;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) throw DegenerateInput("calibration", "correspondences are coplanar or repeated (rank-deficient)");
  const Eigen::MatrixXd x = qr.solve(b);  // 4 x 3
  CalibrationModel m;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 4; ++k) m.c[static_cast<std::size_t>(4 * r + k)] = x(k, r);
  const Eigen::MatrixXd res = a * x - b;
  m.residual_rms = std::sqrt(res.squaredNorm() / static_cast<double>(n));
  return m;
}

/// Mean of |C p_cam - p_arm| over the pairs.
inline double calibration_error(const CalibrationModel& model, std::span<const Correspondence> pairs) {
  if (pairs.empty()) throw DegenerateInput("calibration", "calibration_error needs at least one pair");
  double sum = 0.0;
  for (const auto& p : pairs) sum += distance(model.apply(p.p_cam), p.p_arm);
  return sum / static_cast<double>(pairs.size());
}

/// Noise sources when recording correspondences in simulation.
struct CorrespondenceNoise {
  double arm_sigma = 0.5;    // error of the recorded arm position, per axis [cm]
  double depth_sigma = 0.0;  // sensor depth noise [cm]
  double min_z = 0.0;        // heights at which the target is presented
  double max_z = 12.0;
};

/// Synthesizes checkerboard-style correspondences for a camera at `pose`:
/// the arm presents a target at random points above the floor and the camera
/// observes it.
inline std::vector<Correspondence> simulate_correspondences(const RigidTransform& pose, const CameraIntrinsics& k,
                                                            int count, const CorrespondenceNoise& noise, Seed seed,
                                                            const Workspace& ws = {}) {
  if (count < 1) throw InvalidArgument("calibration", "correspondence count must be >= 1");
  Rng rng(seed.stream("calibration/correspondences"));
  const RigidTransform to_cam = pose.inverse();
  std::vector<Correspondence> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    const Vec3 truth{rng.uniform(-ws.half_x(), ws.half_x()), rng.uniform(-ws.half_y(), ws.half_y()),
                     rng.uniform(noise.min_z, noise.max_z)};
    Vec3 cam = to_cam.apply(truth);
    const auto px = project(cam, k);
    if (!px || !k.in_bounds(px->u, px->v)) continue;
    cam = deproject(px->u, px->v, cam.z + rng.normal(noise.depth_sigma), k);
    const Vec3 recorded{truth.x + rng.normal(noise.arm_sigma), truth.y + rng.normal(noise.arm_sigma),
                        truth.z + rng.normal(noise.arm_sigma)};
    out.push_back({cam, recorded});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Control noise

/// Pooled scalar fit achieved = alpha * target + beta over the x and y
/// coordinates of every grid point.
inline NoiseModel fit_noise_model(std::span<const Vec3> targets, std::span<const Vec3> achieved) {
  if (targets.size() != achieved.size())
    throw InvalidArgument("calibration", "fit_noise_model: target and achieved lists differ in length");
  const std::size_t n = 2 * targets.size();
  if (n == 0) throw DegenerateInput("calibration", "fit_noise_model: no samples");
  double st = 0.0, sa = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    st += targets[i].x + targets[i].y;
    sa += achieved[i].x + achieved[i].y;
  }
  const double mt = st / static_cast<double>(n), ma = sa / static_cast<double>(n);
  double stt = 0.0, sta = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (auto [t, a] : {std::pair{targets[i].x, achieved[i].x}, std::pair{targets[i].y, achieved[i].y}}) {
      stt += (t - mt) * (t - mt);
      sta += (t - mt) * (a - ma);
    }
  }
  if (!(stt > 1e-12)) throw DegenerateInput("calibration", "fit_noise_model: all horizontal targets identical");
  NoiseModel m;
  m.alpha = sta / stt;
  m.beta = ma - m.alpha * mt;
  double ss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double rx = achieved[i].x - (m.alpha * targets[i].x + m.beta);
    const double ry = achieved[i].y - (m.alpha * targets[i].y + m.beta);
    ss += rx * rx + ry * ry;
  }
  m.residual = std::sqrt(ss / static_cast<double>(n));
  return m;
}

/// Target to command so that the distorted controller lands on `p`.
inline Vec3 compensate(const NoiseModel& nm, Vec3 p) {
  if (!(std::abs(nm.alpha) >= 0.1)) throw InvalidArgument("calibration", "compensate: |alpha| < 0.1 is not a usable model");
  return {(p.x - nm.beta) / nm.alpha, (p.y - nm.beta) / nm.alpha, p.z};
}

/// The 5x5 floor grid used to measure the controller distortion.
inline std::vector<Vec3> noise_grid(const Workspace& ws = {}, double z = 1.0, int n = 5, double margin = 2.5) {
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double fx = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
      const double fy = n == 1 ? 0.5 : static_cast<double>(j) / (n - 1);
      out.push_back({-ws.half_x() + margin + fx * (ws.size_x - 2 * margin),
                     -ws.half_y() + margin + fy * (ws.size_y - 2 * margin), z});
    }
  return out;
}

/// Commands the arm over the grid and fits the distortion from what it reached.
inline NoiseModel measure_noise_model(const ArmModel& arm, const ControlNoise& truth, Seed seed,
                                      const Workspace& ws = {}) {
  const std::vector<Vec3> grid = noise_grid(ws);
  std::vector<Vec3> achieved;
  for (std::size_t i = 0; i < grid.size(); ++i)
    achieved.push_back(command_position(arm, truth, grid[i], 0.0, seed.stream("calibration/noise-grid").child(i)));
  return fit_noise_model(grid, achieved);
}

// ---------------------------------------------------------------------------
// Camera alignment between cells

/// Calibration fixture placed in both cells while aligning the camera: a few
/// tall blocks whose edges make lateral offsets visible.
inline Scene alignment_reference_scene() {
  Scene s;
  auto block = [&](double x, double y, double yaw, Vec3 half, PrimitiveKind kind) {
    ObjectShape shape;
    shape.kind = static_cast<ShapeKind>(kind);
    shape.parts.push_back({kind, half, {}, 0.0});
    shape.color = {200, 200, 60};
    s.objects.push_back({shape, x, y, yaw, static_cast<int>(s.objects.size())});
  };
  block(-9.0, -11.0, 0.3, {3.0, 2.0, 4.0}, PrimitiveKind::box);
  block(8.0, 10.0, -0.6, {2.5, 2.5, 3.0}, PrimitiveKind::box);
  block(10.0, -9.0, 1.1, {4.0, 1.5, 2.5}, PrimitiveKind::box);
  block(-8.0, 9.0, 0.0, {2.0, 2.0, 2.0}, PrimitiveKind::ellipsoid);
  block(0.0, 0.0, 0.8, {1.5, 1.5, 5.0}, PrimitiveKind::box);
  return s;
}

struct AlignmentOptions {
  int pixel_stride = 2;
  double translation_step = 0.5;  // initial coordinate step [cm]
  double rotation_step = 0.01;    // initial coordinate step [rad]
  double min_translation_step = 0.002;
  int max_iterations = 200;
  double tolerance = 0.3;  // accepted mean depth discrepancy [cm]
  double exact = 1e-4;     // below this the views already match (float depth rounding)
};

struct AlignmentResult {
  RigidTransform pose;
  double discrepancy = 0.0;
  int iterations = 0;
};

/// Mean absolute depth difference between `reference` and a noiseless
/// render from `pose`, over sampled pixels valid in both.
inline double depth_discrepancy(const DepthImage& reference, const Scene& scene, const RigidTransform& pose,
                                const CameraIntrinsics& k, int stride = 2) {
  const RayCaster caster(scene, pose, k);
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = stride / 2; v < k.height; v += stride)
    for (int u = stride / 2; u < k.width; u += stride) {
      const float ref = reference.at(u, v);
      if (!(ref > 0.0f)) continue;
      const double d = caster.cast(u, v).depth;
      if (!(d > 0.0)) continue;
      sum += std::abs(d - ref);
      ++n;
    }
  if (n == 0) return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(n);
}

/// Adjusts `candidate` until its view of the fixture matches the reference
/// cell's. Coordinate descent over translation and a rotation vector, halving
/// the steps when no coordinate improves.
inline AlignmentResult align_cell_camera(const DepthImage& reference, const RigidTransform& candidate,
                                         const Scene& fixture, const CameraIntrinsics& k,
                                         const AlignmentOptions& opts = {}) {
  // Rotations pivot about the floor point on the optical axis. Pivoting at the
  // camera center would couple yaw with lateral translation.
  const Vec3 axis = candidate.rotation.col(2);
  Vec3 pivot = candidate.translation;
  if (axis.z < 0.0) pivot = candidate.translation + (-(candidate.translation.z - fixture.floor_z) / axis.z) * axis;
  std::array<double, 6> x{};
  auto pose_of = [&](const std::array<double, 6>& p) {
    const Mat3 rot = rotation_from_vector({p[3], p[4], p[5]});
    return RigidTransform{rot * candidate.rotation,
                          pivot + rot * (candidate.translation - pivot) + Vec3{p[0], p[1], p[2]}};
  };
  auto cost = [&](const std::array<double, 6>& p) {
    return depth_discrepancy(reference, fixture, pose_of(p), k, opts.pixel_stride);
  };
  AlignmentResult r{candidate, cost(x), 0};
  if (r.discrepancy <= opts.exact) return r;
  double ts = opts.translation_step, rs = opts.rotation_step;
  while (r.iterations < opts.max_iterations && ts >= opts.min_translation_step) {
    ++r.iterations;
    bool improved = false;
    for (std::size_t i = 0; i < 6; ++i) {
      const double step = i < 3 ? ts : rs;
      for (double sgn : {1.0, -1.0}) {
        std::array<double, 6> trial = x;
        trial[i] += sgn * step;
        const double c = cost(trial);
        if (c < r.discrepancy) {
          x = trial;
          r.discrepancy = c;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      ts *= 0.5;
      rs *= 0.5;
    }
  }
  r.pose = pose_of(x);
  if (!(r.discrepancy < opts.tolerance))
    throw AlignmentFailed("camera alignment stopped at mean discrepancy " + std::to_string(r.discrepancy) + " cm",
                          r.discrepancy);
  return r;
}

inline AlignmentResult align_cell_camera(const PointCloud& reference, const RigidTransform& candidate,
                                         const Scene& fixture, const CameraIntrinsics& k,
                                         const AlignmentOptions& opts = {}) {
  return align_cell_camera(depth_from_cloud(reference, k), candidate, fixture, k, opts);
}

}  // namespace replab
