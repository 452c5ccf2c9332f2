#pragma once

// Everything that defines one simulated cell, plus its human-readable
// `key = value` file format. Numbers are written in shortest round-trip form,
// so save -> load reproduces every double exactly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>

#include "replab/arm.hpp"
#include "replab/calibration.hpp"
#include "replab/camera.hpp"
#include "replab/perception.hpp"
#include "replab/scene.hpp"

namespace replab {

struct EpisodeConfig {
  int objects = 20;
  int max_attempts = 60;
  int sweep_after = 10;  // consecutive failures that trigger a sweep
  friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

struct CellConfig {
  int cell_id = 1;
  double floor_z = 0.0;
  Workspace workspace{};
  ArmModel arm{};
  GripperSpec gripper{};
  RigidTransform camera_pose = default_camera_pose();
  CameraIntrinsics intrinsics{};
  double depth_noise = 0.15;
  ControlNoise control{{0.87, 0.0, 0.0}, 0.4, 0.2};  // the real controller
  NoiseModel noise_model{};                          // fitted, used for compensation
  CalibrationModel calibration{};                    // fitted camera -> robot map
  PerceptionConfig perception{};
  int candidates_per_cluster = 512;
  ScatterConfig scatter{};
  EpisodeConfig episode{};
  std::uint64_t object_set_seed = 2019;

  RenderOptions render_options() const {
    RenderOptions o;
    o.depth_noise = depth_noise;
    return o;
  }

  void validate() const {
    arm.validate();
    gripper.validate();
    intrinsics.validate();
    if (camera_pose.orthonormality_error() > 1e-6) throw ConfigError("benchmark", "camera rotation is not orthonormal");
    if (!calibration.finite()) throw ConfigError("calibration", "calibration matrix has non-finite entries");
    if (!(noise_model.alpha > 0.5 && noise_model.alpha < 1.5))
      throw ConfigError("calibration", "noise model alpha outside the (0.5, 1.5) sanity band");
    if (!(perception.eps > 0.0) || perception.min_pts < 1) throw ConfigError("perception", "invalid DBSCAN parameters");
    if (candidates_per_cluster < 1) throw ConfigError("planners", "candidates_per_cluster must be >= 1");
    if (episode.objects < 1 || episode.max_attempts < 1 || episode.sweep_after < 1)
      throw ConfigError("benchmark", "episode sizes must be positive");
    if (!(workspace.size_x > 0.0 && workspace.size_y > 0.0)) throw ConfigError("scene", "workspace must be non-empty");
  }
};

/// Visits every serialized field as (key, reference).
template <class Cell, class F>
void visit_cell_fields(Cell& c, F&& f) {
  f("cell_id", c.cell_id);
  f("floor_z", c.floor_z);
  f("object_set_seed", c.object_set_seed);
  f("workspace.size_x", c.workspace.size_x);
  f("workspace.size_y", c.workspace.size_y);
  f("arm.base_height", c.arm.base_height);
  f("arm.upper_arm", c.arm.upper_arm);
  f("arm.forearm", c.arm.forearm);
  f("arm.tool", c.arm.tool);
  f("arm.max_joint_velocity", c.arm.max_joint_velocity);
  for (std::size_t i = 0; i < kJointCount; ++i) {
    f("arm.lower." + std::to_string(i), c.arm.limits.lower[i]);
    f("arm.upper." + std::to_string(i), c.arm.limits.upper[i]);
  }
  f("gripper.min_width", c.gripper.min_width);
  f("gripper.max_width", c.gripper.max_width);
  f("gripper.jaw_length", c.gripper.jaw_length);
  f("gripper.slip_tolerance", c.gripper.slip_tolerance);
  f("gripper.floor_clearance", c.gripper.floor_clearance);
  f("gripper.compliance_tolerance", c.gripper.compliance_tolerance);
  for (std::size_t i = 0; i < 9; ++i) f("camera.rotation." + std::to_string(i), c.camera_pose.rotation.m[i]);
  f("camera.translation.x", c.camera_pose.translation.x);
  f("camera.translation.y", c.camera_pose.translation.y);
  f("camera.translation.z", c.camera_pose.translation.z);
  f("camera.fx", c.intrinsics.fx);
  f("camera.fy", c.intrinsics.fy);
  f("camera.cx", c.intrinsics.cx);
  f("camera.cy", c.intrinsics.cy);
  f("camera.width", c.intrinsics.width);
  f("camera.height", c.intrinsics.height);
  f("camera.depth_noise", c.depth_noise);
  f("control.alpha", c.control.distortion.alpha);
  f("control.beta", c.control.distortion.beta);
  f("control.sigma_xy", c.control.sigma_xy);
  f("control.sigma_z", c.control.sigma_z);
  f("noise_model.alpha", c.noise_model.alpha);
  f("noise_model.beta", c.noise_model.beta);
  f("noise_model.residual", c.noise_model.residual);
  for (std::size_t i = 0; i < 12; ++i) f("calibration.c." + std::to_string(i), c.calibration.c[i]);
  f("calibration.residual_rms", c.calibration.residual_rms);
  f("perception.eps", c.perception.eps);
  f("perception.min_pts", c.perception.min_pts);
  f("perception.floor_margin", c.perception.floor_margin);
  f("planner.candidates_per_cluster", c.candidates_per_cluster);
  f("scatter.sigma", c.scatter.sigma);
  f("scatter.max_iterations", c.scatter.max_iterations);
  f("scatter.max_penetration", c.scatter.max_penetration);
  f("scatter.settle_tolerance", c.scatter.settle_tolerance);
  f("scatter.separation_gap", c.scatter.separation_gap);
  f("scatter.sweep_sigma", c.scatter.sweep_sigma);
  f("episode.objects", c.episode.objects);
  f("episode.max_attempts", c.episode.max_attempts);
  f("episode.sweep_after", c.episode.sweep_after);
}

namespace detail {

template <class T>
std::string format_number(T v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end)
    throw ConfigError("benchmark", "config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string cell_config_to_string(const CellConfig& c) {
  std::ostringstream os;
  os << "# replab cell configuration (lengths in cm, angles in rad)\n";
  visit_cell_fields(c, [&](const std::string& key, const auto& v) { os << key << " = " << detail::format_number(v) << "\n"; });
  return os.str();
}

/// Parses a config. Missing keys keep their defaults; unknown keys are errors.
inline CellConfig cell_config_from_string(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("benchmark", "config line " + std::to_string(lineno) + ": expected 'key = value'");
    kv[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  CellConfig c;
  visit_cell_fields(c, [&](const std::string& key, auto& v) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    v = detail::parse_number<std::remove_reference_t<decltype(v)>>(key, it->second);
    kv.erase(it);
  });
  if (!kv.empty()) throw ConfigError("benchmark", "unknown config key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

inline void save_cell_config(const CellConfig& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("benchmark", "cannot write config '" + path + "'");
  os << cell_config_to_string(c);
  if (!os) throw IoError("benchmark", "failed writing config '" + path + "'");
}

inline CellConfig load_cell_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("benchmark", "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return cell_config_from_string(ss.str());
}

// ---------------------------------------------------------------------------
// Cell calibration procedures

struct CalibrationRun {
  CalibrationModel model;
  NoiseModel noise;
  double heldout_error = 0.0;  // calibration_error on fresh pairs [cm]
};

/// Calibrates the camera from `pairs` simulated correspondences, evaluates on
/// 25 held-out ones, and fits the control distortion on the 5x5 grid.
inline CalibrationRun calibrate_cell(const CellConfig& cell, Seed seed, int pairs = 40,
                                     const CorrespondenceNoise& noise = {}) {
  const auto fit = simulate_correspondences(cell.camera_pose, cell.intrinsics, pairs, noise,
                                            seed.stream("calibrate/fit"), cell.workspace);
  const auto held = simulate_correspondences(cell.camera_pose, cell.intrinsics, 25, noise,
                                             seed.stream("calibrate/eval"), cell.workspace);
  CalibrationRun r;
  r.model = solve_calibration(fit);
  r.heldout_error = calibration_error(r.model, held);
  r.noise = measure_noise_model(cell.arm, cell.control, seed.stream("calibrate/noise"), cell.workspace);
  return r;
}

/// Default cell with its camera calibrated and its controller measured.
inline CellConfig make_default_cell(Seed seed = Seed{1}, double alpha = 0.87, int cell_id = 1) {
  CellConfig c;
  c.cell_id = cell_id;
  c.control.distortion.alpha = alpha;
  const CalibrationRun r = calibrate_cell(c, seed);
  c.calibration = r.model;
  c.noise_model = r.noise;
  c.validate();
  return c;
}

}  // namespace replab
