#pragma once

// Point-reaching environment under joint velocity control, an analytic
// Jacobian-transpose controller, and a cross-entropy-method learner for an
// affine policy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "replab/arm.hpp"
#include "replab/scene.hpp"

namespace replab {

struct ReachObservation {
  JointState joints;
  Vec3 end_effector;
};

using ReachAction = std::array<double, kJointCount>;

struct ReachEpisodeConfig {
  Vec3 target;
  int horizon = 100;
  double dt = 0.05;  // [s]
  JointState initial{};
};

struct ReachStep {
  ReachObservation observation;
  double reward = 0.0;
  bool done = false;
};

class ReachEnv {
public:
  ReachEnv(ArmModel arm, ReachEpisodeConfig config) : arm_(std::move(arm)), config_(config) {
    arm_.validate();
    if (config_.horizon < 1 || !(config_.dt > 0.0)) throw InvalidArgument("reaching", "horizon and dt must be positive");
    if (!reachable(arm_, config_.target)) throw ReachabilityError("reaching", "reach target is outside the envelope");
    if (!arm_.limits.contains(config_.initial)) throw InvalidArgument("reaching", "initial joint state violates limits");
    (void)reset();
  }

  ReachObservation reset() {
    state_ = config_.initial;
    steps_ = 0;
    clamped_ = 0;
    return observe();
  }

  /// Out-of-bound action components are clamped and counted, not rejected.
  ReachStep step(const ReachAction& a) {
    if (done()) throw InvalidArgument("reaching", "step after the episode ended");
    for (double v : a) clamped_ += std::abs(v) > arm_.max_joint_velocity;
    state_ = step_velocity(arm_, state_, a, config_.dt);
    ++steps_;
    ReachStep s;
    s.observation = observe();
    s.reward = -distance(s.observation.end_effector, config_.target);
    s.done = done();
    return s;
  }

  bool done() const { return steps_ >= config_.horizon; }
  int steps() const { return steps_; }
  int clamped_components() const { return clamped_; }
  const ArmModel& arm() const { return arm_; }
  const ReachEpisodeConfig& config() const { return config_; }
  double distance_to_target() const { return distance(fk(arm_, state_).end_effector, config_.target); }

private:
  ReachObservation observe() const { return {state_, fk(arm_, state_).end_effector}; }

  ArmModel arm_;
  ReachEpisodeConfig config_;
  JointState state_{};
  int steps_ = 0;
  int clamped_ = 0;
};

/// Central-difference Jacobian of the end-effector position.
inline Eigen::Matrix<double, 3, kJointCount> position_jacobian(const ArmModel& m, const JointState& js, double h = 1e-6) {
  Eigen::Matrix<double, 3, kJointCount> j;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    JointState a = js, b = js;
    a[i] += h;
    b[i] -= h;
    const Vec3 d = (fk(m, a).end_effector - fk(m, b).end_effector) / (2.0 * h);
    j.col(static_cast<Eigen::Index>(i)) << d.x, d.y, d.z;
  }
  return j;
}

/// Jacobian-transpose step with the adaptive gain that minimizes the linearized
/// error, converted to a velocity and scaled uniformly into the bounds.
inline ReachAction oracle_controller(const ArmModel& m, const ReachObservation& obs, Vec3 target, double dt) {
  ReachAction a{};
  const Vec3 e = target - obs.end_effector;
  if (e.norm() < 1e-9) return a;
  const auto j = position_jacobian(m, obs.joints);
  const Eigen::Vector3d err(e.x, e.y, e.z);
  const Eigen::Matrix<double, kJointCount, 1> dq_dir = j.transpose() * err;
  const Eigen::Vector3d jjte = j * dq_dir;
  if (jjte.squaredNorm() < 1e-18) return a;
  const double gain = err.dot(jjte) / jjte.squaredNorm();
  Eigen::Matrix<double, kJointCount, 1> v = gain * dq_dir / dt;
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak > m.max_joint_velocity) v *= m.max_joint_velocity / peak;
  for (std::size_t i = 0; i < kJointCount; ++i) a[i] = v(static_cast<Eigen::Index>(i));
  return a;
}

/// Runs `policy(obs, target)` for a full episode and returns the distance
/// after every step.
template <class Policy>
std::vector<double> rollout(ReachEnv& env, Policy&& policy) {
  ReachObservation obs = env.reset();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(env.config().horizon));
  while (!env.done()) {
    const ReachStep s = env.step(policy(obs, env.config().target));
    obs = s.observation;
    d.push_back(-s.reward);
  }
  return d;
}

/// A reachable point above the workspace floor with z in [z_lo, z_hi].
inline Vec3 random_reach_point(const ArmModel& m, Rng& rng, const Workspace& ws, double z_lo, double z_hi) {
  for (;;) {
    const Vec3 p{rng.uniform(-ws.half_x(), ws.half_x()), rng.uniform(-ws.half_y(), ws.half_y()), rng.uniform(z_lo, z_hi)};
    if (reachable(m, p)) return p;
  }
}

/// Random reaching task: start at a random gripper-down pose, target a random
/// point 2 to 10 cm above the floor.
inline ReachEpisodeConfig random_reach_task(const ArmModel& m, Seed seed, const Workspace& ws = {}) {
  Rng rng(seed.stream("reaching/task"));
  ReachEpisodeConfig c;
  const Vec3 start = random_reach_point(m, rng, ws, 4.0, 15.0);
  c.initial = ik_vertical(m, start, rng.uniform(0.0, kPi));
  c.target = random_reach_point(m, rng, ws, 2.0, 10.0);
  return c;
}

// ---------------------------------------------------------------------------
// Affine policy trained by the cross-entropy method

inline constexpr std::size_t kReachFeatures = kJointCount + 3;
inline constexpr std::size_t kReachParams = kJointCount * kReachFeatures + kJointCount;

/// Joint angles followed by the position error expressed in the frame of the
/// base yaw (radial, tangential, vertical).
inline std::array<double, kReachFeatures> reach_features(const ReachObservation& obs, Vec3 target) {
  std::array<double, kReachFeatures> f{};
  for (std::size_t i = 0; i < kJointCount; ++i) f[i] = obs.joints[i];
  const Vec3 e = target - obs.end_effector;
  const double c = std::cos(obs.joints[kBaseYaw]), s = std::sin(obs.joints[kBaseYaw]);
  f[kJointCount] = c * e.x + s * e.y;
  f[kJointCount + 1] = -s * e.x + c * e.y;
  f[kJointCount + 2] = e.z;
  return f;
}

/// a = K f + b, with K row-major (joint x feature) followed by b.
struct AffinePolicy {
  std::array<double, kReachParams> params{};

  ReachAction operator()(const ReachObservation& obs, Vec3 target) const {
    const auto f = reach_features(obs, target);
    ReachAction a{};
    for (std::size_t i = 0; i < kJointCount; ++i) {
      double v = params[kJointCount * kReachFeatures + i];
      for (std::size_t j = 0; j < kReachFeatures; ++j) v += params[i * kReachFeatures + j] * f[j];
      a[i] = v;
    }
    return a;
  }
};

struct CemConfig {
  int epochs = 25;
  int population = 64;
  int elites = 10;
  double initial_std = 0.5;
  double extra_std = 0.01;  // added to the refit std so sampling never collapses
  int eval_targets = 10;
  int horizon = 100;
  double dt = 0.05;
};

struct ReachTraining {
  AffinePolicy policy;               // best policy seen
  std::vector<double> best_so_far;   // per epoch: best mean final distance so far [cm]
  std::vector<double> elite_mean;    // per epoch: mean objective of the elites
  double initial = 0.0;              // objective of the untrained (zero) policy
  std::vector<Vec3> targets;
};

/// Fixed evaluation targets and the shared start pose.
inline std::vector<Vec3> reach_eval_targets(const ArmModel& m, int count, Seed seed, const Workspace& ws = {}) {
  Rng rng(seed.stream("reaching/targets"));
  std::vector<Vec3> t;
  for (int i = 0; i < count; ++i) t.push_back(random_reach_point(m, rng, ws, 2.0, 10.0));
  return t;
}

inline JointState reach_home(const ArmModel& m) { return ik_vertical(m, {12.0, 0.0, 15.0}, 0.5 * kPi); }

/// Mean final distance of `policy` over the targets, starting from home.
inline double evaluate_reach_policy(const ArmModel& m, const AffinePolicy& policy, std::span<const Vec3> targets,
                                    int horizon = 100, double dt = 0.05) {
  double sum = 0.0;
  for (const Vec3& t : targets) {
    ReachEnv env(m, {t, horizon, dt, reach_home(m)});
    sum += rollout(env, policy).back();
  }
  return sum / static_cast<double>(targets.size());
}

inline ReachTraining train_reacher(const ArmModel& m, Seed seed, const CemConfig& cfg = {}, const Workspace& ws = {}) {
  if (cfg.epochs < 1) throw InvalidArgument("reaching", "epochs must be >= 1");
  if (cfg.elites < 1 || cfg.elites > cfg.population) throw InvalidArgument("reaching", "need 1 <= elites <= population");
  ReachTraining out;
  out.targets = reach_eval_targets(m, cfg.eval_targets, seed, ws);
  Rng rng(seed.stream("reaching/cem"));
  std::array<double, kReachParams> mean{}, std{};
  std.fill(cfg.initial_std);
  double best = evaluate_reach_policy(m, AffinePolicy{mean}, out.targets, cfg.horizon, cfg.dt);
  out.initial = best;
  out.policy.params = mean;

  std::vector<std::pair<double, std::array<double, kReachParams>>> pop(static_cast<std::size_t>(cfg.population));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& [score, p] : pop) {
      for (std::size_t i = 0; i < kReachParams; ++i) p[i] = mean[i] + rng.normal(std[i]);
      score = evaluate_reach_policy(m, AffinePolicy{p}, out.targets, cfg.horizon, cfg.dt);
    }
    std::stable_sort(pop.begin(), pop.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto ne = static_cast<std::size_t>(cfg.elites);
    double elite = 0.0;
    mean.fill(0.0);
    for (std::size_t e = 0; e < ne; ++e) {
      elite += pop[e].first;
      for (std::size_t i = 0; i < kReachParams; ++i) mean[i] += pop[e].second[i];
    }
    for (double& v : mean) v /= static_cast<double>(ne);
    for (std::size_t i = 0; i < kReachParams; ++i) {
      double var = 0.0;
      for (std::size_t e = 0; e < ne; ++e) var += (pop[e].second[i] - mean[i]) * (pop[e].second[i] - mean[i]);
      std[i] = std::sqrt(var / static_cast<double>(ne)) + cfg.extra_std;
    }
    if (pop.front().first < best) {
      best = pop.front().first;
      out.policy.params = pop.front().second;
    }
    out.elite_mean.push_back(elite / static_cast<double>(ne));
    out.best_so_far.push_back(best);
  }
  return out;
}

}  // namespace replab
