#pragma once

// Grasp execution through the noisy controller, the random-grasp collection
// loop, bin-clearing episodes and their CSR metric.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "replab/arm.hpp"
#include "replab/calibration.hpp"
#include "replab/camera.hpp"
#include "replab/cell_config.hpp"
#include "replab/perception.hpp"
#include "replab/planners.hpp"
#include "replab/scene.hpp"
#include "replab/scorer.hpp"

namespace replab {

/// The fixed object set a cell is evaluated on (and, for the seen profile,
/// trained on).
inline std::vector<ObjectShape> evaluation_objects(const CellConfig& cell, ObjectProfile profile) {
  return generate_object_set(profile, cell.episode.objects, Seed{cell.object_set_seed}, cell.gripper);
}

struct Execution {
  GraspPose intended;
  GraspPose achieved;
  GraspOutcome outcome;
  bool reachable = true;
};

/// Runs an intended grasp on the real cell: compensate for the fitted
/// controller distortion, move with the true (noisy) controller, close.
inline std::pair<Execution, Scene> execute_planned(const CellConfig& cell, const Scene& scene, const GraspPose& intended,
                                                   Seed seed) {
  Execution e;
  e.intended = intended;
  const Vec3 command = compensate(cell.noise_model, intended.position());
  Vec3 reached;
  try {
    reached = command_position(cell.arm, cell.control, command, intended.theta, seed);
  } catch (const ReachabilityError&) {
    e.reachable = false;
    e.achieved = intended;
    e.outcome = {false, std::nullopt, FailureReason::collision};
    return {e, scene};
  }
  e.achieved = GraspPose::at(reached, intended.theta);
  auto [outcome, next] = execute_grasp(scene, e.achieved, cell.gripper);
  e.outcome = outcome;
  return {e, std::move(next)};
}

/// One observation of the cell: render, then cluster.
struct Observation {
  RenderResult frame;
  Perception perception;
};

inline Observation observe(const CellConfig& cell, const Scene& scene, Seed seed) {
  Observation o;
  o.frame = render(scene, cell.camera_pose, cell.intrinsics, seed, cell.render_options());
  o.perception = perceive(o.frame.cloud, cell.calibration, cell.floor_z, cell.workspace, cell.perception);
  return o;
}

// ---------------------------------------------------------------------------
// Episodes

struct AttemptRecord {
  int index = 0;
  GraspPose pose;       // as planned
  GraspPose achieved;   // where the jaws actually closed
  GraspOutcome outcome;
  int remaining = 0;    // objects left after the attempt
  int clusters = 0;
  bool clustering_failed = false;
  bool sweep = false;   // a sweep followed this attempt
  friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

struct EpisodeLog {
  std::string planner;
  ObjectProfile profile = ObjectProfile::seen;
  Seed seed;
  Scene initial;
  int initial_objects = 0;
  std::vector<AttemptRecord> attempts;
  int sweep_after = 10;
};

struct CsrCurve {
  std::vector<int> counts;
  int final_value() const { return counts.empty() ? 0 : counts.back(); }
  friend bool operator==(const CsrCurve&, const CsrCurve&) = default;
};

inline EpisodeLog run_episode(const CellConfig& cell, const Planner& planner, std::span<const ObjectShape> shapes,
                              ObjectProfile profile, Seed seed) {
  EpisodeLog log;
  log.planner = planner.name();
  log.profile = profile;
  log.seed = seed;
  log.sweep_after = cell.episode.sweep_after;
  Scene scene = scatter_with_retry(shapes, seed.stream("episode/scatter"), cell.scatter, cell.workspace);
  scene.floor_z = cell.floor_z;
  log.initial = scene;
  log.initial_objects = static_cast<int>(scene.size());
  const FeatureContext features(cell.calibration, cell.intrinsics, cell.floor_z);

  int consecutive_failures = 0;
  for (int a = 0; a < cell.episode.max_attempts && !scene.empty(); ++a) {
    const auto i = static_cast<std::uint64_t>(a);
    AttemptRecord rec;
    rec.index = a;
    const Observation obs = observe(cell, scene, seed.stream("episode/render").child(i));
    rec.clusters = static_cast<int>(obs.perception.clusters.size());
    rec.clustering_failed = clustering_failed(obs.perception.clusters.size(), scene.size());
    bool success = false;
    if (rec.clustering_failed) {
      rec.outcome = {false, std::nullopt, FailureReason::empty_jaws};
    } else {
      const PlanContext ctx{obs.perception, obs.frame.depth, features, &scene, cell.gripper, cell.workspace,
                            cell.candidates_per_cluster};
      GraspPose g;
      try {
        g = planner.plan(ctx, seed.stream("episode/plan").child(i));
      } catch (const NoTargetError&) {
        g = plan_null(cell.workspace);
      }
      auto [exec, next] = execute_planned(cell, scene, g, seed.stream("episode/control").child(i));
      rec.pose = exec.intended;
      rec.achieved = exec.achieved;
      rec.outcome = exec.outcome;
      success = exec.outcome.success;
      scene = std::move(next);
    }
    consecutive_failures = success ? 0 : consecutive_failures + 1;
    if (!scene.empty() && (rec.clustering_failed || consecutive_failures >= cell.episode.sweep_after)) {
      rec.sweep = true;
      consecutive_failures = 0;
      scene = sweep(scene, seed.stream("episode/sweep").child(i), cell.scatter);
    }
    rec.remaining = static_cast<int>(scene.size());
    log.attempts.push_back(rec);
  }
  return log;
}

inline CsrCurve csr(const EpisodeLog& log) {
  CsrCurve c;
  int total = 0;
  for (const auto& a : log.attempts) {
    total += a.outcome.success ? 1 : 0;
    c.counts.push_back(total);
  }
  return c;
}

struct AggregateCsr {
  std::vector<double> mean;
  std::vector<CsrCurve> runs;  // padded to the common length
};

/// Pointwise mean of curves padded by their final value to `length`.
inline AggregateCsr aggregate_runs(std::span<const CsrCurve> curves, std::size_t length = 60) {
  if (curves.empty()) throw DegenerateInput("benchmark", "aggregate_runs needs at least one curve");
  for (const auto& c : curves) length = std::max(length, c.counts.size());
  AggregateCsr out;
  out.mean.assign(length, 0.0);
  for (const auto& c : curves) {
    CsrCurve p = c;
    p.counts.resize(length, c.final_value());
    for (std::size_t i = 0; i < length; ++i) out.mean[i] += p.counts[i];
    out.runs.push_back(std::move(p));
  }
  for (double& v : out.mean) v /= static_cast<double>(curves.size());
  return out;
}

/// Problems found in a log, empty when all protocol invariants hold.
inline std::vector<std::string> check_episode_invariants(const EpisodeLog& log, int max_attempts = 60) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& s) { bad.push_back(s); };
  if (static_cast<int>(log.attempts.size()) > max_attempts) fail("more than " + std::to_string(max_attempts) + " attempts");
  int prev_remaining = log.initial_objects, consecutive = 0, successes = 0;
  for (std::size_t i = 0; i < log.attempts.size(); ++i) {
    const auto& a = log.attempts[i];
    const std::string at = " at attempt " + std::to_string(i);
    if (a.remaining > prev_remaining) fail("remaining count increased" + at);
    if (a.outcome.success && a.remaining != prev_remaining - 1) fail("success did not remove exactly one object" + at);
    if (!a.outcome.success && a.remaining != prev_remaining) fail("failure changed the object count" + at);
    if (a.outcome.success && a.outcome.failure_reason != FailureReason::none) fail("success with a failure reason" + at);
    if (a.pose.theta < 0.0 || a.pose.theta >= kPi) fail("theta outside [0, pi)" + at);
    successes += a.outcome.success;
    consecutive = a.outcome.success ? 0 : consecutive + 1;
    if (a.sweep) {
      if (!a.clustering_failed && consecutive < log.sweep_after) fail("sweep without a trigger" + at);
      consecutive = 0;
    } else if (a.remaining > 0 && (a.clustering_failed || consecutive >= log.sweep_after)) {
      fail("missing sweep" + at);
    }
    if (a.remaining == 0 && i + 1 != log.attempts.size()) fail("episode continued on an empty scene" + at);
    prev_remaining = a.remaining;
  }
  if (static_cast<int>(log.attempts.size()) < max_attempts && prev_remaining != 0 && !log.attempts.empty())
    fail("episode stopped early with objects left");
  const CsrCurve c = csr(log);
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    const int step = c.counts[i] - (i ? c.counts[i - 1] : 0);
    if (step != 0 && step != 1) fail("CSR step not in {0, 1}");
  }
  if (c.final_value() > log.initial_objects || c.final_value() > 20) fail("CSR exceeds the object count");
  if (c.final_value() != log.initial_objects - prev_remaining) fail("CSR disagrees with removed objects");
  (void)successes;
  return bad;
}

// ---------------------------------------------------------------------------
// Random-grasp data collection

struct ClusterSummary {
  Vec3 center;
  Sym2 corr2;
  std::uint32_t points = 0;
  friend bool operator==(const ClusterSummary&, const ClusterSummary&) = default;
};

struct GraspRecord {
  std::uint64_t ordinal = 0;  // position in the collection stream; also the blob key
  std::int32_t cell_id = 1;
  std::uint64_t seed = 0;     // seed of the attempt
  GraspPose pose;             // as planned (robot frame)
  GraspPose achieved;
  std::uint8_t label = 0;
  FailureReason reason = FailureReason::none;
  ClusterSummary cluster;
  friend bool operator==(const GraspRecord&, const GraspRecord&) = default;
};

/// Records plus the image excerpts needed to train both scorer kinds: the
/// cropped patch at the planned grasp and the whole-image thumbnail.
struct GraspDataset {
  FeatureSpec spec{};
  std::vector<GraspRecord> records;
  std::vector<std::vector<float>> patches;
  std::vector<std::vector<float>> thumbnails;

  std::size_t size() const { return records.size(); }
  double success_fraction() const {
    if (records.empty()) return 0.0;
    std::size_t s = 0;
    for (const auto& r : records) s += r.label;
    return static_cast<double>(s) / static_cast<double>(records.size());
  }
  friend bool operator==(const GraspDataset&, const GraspDataset&) = default;
};

struct CollectOptions {
  int reset_every = 20;     // re-scatter after this many attempts
  int min_objects = 3;      // re-scatter when fewer objects remain
  bool keep_scenes = false; // keep the pre-attempt scene of each record (for replay checks)
};

struct Collection {
  GraspDataset data;
  std::vector<Scene> scenes;  // filled when keep_scenes
};

inline Collection collect_random_grasps(const CellConfig& cell, int n, Seed seed, const CollectOptions& opts = {}) {
  if (n < 1) throw InvalidArgument("benchmark", "collect_random_grasps: n must be >= 1");
  const std::vector<ObjectShape> shapes = evaluation_objects(cell, ObjectProfile::seen);
  const FeatureContext features(cell.calibration, cell.intrinsics, cell.floor_z);
  Collection out;
  out.data.spec = features.spec;
  Scene scene;
  int since_reset = opts.reset_every;
  std::uint64_t resets = 0, attempt = 0;
  while (static_cast<int>(out.data.size()) < n) {
    if (since_reset >= opts.reset_every || static_cast<int>(scene.size()) < opts.min_objects) {
      scene = scatter_with_retry(shapes, seed.stream("collect/scatter").child(resets++), cell.scatter, cell.workspace);
      scene.floor_z = cell.floor_z;
      since_reset = 0;
    }
    const Seed s = seed.stream("collect/attempt").child(attempt++);
    const Observation obs = observe(cell, scene, s.stream("render"));
    if (obs.perception.clusters.empty()) {
      since_reset = opts.reset_every;
      continue;
    }
    ++since_reset;
    const GraspPose g = plan_random_xyztheta(obs.perception.stats, s.stream("plan"));
    std::vector<float> patch;
    try {
      patch = crop_features(obs.frame.depth, features, g.position());
    } catch (const OutOfViewError&) {
      continue;
    }
    // The chosen cluster is the one whose center the pose was drawn around.
    std::size_t ci = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < obs.perception.stats.size(); ++k) {
      const double d = (obs.perception.stats[k].center.xy() - Vec2{g.x, g.y}).norm();
      if (d < best) {
        best = d;
        ci = k;
      }
    }
    auto [exec, next] = execute_planned(cell, scene, g, s.stream("control"));
    GraspRecord r;
    r.ordinal = out.data.size();
    r.cell_id = cell.cell_id;
    r.seed = s.value;
    r.pose = g;
    r.achieved = exec.achieved;
    r.label = exec.outcome.success ? 1 : 0;
    r.reason = exec.outcome.failure_reason;
    const auto& st = obs.perception.stats[ci];
    r.cluster = {st.center, st.corr2, static_cast<std::uint32_t>(obs.perception.clusters[ci].points.size())};
    if (opts.keep_scenes) out.scenes.push_back(scene);
    out.data.records.push_back(r);
    out.data.patches.push_back(std::move(patch));
    out.data.thumbnails.push_back(thumbnail_features(obs.frame.depth, features));
    scene = std::move(next);
  }
  return out;
}

/// Training examples of one scorer kind from a dataset.
inline std::vector<LabeledExample> examples_from(const GraspDataset& d, ScorerKind kind) {
  std::vector<LabeledExample> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    LabeledExample e;
    e.features = kind == ScorerKind::cropped ? d.patches[i] : full_features(d.thumbnails[i], d.records[i].pose);
    e.theta_bin = d.spec.bin_of(d.records[i].pose.theta);
    e.label = d.records[i].label;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace replab
