#pragma once

// Grasp planners. All of them see the clustered point cloud; the learned ones
// also see the depth image, and the oracle sees the true scene.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "replab/geometry.hpp"
#include "replab/grasp.hpp"
#include "replab/perception.hpp"
#include "replab/scene.hpp"
#include "replab/scorer.hpp"

namespace replab {

struct GraspCandidate {
  GraspPose pose;
  int cluster_id = 0;
  double score = 0.0;
};

/// Everything a planner may look at for one attempt.
struct PlanContext {
  const Perception& perception;
  const DepthImage& depth;
  const FeatureContext& features;
  const Scene* truth = nullptr;  // ground truth, oracle planners only
  GripperSpec gripper{};
  Workspace workspace{};
  int candidates_per_cluster = 512;
};

/// Per cluster: positions drawn from the cluster's own points, theta uniform.
inline std::vector<GraspCandidate> sample_candidates(std::span<const Cluster> clusters, int n_per_cluster, Seed seed) {
  if (n_per_cluster < 0) throw InvalidArgument("planners", "n_per_cluster must be non-negative");
  Rng rng(seed.stream("planners/candidates"));
  std::vector<GraspCandidate> out;
  out.reserve(clusters.size() * static_cast<std::size_t>(n_per_cluster));
  for (const auto& c : clusters) {
    if (c.points.empty()) continue;
    for (int i = 0; i < n_per_cluster; ++i) {
      const Vec3 p = c.points[rng.index(c.points.size())];
      out.push_back({GraspPose::at(p, rng.uniform(0.0, kPi)), c.id, 0.0});
    }
  }
  return out;
}

struct RandomRegion {
  double dx = 2.0, dy = 2.0, dz = 1.0;  // half-sizes of the uniform perturbation box [cm]
};

inline GraspPose plan_random_xyztheta(std::span<const ClusterStats> clusters, Seed seed, const RandomRegion& region = {}) {
  if (clusters.empty()) throw NoTargetError("planners", "no clusters to grasp");
  Rng rng(seed.stream("planners/random"));
  const ClusterStats& c = clusters[rng.index(clusters.size())];
  const double theta = rng.uniform(0.0, kPi);
  auto offset = [&](double h) { return h > 0.0 ? rng.uniform(-h, h) : 0.0; };
  const double ox = offset(region.dx), oy = offset(region.dy), oz = offset(region.dz);
  return GraspPose::at(c.center + Vec3{ox, oy, oz}, theta);
}

inline GraspPose plan_random_theta(std::span<const ClusterStats> clusters, Seed seed) {
  return plan_random_xyztheta(clusters, seed, {0.0, 0.0, 0.0});
}

/// Among the five most elongated clusters, pick one uniformly and close the
/// jaws across its major axis at the centroid.
inline GraspPose plan_principal_axis(std::span<const ClusterStats> clusters, Seed seed, std::size_t top = 5) {
  if (clusters.empty()) throw NoTargetError("planners", "no clusters to grasp");
  std::vector<std::size_t> order(clusters.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return clusters[a].confidence > clusters[b].confidence; });
  Rng rng(seed.stream("planners/principal-axis"));
  const ClusterStats& c = clusters[order[rng.index(std::min(top, order.size()))]];
  const double axis = std::atan2(c.major_axis.y, c.major_axis.x);
  return GraspPose::at(c.center, axis + 0.5 * kPi);
}

/// Scores all candidates and picks uniformly among the five best. Ties keep
/// the sampling order.
inline GraspPose select_top(std::vector<GraspCandidate> candidates, Seed seed, std::size_t top = 5) {
  if (candidates.empty()) throw NoTargetError("planners", "no grasp candidates");
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const GraspCandidate& a, const GraspCandidate& b) { return a.score > b.score; });
  Rng rng(seed.stream("planners/top5"));
  return candidates[rng.index(std::min(top, candidates.size()))].pose;
}

using CandidateScorer = std::function<double(const GraspCandidate&)>;

inline GraspPose plan_learned(const PlanContext& ctx, const CandidateScorer& scorer, Seed seed) {
  std::vector<GraspCandidate> cands = sample_candidates(ctx.perception.clusters, ctx.candidates_per_cluster, seed);
  for (auto& c : cands) c.score = scorer(c);
  return select_top(std::move(cands), seed);
}

/// Learned-model scorer. Candidates outside the camera view score zero.
inline CandidateScorer model_scorer(const ScorerModel& model, const PlanContext& ctx) {
  auto thumb = std::make_shared<std::vector<float>>();
  if (model.kind == ScorerKind::full) *thumb = thumbnail_features(ctx.depth, ctx.features);
  return [&model, &ctx, thumb](const GraspCandidate& c) {
    try {
      if (model.kind == ScorerKind::cropped) return model.score(crop_features(ctx.depth, ctx.features, c.pose.position()), c.pose.theta);
      return model.score(full_features(*thumb, c.pose), c.pose.theta);
    } catch (const OutOfViewError&) {
      return 0.0;
    }
  };
}

inline GraspPose plan_learned(const PlanContext& ctx, const ScorerModel& model, Seed seed) {
  return plan_learned(ctx, model_scorer(model, ctx), seed);
}

/// Ground-truth scorer: 1 when the grasp succeeds on the true scene.
inline CandidateScorer truth_scorer(const PlanContext& ctx) {
  if (!ctx.truth) throw InvalidArgument("planners", "truth scorer requires the ground-truth scene");
  return [&ctx](const GraspCandidate& c) {
    return analyze_grasp(*ctx.truth, c.pose, ctx.gripper).outcome.success ? 1.0 : 0.0;
  };
}

/// Fraction of successful grasps over a 3x3 grid of horizontal offsets
/// around `g` (zero when `g` itself fails).
inline double robust_grasp_score(const Scene& scene, const GraspPose& g, const GripperSpec& gripper,
                                 double spread = 0.5) {
  if (!analyze_grasp(scene, g, gripper).outcome.success) return 0.0;
  int ok = 0;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) {
      GraspPose p = g;
      p.x += i * spread;
      p.y += j * spread;
      ok += analyze_grasp(scene, p, gripper).outcome.success;
    }
  return ok / 9.0;
}

/// Upper-bound planner with access to the true scene: tries grasps at every
/// part center over 18 angles and two heights, and takes the most robust.
inline GraspPose plan_oracle(const Scene& truth, const GripperSpec& gripper, Seed seed) {
  if (truth.empty()) throw NoTargetError("planners", "oracle: scene is empty");
  std::optional<GraspPose> best;
  double best_score = -1.0;
  for (const auto& obj : truth.objects)
    for (const auto& part : obj.placed()) {
      const double heights[2] = {part.top(), part.center_height() + 0.5 * gripper.jaw_length};
      for (double z : heights)
        for (int k = 0; k < 18; ++k) {
          const GraspPose g{part.center().x, part.center().y, truth.floor_z + std::max(z, gripper.floor_clearance + 0.2),
                            k * kPi / 18.0};
          const double s = robust_grasp_score(truth, g, gripper);
          if (s > best_score) {
            best_score = s;
            best = g;
          }
        }
    }
  if (best_score <= 0.0) {
    // Nothing is cleanly graspable; fall back to a random part.
    Rng rng(seed.stream("planners/oracle"));
    const auto& obj = truth.objects[rng.index(truth.objects.size())];
    const auto part = obj.placed().front();
    return GraspPose::at({part.center().x, part.center().y, truth.floor_z + part.top()}, rng.uniform(0.0, kPi));
  }
  return *best;
}

/// Baseline that never picks anything: jaws close above an empty corner.
inline GraspPose plan_null(const Workspace& ws) {
  return {ws.half_x() - 3.0, ws.half_y() - 3.0, 10.0, 0.0};
}

// ---------------------------------------------------------------------------
// Planner selection by name

enum class PlannerKind { null_corner, random_xyztheta, random_theta, principal_axis, cropped, full, oracle };

inline std::string_view to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::null_corner: return "null";
    case PlannerKind::random_xyztheta: return "random-xyztheta";
    case PlannerKind::random_theta: return "random-theta";
    case PlannerKind::principal_axis: return "principal-axis";
    case PlannerKind::cropped: return "cropped";
    case PlannerKind::full: return "full";
    case PlannerKind::oracle: return "oracle";
  }
  return "?";
}

inline PlannerKind planner_from_string(std::string_view s) {
  for (auto k : {PlannerKind::null_corner, PlannerKind::random_xyztheta, PlannerKind::random_theta,
                 PlannerKind::principal_axis, PlannerKind::cropped, PlannerKind::full, PlannerKind::oracle})
    if (to_string(k) == s) return k;
  throw InvalidArgument("planners", "unknown planner '" + std::string(s) + "'");
}

struct Planner {
  PlannerKind kind = PlannerKind::random_xyztheta;
  std::shared_ptr<const ScorerModel> model;  // learned kinds only
  RandomRegion region{};

  static Planner make(PlannerKind k, std::shared_ptr<const ScorerModel> m = nullptr) {
    if ((k == PlannerKind::cropped || k == PlannerKind::full) && !m)
      throw InvalidArgument("planners", std::string(to_string(k)) + " planner needs a trained model");
    if (m && ((k == PlannerKind::cropped) != (m->kind == ScorerKind::cropped)))
      throw InvalidArgument("planners", "model kind does not match the planner");
    return {k, std::move(m), {}};
  }

  std::string name() const { return std::string(to_string(kind)); }
  bool uses_truth() const { return kind == PlannerKind::oracle; }

  GraspPose plan(const PlanContext& ctx, Seed seed) const {
    switch (kind) {
      case PlannerKind::null_corner: return plan_null(ctx.workspace);
      case PlannerKind::random_xyztheta: return plan_random_xyztheta(ctx.perception.stats, seed, region);
      case PlannerKind::random_theta: return plan_random_theta(ctx.perception.stats, seed);
      case PlannerKind::principal_axis: return plan_principal_axis(ctx.perception.stats, seed);
      case PlannerKind::cropped:
      case PlannerKind::full: return plan_learned(ctx, *model, seed);
      case PlannerKind::oracle:
        if (!ctx.truth) throw InvalidArgument("planners", "oracle planner needs the true scene");
        return plan_oracle(*ctx.truth, ctx.gripper, seed);
    }
    throw InvalidArgument("planners", "unhandled planner kind");
  }
};

}  // namespace replab
