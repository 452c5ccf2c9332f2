#pragma once

// Cross-cell reproducibility and training-data ablation.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "replab/benchmark.hpp"

namespace replab {

/// Camera moved by `shift_cm` in a random horizontal direction and tilted by
/// `tilt_rad` about a random horizontal axis through the camera center.
inline RigidTransform perturb_camera(const RigidTransform& pose, double shift_cm, double tilt_rad, Seed seed) {
  Rng rng(seed.stream("experiments/perturb"));
  const double a = rng.uniform(0.0, 2.0 * kPi), b = rng.uniform(0.0, 2.0 * kPi);
  const Mat3 tilt = rotation_from_vector(Vec3{std::cos(b), std::sin(b), 0.0} * tilt_rad);
  return {tilt * pose.rotation, pose.translation + Vec3{std::cos(a), std::sin(a), 0.0} * shift_cm};
}

struct AlignedCell {
  CellConfig cell;
  RigidTransform perturbed;  // camera pose before alignment
  AlignmentResult alignment;
};

/// Builds a second cell from `a`: its camera starts perturbed, is aligned
/// against `a`'s view of the fixture, and then reuses `a`'s calibration.
/// The arm has its own distortion and its own fitted noise model.
inline AlignedCell build_aligned_cell(const CellConfig& a, Seed seed, double shift_cm = 1.0,
                                      double tilt_rad = deg_to_rad(2.0), double alpha = 0.95,
                                      const AlignmentOptions& opts = {}) {
  Scene fixture = alignment_reference_scene();
  fixture.floor_z = a.floor_z;
  RenderOptions clean = a.render_options();
  clean.depth_noise = 0.0;
  const DepthImage reference = render(fixture, a.camera_pose, a.intrinsics, seed.stream("experiments/fixture"), clean).depth;
  AlignedCell out;
  out.perturbed = perturb_camera(a.camera_pose, shift_cm, tilt_rad, seed);
  out.alignment = align_cell_camera(reference, out.perturbed, fixture, a.intrinsics, opts);
  out.cell = a;
  out.cell.cell_id = a.cell_id + 1;
  out.cell.camera_pose = out.alignment.pose;
  out.cell.calibration = a.calibration;
  out.cell.control.distortion = {alpha, 0.0, 0.0};
  out.cell.noise_model = measure_noise_model(out.cell.arm, out.cell.control, seed.stream("experiments/noise"), out.cell.workspace);
  out.cell.validate();
  return out;
}

/// Error of `calibration` on 25 fresh correspondences seen from `camera`.
inline double heldout_calibration_error(const CalibrationModel& calibration, const RigidTransform& camera,
                                        const CellConfig& cell, Seed seed) {
  const auto pairs = simulate_correspondences(camera, cell.intrinsics, 25, CorrespondenceNoise{}, seed, cell.workspace);
  return calibration_error(calibration, pairs);
}

struct CellRuns {
  std::vector<EpisodeLog> logs;
  AggregateCsr aggregate;
  double mean_final() const { return aggregate.mean.empty() ? 0.0 : aggregate.mean.back(); }
};

inline CellRuns run_cell(const CellConfig& cell, const Planner& planner, std::span<const ObjectShape> shapes,
                         ObjectProfile profile, int runs, Seed seed) {
  if (runs < 1) throw InvalidArgument("benchmark", "runs must be >= 1");
  CellRuns out;
  std::vector<CsrCurve> curves;
  for (int r = 0; r < runs; ++r) {
    out.logs.push_back(run_episode(cell, planner, shapes, profile, seed.child(static_cast<std::uint64_t>(r))));
    curves.push_back(csr(out.logs.back()));
  }
  out.aggregate = aggregate_runs(curves, static_cast<std::size_t>(cell.episode.max_attempts));
  return out;
}

struct ReproducibilityReport {
  double calibration_error_a = 0.0;
  double calibration_error_b = 0.0;          // a's calibration used in b after alignment
  double calibration_error_unaligned = 0.0;  // a's calibration at b's perturbed pose
  CellRuns a;
  CellRuns b;
  double mean_final_difference() const { return a.mean_final() - b.mean_final(); }
};

/// Runs the same planner on both cells with the same episode seeds.
inline ReproducibilityReport reproducibility_experiment(const CellConfig& a, const AlignedCell& b, const Planner& planner,
                                                        std::span<const ObjectShape> shapes, ObjectProfile profile,
                                                        int runs, Seed seed) {
  ReproducibilityReport rep;
  rep.calibration_error_a = heldout_calibration_error(a.calibration, a.camera_pose, a, seed.stream("repro/held-a"));
  rep.calibration_error_b =
      heldout_calibration_error(b.cell.calibration, b.cell.camera_pose, b.cell, seed.stream("repro/held-b"));
  rep.calibration_error_unaligned =
      heldout_calibration_error(a.calibration, b.perturbed, b.cell, seed.stream("repro/held-b"));
  rep.a = run_cell(a, planner, shapes, profile, runs, seed.stream("repro/episodes"));
  rep.b = run_cell(b.cell, planner, shapes, profile, runs, seed.stream("repro/episodes"));
  return rep;
}

// ---------------------------------------------------------------------------
// Data ablation

struct AblationRow {
  std::size_t requested = 0;
  std::size_t used = 0;  // requested, clamped to the data left after the held-out split
  double balanced_accuracy = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::size_t holdout_size = 0;
  double holdout_positive_fraction = 0.0;
};

/// Trains one scorer per subset size on nested prefixes of a shuffled
/// training pool and scores each on one fixed balanced held-out split.
inline AblationResult ablation(std::span<const LabeledExample> data, std::span<const std::size_t> sizes, ScorerKind kind,
                               Seed seed, const TrainConfig& hyper = {}, const FeatureSpec& spec = {}) {
  if (sizes.empty()) throw InvalidArgument("benchmark", "ablation needs at least one subset size");
  if (*std::max_element(sizes.begin(), sizes.end()) > data.size())
    throw InvalidArgument("benchmark", "ablation subset larger than the dataset");
  detail::check_examples(data, kind, spec);
  Rng split_rng(seed.stream("ablation/split"));
  auto [held, pool] = detail::balanced_split(data, hyper.holdout_fraction, split_rng);
  std::shuffle(pool.begin(), pool.end(), split_rng.engine());
  AblationResult out;
  out.holdout_size = held.size();
  std::size_t pos = 0;
  for (std::size_t i : held) pos += data[i].label != 0;
  out.holdout_positive_fraction = held.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(held.size());
  for (std::size_t s : sizes) {
    AblationRow row;
    row.requested = s;
    row.used = std::min(s, pool.size());
    std::vector<std::size_t> train(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(row.used));
    std::sort(train.begin(), train.end());
    Rng rng(seed.stream("ablation/train"));
    const TrainResult r = fit_scorer(data, train, kind, hyper, rng, spec);
    row.balanced_accuracy = balanced_accuracy(r.model, data, held);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace replab
