#include <gtest/gtest.h>

#include <filesystem>

#include "replab/dataset.hpp"
#include "replab/experiments.hpp"

using namespace replab;

namespace {

const CellConfig& cell_a() {
  static const CellConfig c = make_default_cell(Seed{1});
  return c;
}

EpisodeLog log_of(std::initializer_list<bool> outcomes, int objects = 20) {
  EpisodeLog log;
  log.initial_objects = objects;
  int remaining = objects;
  int i = 0;
  for (bool s : outcomes) {
    AttemptRecord a;
    a.index = i++;
    a.outcome = s ? GraspOutcome{true, 0, FailureReason::none} : GraspOutcome{};
    remaining -= s;
    a.remaining = remaining;
    log.attempts.push_back(a);
  }
  return log;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Csr, Examples) {
  EXPECT_EQ(csr(log_of({true, false, true})).counts, (std::vector<int>{1, 1, 2}));
  EXPECT_EQ(csr(log_of({false, false})).counts, (std::vector<int>{0, 0}));
  EXPECT_TRUE(csr(log_of({})).counts.empty());
  EXPECT_EQ(csr(log_of({})).final_value(), 0);
}

TEST(Aggregate, PadsWithFinalValue) {
  const std::vector<CsrCurve> curves{{{1, 2}}, {{0, 0, 1}}};
  const AggregateCsr a = aggregate_runs(curves, 3);
  EXPECT_EQ(a.mean, (std::vector<double>{0.5, 1.0, 1.5}));
  EXPECT_EQ(a.runs[0].counts, (std::vector<int>{1, 2, 2}));
  EXPECT_EQ(aggregate_runs(curves, 5).mean.size(), 5u);
  EXPECT_THROW(aggregate_runs(std::vector<CsrCurve>{}), DegenerateInput);
}

TEST(Invariants, DetectBrokenLogs) {
  EpisodeLog good = log_of({true, true}, 2);
  EXPECT_TRUE(check_episode_invariants(good).empty());
  EpisodeLog bad = good;
  bad.attempts[1].remaining = 1;
  EXPECT_FALSE(check_episode_invariants(bad).empty());
  EpisodeLog early = log_of({false, true}, 3);
  EXPECT_FALSE(check_episode_invariants(early).empty());
}

TEST(Episode, ProtocolInvariantsHold) {
  const auto shapes = evaluation_objects(cell_a(), ObjectProfile::seen);
  for (auto kind : {PlannerKind::random_xyztheta, PlannerKind::principal_axis, PlannerKind::oracle})
    for (std::uint64_t s = 0; s < 2; ++s) {
      const EpisodeLog log = run_episode(cell_a(), Planner::make(kind), shapes, ObjectProfile::seen, Seed{s});
      EXPECT_EQ(log.initial_objects, 20);
      EXPECT_LE(log.attempts.size(), 60u);
      const auto problems = check_episode_invariants(log);
      EXPECT_TRUE(problems.empty()) << to_string(kind) << ": " << (problems.empty() ? "" : problems.front());
    }
}

TEST(Episode, NullPlannerNeverScoresAndSweepsEveryTen) {
  const auto shapes = evaluation_objects(cell_a(), ObjectProfile::seen);
  const EpisodeLog log = run_episode(cell_a(), Planner::make(PlannerKind::null_corner), shapes, ObjectProfile::seen, Seed{3});
  ASSERT_EQ(log.attempts.size(), 60u);
  EXPECT_EQ(csr(log).final_value(), 0);
  for (const auto& a : log.attempts) {
    EXPECT_FALSE(a.outcome.success);
    if (!a.clustering_failed) {
      EXPECT_EQ(a.outcome.failure_reason, FailureReason::empty_jaws);
    }
  }
  // Without clustering failures the sweeps land on every tenth attempt.
  bool any_cluster_failure = false;
  for (const auto& a : log.attempts) any_cluster_failure |= a.clustering_failed;
  if (!any_cluster_failure) {
    for (const auto& a : log.attempts) EXPECT_EQ(a.sweep, (a.index + 1) % 10 == 0) << a.index;
  }
  EXPECT_TRUE(check_episode_invariants(log).empty());
}

TEST(Episode, SameSeedSameLog) {
  const auto shapes = evaluation_objects(cell_a(), ObjectProfile::unseen);
  const Planner p = Planner::make(PlannerKind::random_theta);
  const EpisodeLog a = run_episode(cell_a(), p, shapes, ObjectProfile::unseen, Seed{11});
  const EpisodeLog b = run_episode(cell_a(), p, shapes, ObjectProfile::unseen, Seed{11});
  EXPECT_EQ(a.attempts, b.attempts);
  EXPECT_EQ(a.initial, b.initial);
  const EpisodeLog c = run_episode(cell_a(), p, shapes, ObjectProfile::unseen, Seed{12});
  EXPECT_NE(a.initial, c.initial);
}

TEST(Collection, ReplayReproducesEveryLabel) {
  CollectOptions opts;
  opts.keep_scenes = true;
  const Collection c = collect_random_grasps(cell_a(), 200, Seed{4}, opts);
  ASSERT_EQ(c.data.size(), 200u);
  ASSERT_EQ(c.scenes.size(), 200u);
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    const auto& r = c.data.records[i];
    EXPECT_EQ(r.ordinal, i);
    const auto [exec, next] = execute_planned(cell_a(), c.scenes[i], r.pose, Seed{r.seed}.stream("control"));
    EXPECT_EQ(exec.outcome.success, r.label == 1);
    EXPECT_EQ(exec.outcome.failure_reason, r.reason);
    EXPECT_EQ(exec.achieved, r.achieved);
  }
  EXPECT_EQ(collect_random_grasps(cell_a(), 200, Seed{4}).data, c.data);
}

TEST(Collection, SuccessRateOfRandomGrasps) {
  const Collection c = collect_random_grasps(cell_a(), 1000, Seed{5});
  EXPECT_GE(c.data.success_fraction(), 0.15);
  EXPECT_LE(c.data.success_fraction(), 0.35);
}

TEST(Dataset, WriteReadRoundTrip) {
  const Collection c = collect_random_grasps(cell_a(), 100, Seed{6});
  const auto dir = temp_dir("replab_test_dataset");
  write_dataset(c.data, dir);
  EXPECT_EQ(read_dataset(dir), c.data);
  EXPECT_THROW(read_dataset(dir / "missing"), IoError);
  std::filesystem::resize_file(dir / "blobs.bin", 10);
  EXPECT_THROW(read_dataset(dir), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Ablation, ClampsSubsetsAndIsDeterministic) {
  const Collection c = collect_random_grasps(cell_a(), 400, Seed{7});
  const auto ex = examples_from(c.data, ScorerKind::cropped);
  TrainConfig hyper;
  hyper.epochs = 5;
  const std::vector<std::size_t> sizes{100, 250, 400};
  const AblationResult r = ablation(ex, sizes, ScorerKind::cropped, Seed{1}, hyper);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].used, 100u);
  EXPECT_EQ(r.rows[1].used, 250u);
  // The held-out split leaves fewer than 400 rows to train on.
  EXPECT_EQ(r.rows[2].requested, 400u);
  EXPECT_EQ(r.rows[2].used, 400u - r.holdout_size);
  EXPECT_DOUBLE_EQ(r.holdout_positive_fraction, 0.5);
  const AblationResult again = ablation(ex, sizes, ScorerKind::cropped, Seed{1}, hyper);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again.rows[i].balanced_accuracy, r.rows[i].balanced_accuracy);
  const std::vector<std::size_t> too_big{401};
  EXPECT_THROW(ablation(ex, too_big, ScorerKind::cropped, Seed{1}, hyper), InvalidArgument);
}

TEST(Reproducibility, ExactCopyGivesIdenticalResults) {
  const auto shapes = evaluation_objects(cell_a(), ObjectProfile::seen);
  AlignedCell copy{cell_a(), cell_a().camera_pose, {cell_a().camera_pose, 0.0, 0}};
  const ReproducibilityReport rep =
      reproducibility_experiment(cell_a(), copy, Planner::make(PlannerKind::principal_axis), shapes, ObjectProfile::seen, 2, Seed{1});
  EXPECT_EQ(rep.mean_final_difference(), 0.0);
  ASSERT_EQ(rep.a.logs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(rep.a.logs[i].attempts, rep.b.logs[i].attempts);
  // Held-out pairs differ per cell, so only the scale is comparable.
  EXPECT_LT(rep.calibration_error_a, 2.0);
  EXPECT_LT(rep.calibration_error_b, 2.0);
}

TEST(Reproducibility, UnalignedCameraBreaksTheCalibration) {
  const CellConfig& a = cell_a();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const RigidTransform moved = perturb_camera(a.camera_pose, 3.0, 0.0, Seed{s});
    EXPECT_GT(heldout_calibration_error(a.calibration, moved, a, Seed{s}), 2.0);
  }
  const AlignedCell b = build_aligned_cell(a, Seed{2}, 3.0);
  EXPECT_LT(heldout_calibration_error(b.cell.calibration, b.cell.camera_pose, b.cell, Seed{3}), 2.0);
}
