// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "replab/replab.hpp"

using namespace replab;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const CellConfig& cell_a() {
  static const CellConfig c = make_default_cell(Seed{1});
  return c;
}

// 1 -------------------------------------------------------------------------

Outcome calibration_recovery() {
  Rng rng(Seed{101});
  double worst_exact = 0.0;
  for (int t = 0; t < 20; ++t) {
    CalibrationModel truth;
    for (std::size_t i = 0; i < 12; ++i) truth.c[i] = i % 4 == 3 ? rng.uniform(-50, 50) : rng.uniform(-2, 2);
    std::vector<Correspondence> pairs;
    for (int i = 0; i < 40; ++i) {
      const Vec3 cam{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(40, 80)};
      pairs.push_back({cam, truth.apply(cam)});
    }
    const CalibrationModel m = solve_calibration(pairs);
    double err = 0.0;
    for (std::size_t i = 0; i < 12; ++i) err += std::abs(m.c[i] - truth.c[i]);
    worst_exact = std::max({worst_exact, err / 12.0, calibration_error(m, pairs)});
  }

  const RigidTransform pose = default_camera_pose();
  double lo = 1e9, hi = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto fit = simulate_correspondences(pose, {}, 40, {}, Seed{t}.stream("fit"));
    const auto held = simulate_correspondences(pose, {}, 25, {}, Seed{t}.stream("held"));
    const double e = calibration_error(solve_calibration(fit), held);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  return {worst_exact < 1e-9 && lo >= 0.25 && hi <= 1.5,
          fmt("noiseless worst mean error %.2e; noisy held-out error in [%.3f, %.3f] over 20 trials", worst_exact, lo, hi)};
}

// 2 -------------------------------------------------------------------------

Outcome noise_compensation() {
  const ArmModel arm;
  const Workspace ws;
  bool pass = true;
  std::string detail;
  for (double alpha : {0.87, 0.95}) {
    const ControlNoise truth{{alpha, 0.0, 0.0}, 0.4, 0.2};
    Rng rng(Seed{202}.stream(std::to_string(alpha)));
    double floor_sum = 0.0, center_sum = 0.0, raw_sum = 0.0;
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
      const Seed s = Seed{202}.child(static_cast<std::uint64_t>(t));
      const NoiseModel fitted = measure_noise_model(arm, truth, s.stream("fit"));
      const Vec3 target{rng.uniform(-ws.half_x(), ws.half_x()), rng.uniform(-ws.half_y(), ws.half_y()), 1.0};
      const double r = std::sqrt(rng.uniform(0.0, 1.0)) * 10.0, phi = rng.uniform(0.0, 2.0 * kPi);
      const Vec3 near{r * std::cos(phi), r * std::sin(phi), 1.0};
      const double theta = rng.uniform(0.0, kPi);
      floor_sum += distance(command_position(arm, truth, compensate(fitted, target), theta, s.stream("a")), target);
      center_sum += distance(command_position(arm, truth, compensate(fitted, near), theta, s.stream("b")), near);
      raw_sum += distance(command_position(arm, truth, target, theta, s.stream("a")), target);
    }
    const double floor_mean = floor_sum / trials, center_mean = center_sum / trials;
    pass &= floor_mean < 2.0 && center_mean < 1.0;
    detail += fmt("alpha %.2f: floor %.3f cm, center disk %.3f cm (uncompensated %.3f); ", alpha, floor_mean,
                  center_mean, raw_sum / trials);
  }
  return {pass, detail};
}

// 3 -------------------------------------------------------------------------

Outcome collection_band() {
  const double f = collect_random_grasps(cell_a(), 1000, Seed{303}).data.success_fraction();
  return {f >= 0.15 && f <= 0.35, fmt("success fraction %.3f", f)};
}

// 4 -------------------------------------------------------------------------

// Checks made here without the library's own invariant checker.
std::string independent_problem(const EpisodeLog& log, int max_attempts) {
  if (static_cast<int>(log.attempts.size()) > max_attempts) return "too many attempts";
  const CsrCurve c = csr(log);
  if (c.counts.size() != log.attempts.size()) return "CSR length differs from attempt count";
  int prev = 0, failures = 0;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    const int step = c.counts[i] - prev;
    if (step != 0 && step != 1) return "CSR step is not 0 or 1";
    if (c.counts[i] > log.initial_objects) return "CSR exceeds object count";
    if (log.initial_objects - c.counts[i] != log.attempts[i].remaining) return "remaining count inconsistent";
    prev = c.counts[i];
    const auto& a = log.attempts[i];
    failures = a.outcome.success ? 0 : failures + 1;
    const bool trigger = a.remaining > 0 && (a.clustering_failed || failures >= log.sweep_after);
    if (a.sweep != trigger) return fmt("sweep at attempt %d without a trigger", a.index);
    if (a.sweep) failures = 0;
  }
  if (prev < log.initial_objects && static_cast<int>(log.attempts.size()) < max_attempts) return "stopped early";
  return {};
}

Outcome invariant_suite() {
  const std::vector<PlannerKind> kinds{PlannerKind::null_corner, PlannerKind::random_xyztheta, PlannerKind::random_theta,
                                       PlannerKind::principal_axis, PlannerKind::oracle};
  const auto seen = evaluation_objects(cell_a(), ObjectProfile::seen);
  const auto unseen = evaluation_objects(cell_a(), ObjectProfile::unseen);
  Rng rng(Seed{404});
  int bad = 0;
  std::string first;
  for (int e = 0; e < 100; ++e) {
    const PlannerKind k = kinds[rng.index(kinds.size())];
    const bool use_seen = rng.bernoulli(0.5);
    const ObjectProfile profile = use_seen ? ObjectProfile::seen : ObjectProfile::unseen;
    const EpisodeLog log = run_episode(cell_a(), Planner::make(k), use_seen ? seen : unseen, profile, rng.next_seed());
    auto problems = check_episode_invariants(log, cell_a().episode.max_attempts);
    const std::string own = independent_problem(log, cell_a().episode.max_attempts);
    if (!own.empty()) problems.push_back(own);
    if (log.initial_objects != 20) problems.push_back("episode did not start with 20 objects");
    if (!problems.empty()) {
      ++bad;
      if (first.empty()) first = std::string(to_string(k)) + ": " + problems.front();
    }
  }
  return {bad == 0, fmt("%d of 100 episodes violate an invariant%s%s", bad, first.empty() ? "" : "; first: ", first.c_str())};
}

// 5 and 6 -------------------------------------------------------------------

struct BaselineMeans {
  std::map<std::string, double> seen;
  double principal_unseen = 0.0;
  std::shared_ptr<const ScorerModel> cropped;
};

BaselineMeans& baselines() {
  static BaselineMeans b;
  return b;
}

Outcome baseline_ordering() {
  const int seeds = 20;
  const Seed episodes{505};
  auto& b = baselines();
  const Collection col = collect_random_grasps(cell_a(), 8000, Seed{506});
  const TrainResult tr =
      train_scorer(examples_from(col.data, ScorerKind::cropped), ScorerKind::cropped, TrainConfig{}, Seed{507}, col.data.spec);
  b.cropped = std::make_shared<const ScorerModel>(tr.model);

  const auto seen = evaluation_objects(cell_a(), ObjectProfile::seen);
  for (PlannerKind k : {PlannerKind::null_corner, PlannerKind::random_xyztheta, PlannerKind::random_theta,
                        PlannerKind::principal_axis, PlannerKind::cropped}) {
    const Planner p = Planner::make(k, k == PlannerKind::cropped ? b.cropped : nullptr);
    b.seen[p.name()] = run_cell(cell_a(), p, seen, ObjectProfile::seen, seeds, episodes).mean_final();
  }
  const auto unseen = evaluation_objects(cell_a(), ObjectProfile::unseen);
  b.principal_unseen =
      run_cell(cell_a(), Planner::make(PlannerKind::principal_axis), unseen, ObjectProfile::unseen, seeds, episodes).mean_final();

  const auto& s = b.seen;
  const bool pass = s.at("principal-axis") > s.at("random-theta") && s.at("random-theta") > s.at("null") &&
                    s.at("cropped") >= s.at("random-xyztheta") && b.principal_unseen < s.at("principal-axis");
  return {pass, fmt("mean final CSR over %d seeds: principal-axis %.2f, random-theta %.2f, null %.2f, cropped %.2f "
                    "(held-out acc %.3f), random-xyztheta %.2f; principal-axis unseen %.2f",
                    seeds, s.at("principal-axis"), s.at("random-theta"), s.at("null"), s.at("cropped"),
                    tr.model.heldout_balanced_accuracy, s.at("random-xyztheta"), b.principal_unseen)};
}

Outcome clearance() {
  const auto seen = evaluation_objects(cell_a(), ObjectProfile::seen);
  const int seeds = 20;
  const CellRuns oracle = run_cell(cell_a(), Planner::make(PlannerKind::oracle), seen, ObjectProfile::seen, seeds, Seed{606});
  int cleared = 0;
  for (const auto& log : oracle.logs) cleared += csr(log).final_value() == 20;
  const bool oracle_ok = cleared >= static_cast<int>(std::ceil(0.95 * seeds));

  // Best non-oracle planner by the seen-profile means (needs criterion 5 first).
  auto& b = baselines();
  std::string best = "principal-axis";
  for (const auto& [name, mean] : b.seen)
    if (mean > b.seen[best]) best = name;
  const PlannerKind k = planner_from_string(best);
  const Planner p = Planner::make(k, k == PlannerKind::cropped ? b.cropped : nullptr);
  const CellRuns runs = run_cell(cell_a(), p, seen, ObjectProfile::seen, 3, Seed{607});
  int clears = 0;
  std::size_t fastest = 0;
  std::string per_run;
  for (const auto& log : runs.logs) {
    const bool c = csr(log).final_value() == 20;
    per_run += fmt(" %d/%zu", csr(log).final_value(), log.attempts.size());
    if (c && (clears == 0 || log.attempts.size() < fastest)) fastest = log.attempts.size();
    clears += c;
  }
  const bool best_ok = clears >= 1 && fastest > 25;
  return {oracle_ok && best_ok, fmt("oracle cleared %d/%d seeds; best non-oracle %s cleared %d/3 (final/attempts:%s), "
                                    "fastest clearance %zu attempts",
                                    cleared, seeds, best.c_str(), clears, per_run.c_str(), fastest)};
}

// 7 -------------------------------------------------------------------------

Outcome reproducibility() {
  const AlignedCell b = build_aligned_cell(cell_a(), Seed{707}, 1.0, deg_to_rad(2.0));
  const auto seen = evaluation_objects(cell_a(), ObjectProfile::seen);
  const ReproducibilityReport rep =
      reproducibility_experiment(cell_a(), b, Planner::make(PlannerKind::principal_axis), seen, ObjectProfile::seen, 3, Seed{708});
  const double diff = std::abs(rep.mean_final_difference());
  const bool pass = diff <= 2.0 && rep.calibration_error_a < 2.0 && rep.calibration_error_b < 2.0;
  return {pass, fmt("mean final CSR A %.2f, B %.2f (|diff| %.2f); calibration error A %.3f, B %.3f cm "
                    "(B before alignment %.3f); alignment discrepancy %.4f after %d iterations",
                    rep.a.mean_final(), rep.b.mean_final(), diff, rep.calibration_error_a, rep.calibration_error_b,
                    rep.calibration_error_unaligned, b.alignment.discrepancy, b.alignment.iterations)};
}

// 8 -------------------------------------------------------------------------

Outcome reaching() {
  const ArmModel m;
  const ReachTraining t = train_reacher(m, Seed{808});
  const double final_cem = t.best_so_far.back();
  int reached = 0;
  for (int i = 0; i < 200; ++i) {
    ReachEnv env(m, random_reach_task(m, Seed{809}.child(static_cast<std::uint64_t>(i))));
    const auto d =
        rollout(env, [&](const ReachObservation& o, Vec3 target) { return oracle_controller(m, o, target, env.config().dt); });
    reached += d.back() < 1.0;
  }
  return {final_cem < 1.0 && t.best_so_far.size() <= 25 && reached >= 190,
          fmt("CEM %.3f cm after %zu epochs (untrained %.3f cm); oracle reached %d/200", final_cem, t.best_so_far.size(),
              t.initial, reached)};
}

// 9 -------------------------------------------------------------------------

using Partition = std::set<std::set<std::size_t>>;

// O(n^2) DBSCAN: union core points within eps, then attach each border point
// to its nearest core point (lexicographically smallest on ties).
Partition brute_dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int k = 0;
    for (std::size_t j = 0; j < n; ++j) k += (pts[i] - pts[j]).norm() <= eps;
    core[i] = k >= min_pts;
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && (pts[i] - pts[j]).norm() <= eps) parent[find(i)] = find(j);
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      groups[find(i)].insert(i);
      continue;
    }
    std::size_t owner = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!core[j] || (pts[i] - pts[j]).norm() > eps) continue;
      const double dj = (pts[i] - pts[j]).norm();
      if (owner == n || dj < (pts[i] - pts[owner]).norm() ||
          (dj == (pts[i] - pts[owner]).norm() && detail::lex_less(pts[j], pts[owner])))
        owner = j;
    }
    if (owner < n) groups[find(owner)].insert(i);
  }
  Partition out;
  for (auto& [_, g] : groups) out.insert(g);
  return out;
}

Outcome oracle_equivalences() {
  Rng rng(Seed{909});
  int dbscan_bad = 0;
  for (int s = 0; s < 100; ++s) {
    std::vector<Vec3> pts;
    const int blobs = 1 + static_cast<int>(rng.index(5));
    for (int b = 0; b < blobs; ++b) {
      const Vec3 c{rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(1, 4)};
      const double spread = rng.uniform(0.3, 1.2);
      for (int i = 0; i < 30; ++i) pts.push_back(c + Vec3{rng.normal(spread), rng.normal(spread), rng.normal(0.5 * spread)});
    }
    while (pts.size() < 200 && rng.bernoulli(0.9))
      pts.push_back({std::round(rng.uniform(-8, 8)), std::round(rng.uniform(-8, 8)), 1.0});
    pts.resize(std::min<std::size_t>(pts.size(), 200));
    const double eps = rng.uniform(0.8, 1.6);
    const int min_pts = 3 + static_cast<int>(rng.index(5));
    Partition fast;
    for (const auto& c : dbscan(pts, eps, min_pts)) fast.insert(std::set<std::size_t>(c.indices.begin(), c.indices.end()));
    dbscan_bad += fast != brute_dbscan(pts, eps, min_pts);
  }

  double eig_worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Sym2 m{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Eig2 e = eig2_sym(m);
    double r[2][2] = {{0, 0}, {0, 0}};
    for (int k = 0; k < 2; ++k) {
      const double v[2] = {e.vectors[k].x, e.vectors[k].y};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) r[a][b] += e.values[k] * v[a] * v[b];
    }
    eig_worst = std::max({eig_worst, std::abs(r[0][0] - m.xx), std::abs(r[0][1] - m.xy), std::abs(r[1][0] - m.xy),
                          std::abs(r[1][1] - m.yy)});
  }

  const ArmModel arm;
  const Workspace ws;
  double ik_worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 target{rng.uniform(-ws.half_x(), ws.half_x()), rng.uniform(-ws.half_y(), ws.half_y()), rng.uniform(0.3, 8.0)};
    const JointState js = ik_vertical(arm, target, rng.uniform(0, kPi));
    ik_worst = std::max(ik_worst, distance(fk(arm, js).end_effector, target));
  }
  return {dbscan_bad == 0 && eig_worst <= 1e-9 && ik_worst <= 1e-6,
          fmt("DBSCAN mismatches %d/100; eig2 worst reconstruction %.2e; fk(ik) worst %.2e cm", dbscan_bad, eig_worst, ik_worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    Outcome (*run)();
  };
  const std::vector<Criterion> all{
      {1, "calibration recovery", 1.0, calibration_recovery},
      {2, "noise compensation", 10.0, noise_compensation},
      {3, "collection success band", 120.0, collection_band},
      {4, "protocol invariants", 600.0, invariant_suite},
      {5, "baseline ordering", 3600.0, baseline_ordering},
      {6, "clearance", 1200.0, clearance},
      {7, "reproducibility across cells", 1800.0, reproducibility},
      {8, "reaching", 600.0, reaching},
      {9, "oracle equivalences", 60.0, oracle_equivalences},
  };
  int failed = 0;
  (void)cell_a();
  for (const auto& c : all) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double t = seconds_since(t0);
    const bool pass = o.pass && t < c.budget_s;
    failed += !pass;
    std::printf("%s  %d %s: %s [%.1f s, budget %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), t,
                c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
