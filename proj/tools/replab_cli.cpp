// replab: command-line front end for the simulated cell.

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "replab/replab.hpp"

using namespace replab;
namespace fs = std::filesystem;

namespace {

using Options = std::map<std::string, std::string>;

struct Invocation {
  std::string command;
  Options opt;
  std::string config_text;  // config snapshot; read from --config when empty
};

const std::string& need(const Options& o, const std::string& key) {
  auto it = o.find(key);
  if (it == o.end() || it->second.empty()) throw InvalidArgument("cli", "missing required option --" + key);
  return it->second;
}

std::string get(const Options& o, const std::string& key, const std::string& fallback) {
  auto it = o.find(key);
  return it == o.end() || it->second.empty() ? fallback : it->second;
}

template <class T>
T number(const Options& o, const std::string& key, T fallback) {
  auto it = o.find(key);
  if (it == o.end() || it->second.empty()) return fallback;
  return detail::parse_number<T>("--" + key, it->second);
}

CellConfig load_config(Invocation& inv) {
  if (inv.config_text.empty()) inv.config_text = read_text(need(inv.opt, "config"));
  CellConfig c = cell_config_from_string(inv.config_text);
  inv.config_text = cell_config_to_string(c);
  return c;
}

void write_manifest(const Invocation& inv, const fs::path& path, std::vector<std::string> artifacts) {
  RunManifest m;
  m.command = inv.command;
  m.options = inv.opt;
  m.config = inv.config_text;
  m.seed = number<std::uint64_t>(inv.opt, "seed", 1);
  m.artifacts = std::move(artifacts);
  write_text(path, manifest_to_json(m));
}

std::shared_ptr<const ScorerModel> model_for(const Options& o, PlannerKind k) {
  if (k != PlannerKind::cropped && k != PlannerKind::full) return nullptr;
  return std::make_shared<const ScorerModel>(load_scorer(need(o, "model")));
}

// ---------------------------------------------------------------------------

void cmd_init_config(Invocation& inv) {
  const fs::path out = need(inv.opt, "out");
  const CellConfig c = make_default_cell(Seed{number<std::uint64_t>(inv.opt, "seed", 1)},
                                         number<double>(inv.opt, "alpha", 0.87), number<int>(inv.opt, "cell-id", 1));
  write_text(out, cell_config_to_string(c));
  write_manifest(inv, out.string() + ".manifest.json", {out.string()});
  std::printf("wrote %s (calibration residual %.3f cm, alpha %.4f)\n", out.c_str(), c.calibration.residual_rms,
              c.noise_model.alpha);
}

void cmd_calibrate(Invocation& inv) {
  CellConfig c = load_config(inv);
  const fs::path out = need(inv.opt, "out");
  CorrespondenceNoise noise;
  noise.arm_sigma = number<double>(inv.opt, "arm-sigma", noise.arm_sigma);
  const CalibrationRun r =
      calibrate_cell(c, Seed{number<std::uint64_t>(inv.opt, "seed", 1)}, number<int>(inv.opt, "pairs", 40), noise);
  c.calibration = r.model;
  c.noise_model = r.noise;
  c.validate();
  write_text(out, cell_config_to_string(c));
  write_manifest(inv, out.string() + ".manifest.json", {out.string()});
  std::printf("calibration residual %.4f cm, held-out error %.4f cm\n", r.model.residual_rms, r.heldout_error);
  std::printf("noise model alpha %.4f beta %.4f residual %.4f cm\n", r.noise.alpha, r.noise.beta, r.noise.residual);
}

void cmd_collect(Invocation& inv) {
  const CellConfig c = load_config(inv);
  const fs::path out = need(inv.opt, "out");
  const int n = number<int>(inv.opt, "n", 8000);
  const Collection col = collect_random_grasps(c, n, Seed{number<std::uint64_t>(inv.opt, "seed", 1)});
  write_dataset(col.data, out);
  write_manifest(inv, out / "manifest.json",
                 {(out / "index.json").string(), (out / "records.bin").string(), (out / "blobs.bin").string()});
  std::printf("collected %zu grasps, success fraction %.4f\n", col.data.size(), col.data.success_fraction());
}

void cmd_train(Invocation& inv) {
  const GraspDataset d = read_dataset(need(inv.opt, "data"));
  const ScorerKind kind = scorer_kind_from_string(get(inv.opt, "kind", "cropped"));
  const fs::path out = need(inv.opt, "out");
  TrainConfig hyper;
  hyper.epochs = number<int>(inv.opt, "epochs", hyper.epochs);
  hyper.l2 = number<double>(inv.opt, "l2", hyper.l2);
  hyper.learning_rate = number<double>(inv.opt, "lr", hyper.learning_rate);
  const TrainResult r = train_scorer(examples_from(d, kind), kind, hyper,
                                     Seed{number<std::uint64_t>(inv.opt, "seed", 1)}, d.spec);
  save_scorer(r.model, out.string());
  write_manifest(inv, out.string() + ".manifest.json", {out.string()});
  std::printf("trained %s scorer on %zu examples, held-out balanced accuracy %.4f (%zu held out)\n",
              std::string(to_string(kind)).c_str(), r.train_size, r.model.heldout_balanced_accuracy, r.holdout_size);
}

void cmd_eval(Invocation& inv) {
  const CellConfig c = load_config(inv);
  const fs::path out = need(inv.opt, "out");
  const PlannerKind pk = planner_from_string(get(inv.opt, "planner", "principal-axis"));
  const ObjectProfile profile = profile_from_string(get(inv.opt, "profile", "seen"));
  const Planner planner = Planner::make(pk, model_for(inv.opt, pk));
  const auto shapes = evaluation_objects(c, profile);
  const CellRuns runs = run_cell(c, planner, shapes, profile, number<int>(inv.opt, "runs", 3),
                                 Seed{number<std::uint64_t>(inv.opt, "seed", 1)});
  for (const auto& log : runs.logs) {
    const auto bad = check_episode_invariants(log, c.episode.max_attempts);
    if (!bad.empty()) throw Error("benchmark", "episode invariant violated: " + bad.front());
  }
  write_text(out / "csr.csv", csr_csv(runs.aggregate));
  write_text(out / "summary.json", csr_summary_json(planner.name(), profile, runs).dump(2) + "\n");
  write_text(out / "csr.svg", csr_svg({{planner.name(), runs.aggregate}},
                                      planner.name() + " (" + std::string(to_string(profile)) + ")"));
  write_manifest(inv, out / "manifest.json",
                 {(out / "csr.csv").string(), (out / "summary.json").string(), (out / "csr.svg").string()});
  std::printf("%s on %s objects: mean final CSR %.2f over %zu runs\n", planner.name().c_str(),
              std::string(to_string(profile)).c_str(), runs.mean_final(), runs.logs.size());
}

void cmd_reach(Invocation& inv) {
  const CellConfig c = load_config(inv);
  const fs::path out = need(inv.opt, "out");
  CemConfig cfg;
  cfg.epochs = number<int>(inv.opt, "epochs", cfg.epochs);
  cfg.population = number<int>(inv.opt, "population", cfg.population);
  cfg.elites = number<int>(inv.opt, "elites", cfg.elites);
  const ReachTraining t = train_reacher(c.arm, Seed{number<std::uint64_t>(inv.opt, "seed", 1)}, cfg, c.workspace);
  write_text(out, reach_curve_csv(t));
  write_manifest(inv, out.string() + ".manifest.json", {out.string()});
  std::printf("untrained %.3f cm, after %d epochs %.3f cm\n", t.initial, cfg.epochs, t.best_so_far.back());
}

void cmd_repro(Invocation& inv) {
  const CellConfig a = load_config(inv);
  const fs::path out = need(inv.opt, "out");
  const Seed seed{number<std::uint64_t>(inv.opt, "seed", 1)};
  const PlannerKind pk = planner_from_string(get(inv.opt, "planner", "principal-axis"));
  const ObjectProfile profile = profile_from_string(get(inv.opt, "profile", "seen"));
  const Planner planner = Planner::make(pk, model_for(inv.opt, pk));
  const AlignedCell b = build_aligned_cell(a, seed.stream("cli/cell-b"), number<double>(inv.opt, "shift-cm", 1.0),
                                           deg_to_rad(number<double>(inv.opt, "tilt-deg", 2.0)),
                                           number<double>(inv.opt, "alpha-b", 0.95));
  const auto shapes = evaluation_objects(a, profile);
  const ReproducibilityReport rep =
      reproducibility_experiment(a, b, planner, shapes, profile, number<int>(inv.opt, "runs", 3), seed);
  nlohmann::ordered_json j;
  j["planner"] = planner.name();
  j["calibration_error_a_cm"] = rep.calibration_error_a;
  j["calibration_error_b_cm"] = rep.calibration_error_b;
  j["calibration_error_unaligned_cm"] = rep.calibration_error_unaligned;
  j["alignment_discrepancy_cm"] = b.alignment.discrepancy;
  j["alignment_iterations"] = b.alignment.iterations;
  j["cell_a"] = csr_summary_json(planner.name(), profile, rep.a);
  j["cell_b"] = csr_summary_json(planner.name(), profile, rep.b);
  j["mean_final_difference"] = rep.mean_final_difference();
  write_text(out / "repro.json", j.dump(2) + "\n");
  write_text(out / "csr.svg", csr_svg({{"cell A", rep.a.aggregate}, {"cell B", rep.b.aggregate}}, planner.name()));
  write_text(out / "cell_b.cfg", cell_config_to_string(b.cell));
  write_manifest(inv, out / "manifest.json",
                 {(out / "repro.json").string(), (out / "csr.svg").string(), (out / "cell_b.cfg").string()});
  std::printf("calibration error A %.3f, B %.3f, B unaligned %.3f cm; mean final CSR A %.2f B %.2f\n",
              rep.calibration_error_a, rep.calibration_error_b, rep.calibration_error_unaligned, rep.a.mean_final(),
              rep.b.mean_final());
}

void cmd_ablate(Invocation& inv) {
  const GraspDataset d = read_dataset(need(inv.opt, "data"));
  const ScorerKind kind = scorer_kind_from_string(get(inv.opt, "kind", "cropped"));
  const fs::path out = need(inv.opt, "out");
  std::vector<std::size_t> sizes;
  std::stringstream ss(get(inv.opt, "sizes", "500,1000,2000,4000"));
  for (std::string item; std::getline(ss, item, ',');) sizes.push_back(detail::parse_number<std::size_t>("--sizes", item));
  const AblationResult r = ablation(examples_from(d, kind), sizes, kind,
                                    Seed{number<std::uint64_t>(inv.opt, "seed", 1)}, TrainConfig{}, d.spec);
  std::ostringstream csv;
  csv << "requested,used,balanced_accuracy\n";
  for (const auto& row : r.rows) csv << row.requested << "," << row.used << "," << detail::format_number(row.balanced_accuracy) << "\n";
  write_text(out, csv.str());
  write_manifest(inv, out.string() + ".manifest.json", {out.string()});
  for (const auto& row : r.rows) std::printf("%zu grasps: %.4f\n", row.used, row.balanced_accuracy);
}

void dispatch(Invocation& inv) {
  static const std::map<std::string, void (*)(Invocation&)> table = {
      {"init-config", cmd_init_config}, {"calibrate", cmd_calibrate}, {"collect", cmd_collect},
      {"train", cmd_train},             {"eval", cmd_eval},           {"reach", cmd_reach},
      {"repro", cmd_repro},             {"ablate", cmd_ablate}};
  auto it = table.find(inv.command);
  if (it == table.end()) throw InvalidArgument("cli", "unknown command '" + inv.command + "'");
  it->second(inv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"replab: simulated low-cost grasping cell and benchmark"};
  app.require_subcommand(1);
  Options opt;
  auto add = [&](CLI::App* sub, const std::string& name, const std::string& help, bool required = false) {
    auto* o = sub->add_option("--" + name, opt[name], help);
    if (required) o->required();
    return o;
  };
  const std::vector<std::string> planners{"null", "random-xyztheta", "random-theta", "principal-axis",
                                          "cropped", "full", "oracle"};

  auto* init = app.add_subcommand("init-config", "write a calibrated default cell config");
  add(init, "out", "config path", true);
  add(init, "seed", "calibration seed");
  add(init, "alpha", "true controller distortion alpha");
  add(init, "cell-id", "cell id");

  auto* cal = app.add_subcommand("calibrate", "fit the camera calibration and control noise model");
  add(cal, "config", "cell config", true);
  add(cal, "out", "calibrated config path", true);
  add(cal, "seed", "seed");
  add(cal, "pairs", "number of correspondences");
  add(cal, "arm-sigma", "arm position noise of the correspondences [cm]");

  auto* col = app.add_subcommand("collect", "collect random grasps into a dataset");
  add(col, "config", "cell config", true);
  add(col, "out", "dataset directory", true);
  add(col, "n", "number of grasps");
  add(col, "seed", "seed");

  auto* train = app.add_subcommand("train", "train a grasp scorer");
  add(train, "data", "dataset directory", true);
  add(train, "out", "model file", true);
  add(train, "kind", "cropped or full")->check(CLI::IsMember({"cropped", "full"}));
  add(train, "seed", "seed");
  add(train, "epochs", "training epochs");
  add(train, "l2", "L2 weight");
  add(train, "lr", "learning rate");

  auto* eval = app.add_subcommand("eval", "run bin-clearing episodes");
  add(eval, "config", "cell config", true);
  add(eval, "out", "output directory", true);
  add(eval, "planner", "planner")->check(CLI::IsMember(planners));
  add(eval, "profile", "seen or unseen")->check(CLI::IsMember({"seen", "unseen"}));
  add(eval, "runs", "episodes");
  add(eval, "seed", "seed");
  add(eval, "model", "scorer model for cropped/full");

  auto* reach = app.add_subcommand("reach", "train the reaching policy");
  add(reach, "config", "cell config", true);
  add(reach, "out", "learning curve CSV", true);
  add(reach, "epochs", "CEM epochs");
  add(reach, "population", "CEM population");
  add(reach, "elites", "CEM elites");
  add(reach, "seed", "seed");

  auto* repro = app.add_subcommand("repro", "compare a cell with a perturbed and re-aligned copy");
  add(repro, "config", "cell config", true);
  add(repro, "out", "output directory", true);
  add(repro, "planner", "planner")->check(CLI::IsMember(planners));
  add(repro, "profile", "seen or unseen")->check(CLI::IsMember({"seen", "unseen"}));
  add(repro, "runs", "episodes per cell");
  add(repro, "seed", "seed");
  add(repro, "model", "scorer model for cropped/full");
  add(repro, "shift-cm", "camera shift before alignment [cm]");
  add(repro, "tilt-deg", "camera tilt before alignment [deg]");
  add(repro, "alpha-b", "controller distortion of the second cell");

  auto* abl = app.add_subcommand("ablate", "scorer accuracy against training-set size");
  add(abl, "data", "dataset directory", true);
  add(abl, "out", "CSV path", true);
  add(abl, "kind", "cropped or full")->check(CLI::IsMember({"cropped", "full"}));
  add(abl, "sizes", "comma-separated subset sizes");
  add(abl, "seed", "seed");

  std::string manifest_path, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
  rerun->add_option("--manifest", manifest_path, "manifest JSON")->required();
  rerun->add_option("--out", rerun_out, "write outputs here instead of the recorded path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Invocation inv;
    if (rerun->parsed()) {
      const RunManifest m = manifest_from_json(read_text(manifest_path));
      inv.command = m.command;
      inv.opt = m.options;
      inv.config_text = m.config;
      if (!rerun_out.empty()) inv.opt["out"] = rerun_out;
    } else {
      inv.command = app.get_subcommands().front()->get_name();
      for (const auto& [k, v] : opt)
        if (!v.empty()) inv.opt[k] = v;
    }
    dispatch(inv);
    return 0;
  } catch (const Error& e) {
    std::cerr << "replab: error in module '" << e.module() << "': " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "replab: " << e.what() << "\n";
    return 1;
  }
}
