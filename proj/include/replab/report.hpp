#pragma once

// Text outputs: CSR tables and plots, learning curves, run manifests.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "replab/benchmark.hpp"
#include "replab/experiments.hpp"
#include "replab/reaching.hpp"

namespace replab {

inline constexpr const char* kToolVersion = "0.1.0";

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cli", "cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw IoError("cli", "failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cli", "cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// attempt, run_1..run_n, mean. Attempts are 1-based.
inline std::string csr_csv(const AggregateCsr& agg) {
  std::ostringstream os;
  os << "attempt";
  for (std::size_t r = 0; r < agg.runs.size(); ++r) os << ",run_" << r + 1;
  os << ",mean\n";
  for (std::size_t i = 0; i < agg.mean.size(); ++i) {
    os << i + 1;
    for (const auto& c : agg.runs) os << "," << c.counts[i];
    os << "," << detail::format_number(agg.mean[i]) << "\n";
  }
  return os.str();
}

inline nlohmann::ordered_json episode_json(const EpisodeLog& log) {
  nlohmann::ordered_json j;
  j["seed"] = log.seed.value;
  j["initial_objects"] = log.initial_objects;
  j["attempts"] = log.attempts.size();
  int sweeps = 0;
  for (const auto& a : log.attempts) sweeps += a.sweep;
  j["sweeps"] = sweeps;
  j["final_csr"] = csr(log).final_value();
  j["cleared"] = !log.attempts.empty() && log.attempts.back().remaining == 0;
  return j;
}

inline nlohmann::ordered_json csr_summary_json(const std::string& planner, ObjectProfile profile,
                                               const CellRuns& runs) {
  nlohmann::ordered_json j;
  j["planner"] = planner;
  j["profile"] = std::string(to_string(profile));
  j["runs"] = runs.logs.size();
  j["mean_final_csr"] = runs.mean_final();
  auto& eps = j["episodes"] = nlohmann::ordered_json::array();
  for (const auto& l : runs.logs) eps.push_back(episode_json(l));
  return j;
}

struct CsrSeries {
  std::string label;
  AggregateCsr data;
};

/// Cumulative successes against attempts: thin per-run curves, thick means.
inline std::string csr_svg(const std::vector<CsrSeries>& series, const std::string& title) {
  const double w = 480, h = 320, left = 50, right = 20, top = 30, bottom = 40;
  const double xmax = 60, ymax = 20;
  auto X = [&](double a) { return left + a / xmax * (w - left - right); };
  auto Y = [&](double c) { return h - bottom - c / ymax * (h - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  os << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(xmax) << "\" y2=\"" << Y(0) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(0) << "\" y2=\"" << Y(ymax) << "\" stroke=\"black\"/>\n";
  for (int a = 0; a <= 60; a += 10)
    os << "<text x=\"" << X(a) << "\" y=\"" << Y(0) + 14 << "\" text-anchor=\"middle\">" << a << "</text>\n";
  for (int c = 0; c <= 20; c += 5)
    os << "<text x=\"" << X(0) - 6 << "\" y=\"" << Y(c) + 4 << "\" text-anchor=\"end\">" << c << "</text>\n";
  os << "<text x=\"" << X(xmax / 2) << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\">grasp attempts</text>\n";
  os << "<text transform=\"translate(14," << Y(ymax / 2) << ") rotate(-90)\" text-anchor=\"middle\">objects grasped</text>\n";
  auto path = [&](const auto& values, const char* color, double width, double opacity) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" stroke-opacity=\""
       << opacity << "\" points=\"" << X(0) << "," << Y(0);
    for (std::size_t i = 0; i < values.size(); ++i) os << " " << X(static_cast<double>(i + 1)) << "," << Y(values[i]);
    os << "\"/>\n";
  };
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    for (const auto& run : series[s].data.runs) path(run.counts, color, 1.0, 0.5);
    path(series[s].data.mean, color, 3.0, 1.0);
    os << "<text x=\"" << X(2) << "\" y=\"" << Y(ymax) + 14.0 * static_cast<double>(s) + 4 << "\" fill=\"" << color
       << "\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// epoch, mean final distance [cm] (best so far).
inline std::string reach_curve_csv(const ReachTraining& t) {
  std::ostringstream os;
  os << "epoch,mean_final_distance_cm\n";
  for (std::size_t e = 0; e < t.best_so_far.size(); ++e) os << e + 1 << "," << detail::format_number(t.best_so_far[e]) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Run manifests

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> options;  // every option the command read, as given
  std::string config;                          // full config snapshot, empty if none
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string tool_version = kToolVersion;
};

inline std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["options"] = m.options;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["artifacts"] = m.artifacts;
  j["tool_version"] = m.tool_version;
  return j.dump(2) + "\n";
}

inline RunManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.options = j.at("options").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.value("config", "");
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    m.tool_version = j.value("tool_version", "");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cli", std::string("malformed run manifest: ") + e.what());
  }
}

}  // namespace replab
