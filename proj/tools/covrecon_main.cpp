#include "covrecon/metrics.hpp"
#include "covrecon/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace covrecon;

namespace {

struct RunFlags {
  std::string scenario;
  std::optional<std::string> feedback, baseline, out;
  std::optional<double> jth, tmax, gamma;
  std::optional<std::size_t> drones;
  std::optional<std::uint64_t> seed;
  bool freeze_altitude = false, freeze_gimbal = false;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool with_drones) {
  app->add_option("--scenario", f.scenario, "scenario file (key=value); defaults apply when omitted");
  app->add_option("--feedback", f.feedback, "none | grid | m3c2")->check(CLI::IsMember({"none", "grid", "m3c2"}));
  app->add_option("--jth", f.jth, "feedback switch threshold as a fraction of the initial objective");
  if (with_drones) app->add_option("--drones", f.drones, "number of drones");
  app->add_option("--seed", f.seed, "oracle and placement seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--baseline", f.baseline, "none | lawnmower")->check(CLI::IsMember({"none", "lawnmower"}));
  app->add_flag("--freeze-altitude", f.freeze_altitude, "hold altitude fixed");
  app->add_flag("--freeze-gimbal", f.freeze_gimbal, "hold the camera at 90 degrees pitch");
  app->add_option("--tmax", f.tmax, "simulated time limit, seconds");
  app->add_option("--gamma", f.gamma, "prescribed objective decay rate");
  app->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

Overrides overrides_of(const RunFlags& f) {
  Overrides o;
  auto real = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (f.feedback) o.emplace_back("feedback.method", *f.feedback);
  if (f.jth) o.emplace_back("feedback.j_threshold", real(*f.jth));
  if (f.drones) o.emplace_back("drones.count", std::to_string(*f.drones));
  if (f.seed) o.emplace_back("seed", std::to_string(*f.seed));
  if (f.out) o.emplace_back("output.dir", *f.out);
  if (f.baseline) o.emplace_back("baseline.mode", *f.baseline);
  if (f.freeze_altitude) o.emplace_back("control.freeze_altitude", "true");
  if (f.freeze_gimbal) o.emplace_back("control.freeze_gimbal", "true");
  if (f.tmax) o.emplace_back("sim.t_max", real(*f.tmax));
  if (f.gamma) o.emplace_back("control.gamma", real(*f.gamma));
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ScenarioError("--set expects key=value, got '" + kv + "'");
    o.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return o;
}

Scenario load(const RunFlags& f, const Overrides& extra = {}) {
  Overrides o = overrides_of(f);
  o.insert(o.end(), extra.begin(), extra.end());
  if (f.scenario.empty()) return parse_scenario_text("", o, "<defaults>");
  return parse_scenario(f.scenario, o);
}

int report(const MissionLog& log, const Scenario& s) {
  std::fprintf(stderr, "%s: %zu steps, %zu events, final J %s, F-score %s (P %s, R %s), %.1f s wall\n",
               log.termination.c_str(), log.steps.size() - 1, log.events.size(),
               format_real9(log.steps.back().J).c_str(), format_real9(log.final_metrics.f_score).c_str(),
               format_real9(log.final_metrics.precision).c_str(), format_real9(log.final_metrics.recall).c_str(),
               log.wall_seconds);
  std::fprintf(stderr, "outputs in %s\n", s.out_dir.c_str());
  if (log.termination == "emergency_stop") {
    std::fprintf(stderr, "%s\n", log.safety_report.c_str());
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage control with online reconstruction feedback"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run one mission and write its outputs");
  add_run_flags(run, run_flags, true);

  std::string recon, truth;
  double eta = kDefaultEta;
  auto* eval = app.add_subcommand("eval", "score a reconstruction against ground truth");
  eval->add_option("--recon", recon, "reconstructed mesh (ASCII PLY)")->required();
  eval->add_option("--truth", truth, "ground-truth mesh (ASCII PLY)")->required();
  eval->add_option("--eta", eta, "distance threshold, meters");

  RunFlags sweep_flags;
  std::string counts = "1,2,4";
  double target = 0.25;
  auto* sweep = app.add_subcommand("sweep", "run one mission per drone count");
  add_run_flags(sweep, sweep_flags, false);
  sweep->add_option("--drones", counts, "comma-separated drone counts");
  sweep->add_option("--target", target, "objective level whose first crossing time is reported");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const Scenario s = load(run_flags);
      const MissionLog log = run_mission(mission_config(s));
      write_outputs(log, s, s.out_dir);
      return report(log, s);
    }
    if (*eval) {
      const TriangleMesh r = read_mesh_file(recon), t = read_mesh_file(truth);
      const MetricsReport m = evaluate_reconstruction(r, t, eta);
      nlohmann::json j = {{"precision", m.precision}, {"recall", m.recall},       {"f_score", m.f_score},
                          {"eta", m.eta},             {"recon_vertices", m.recon_vertices},
                          {"truth_vertices", m.truth_vertices}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*sweep) {
      std::vector<std::size_t> ns;
      std::stringstream ss(counts);
      std::string item;
      while (std::getline(ss, item, ',')) ns.push_back(static_cast<std::size_t>(std::stoul(item)));
      const Scenario base = load(sweep_flags);
      std::string table = "drones,time_to_target,final_fscore,final_J,termination\n";
      int status = 0;
      for (const std::size_t n : ns) {
        const std::string dir = base.out_dir + "/n" + std::to_string(n);
        const Scenario s = load(sweep_flags, {{"drones.count", std::to_string(n)}, {"output.dir", dir}});
        const MissionLog log = run_mission(mission_config(s));
        write_outputs(log, s, s.out_dir);
        status = std::max(status, report(log, s));
        const double t = time_to_objective(log, target);
        table += std::to_string(n) + ',' + (t < 0 ? std::string("nan") : format_real9(t)) + ',' +
                 format_real9(log.final_metrics.f_score) + ',' + format_real9(log.steps.back().J) + ',' +
                 log.termination + '\n';
      }
      std::ofstream out(base.out_dir + "/sweep.csv", std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + base.out_dir + "/sweep.csv");
      out << table;
      std::cout << table;
      return status;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
