#include "covrecon/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <algorithm>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace covrecon;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("covrecon_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("empty file gives the reference parameter set") {
  const Scenario s = parse_scenario_text("");
  CHECK(s == Scenario{});
  CHECK(s.sensing.D == 1.0);
  CHECK(s.sensing.sigma1 == 0.07);
  CHECK(s.sensing.sigma2 == 0.095);
  CHECK(s.sensing.sigma3 == 0.3);
  CHECK(s.sigma4 == 0.4);
  CHECK(s.delta1 == 3.0);
  CHECK(s.delta2 == 1.0);
  CHECK(s.kappa == 0.7);
  CHECK(s.control.a1 == 1.0);
  CHECK(s.control.a2 == 1.0);
  CHECK(s.control.a3 == 1.0);
  CHECK(s.control.epsilon == 0.01);
  CHECK(s.control.gamma == 0.012);
  CHECK(s.control.d == 1.0);
  CHECK(s.eta == 0.05);
  CHECK(s.dt == 0.05);
}

TEST_CASE("overrides take precedence over the file") {
  const Scenario s = parse_scenario_text("control.gamma=0.01\n", {{"control.gamma", "0.02"}});
  CHECK(s.control.gamma == 0.02);
  CHECK(parse_scenario_text("control.gamma=0.01\n").control.gamma == 0.01);
}

TEST_CASE("comments, whitespace and vector values") {
  const Scenario s = parse_scenario_text(
      "# comment\n\n  feedback.method = m3c2  \nfield.resolution=0.25\nregion.target.min=-1,-1,0\n"
      "drones.count=2\ndrones.initial=0,0,2,0,1.5707963267948966; 2,0,2,0,1.2\n");
  CHECK(s.method == FeedbackMethod::kM3c2);
  CHECK(s.resolution == Vec5d::Constant(0.25));
  CHECK(s.target_min == Vec3d(-1, -1, 0));
  REQUIRE(s.initial.size() == 2);
  CHECK(s.initial[1][kPitch] == 1.2);
}

TEST_CASE("errors carry the location") {
  auto message = [](const std::string& text, const Overrides& o = {}) {
    try {
      parse_scenario_text(text, o, "desk.scn");
    } catch (const ScenarioError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("seed=1\nbogus.key=3\n").find("desk.scn:2") != std::string::npos);
  CHECK(message("seed=1\nseed=2\n").find("duplicate") != std::string::npos);
  CHECK(message("control.gamma=abc\n").find("desk.scn:1") != std::string::npos);
  CHECK(message("no equals sign\n").find("desk.scn:1") != std::string::npos);
  CHECK(message("", {{"control.gamma", "-1"}}).find("control.gamma") != std::string::npos);
  CHECK(message("", {{"nope", "1"}}).find("nope") != std::string::npos);
  const std::string close =
      message("drones.count=2\ndrones.initial=0,0,2,0,1.5;0.5,0,2,0,1.5\n");
  CHECK(close.find("desk.scn:2") != std::string::npos);
  CHECK(close.find("apart") != std::string::npos);
  CHECK_THROWS_AS(parse_scenario("/nonexistent/file.scn"), ScenarioError);
}

TEST_CASE("resolved text round-trips") {
  Scenario s = parse_scenario_text(
      "control.gamma=0.0123456789012345\nfeedback.method=none\nbaseline.mode=lawnmower\nseed=18446744073709551615\n"
      "drones.count=2\ndrones.init_jitter=0.1\ncontrol.pitch_barrier_halfrange=true\noracle.resample_noise=true\n");
  const std::string text = resolved_text(s);
  const Scenario back = parse_scenario_text(text);
  CHECK(back == s);
  CHECK(resolved_text(back) == text);
  std::size_t lines = 0;
  for (const char c : text) lines += c == '\n' ? 1 : 0;
  CHECK(lines == scenario_keys().size());
}

TEST_CASE("relative scene paths resolve against the scenario file") {
  const Scenario s = parse_scenario_text("oracle.scene=scenes/room.ply\n", {}, "x.scn", "/data/runs");
  CHECK(s.scene == "/data/runs/scenes/room.ply");
}

TEST_CASE("automatic initial placement is safe and seeded") {
  Scenario s;
  s.drone_count = 4;
  s.init_jitter = 0.25;
  const auto a = initial_states(s);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) CHECK((a[i].position() - a[j].position()).norm() >= 1.0);
  CHECK(initial_states(s) == a);
  s.seed = 1;
  CHECK(initial_states(s) != a);
  s.freeze_gimbal = true;
  for (const auto& d : initial_states(s)) CHECK(d.theta_v() == std::numbers::pi / 2);
}

TEST_CASE("zero-step log writes header plus initial row") {
  Scenario s;
  s.resolution = Vec5d(1.0, 1.0, 1.0, 0.6, 0.3);
  s.t_max = 0.0;
  const auto log = run_mission(mission_config(s));
  const fs::path dir = scratch_dir("zero");
  write_outputs(log, s, dir);
  const std::string steps = slurp(dir / "steps.csv");
  CHECK(std::count(steps.begin(), steps.end(), '\n') == 2);
  CHECK(steps.rfind("t,J,x_0,y_0,z_0,th_0,tv_0,ux_0,uy_0,uz_0,uth_0,utv_0,w_0,min_pair_dist\n", 0) == 0);
  CHECK(steps.find(",inf\n") != std::string::npos);
  CHECK(fs::exists(dir / "events.csv"));
  CHECK(fs::exists(dir / "metrics.json"));
  CHECK(fs::exists(dir / "meshes" / "event_1.ply"));
  CHECK(parse_scenario(dir / "scenario.resolved") == s);
  fs::remove_all(dir);
}

TEST_CASE("two identical runs write identical files") {
  Scenario s;
  s.resolution = Vec5d(1.0, 1.0, 1.0, 0.6, 0.3);
  s.t_max = 12.0;
  s.event_period = 2.0;
  s.mesh_stride = 2;
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  write_outputs(run_mission(mission_config(s)), s, a);
  write_outputs(run_mission(mission_config(s)), s, b);
  for (const char* f : {"steps.csv", "events.csv", "metrics.json", "scenario.resolved"})
    CHECK(slurp(a / f) == slurp(b / f));
  std::size_t meshes = 0;
  for (const auto& e : fs::directory_iterator(a / "meshes")) {
    CHECK(slurp(e.path()) == slurp(b / "meshes" / e.path().filename()));
    ++meshes;
  }
  CHECK(meshes >= 3);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("unwritable output directory reports the path") {
  Scenario s;
  s.resolution = Vec5d(1.0, 1.0, 1.0, 0.6, 0.3);
  s.t_max = 0.0;
  const auto log = run_mission(mission_config(s));
  const fs::path blocker = scratch_dir("blocker");
  { std::ofstream(blocker) << "file"; }
  try {
    write_outputs(log, s, blocker / "sub");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(blocker.string()) != std::string::npos);
  }
  fs::remove_all(blocker);
}

}
