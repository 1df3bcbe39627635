#include "covrecon/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace covrecon {

std::string format_real9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::string format_real17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Value errors carry no location; the caller prefixes it.
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_real(const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValueError("expected a number, got '" + s + "'");
  if (!std::isfinite(v)) throw ValueError("value must be finite");
  return v;
}

std::uint64_t parse_uint(const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ValueError("expected a nonnegative integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ValueError("expected true or false, got '" + s + "'");
}

std::vector<double> parse_list(const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
  return out;
}

template <int N>
Eigen::Matrix<double, N, 1> parse_fixed(const std::string& raw) {
  const auto v = parse_list(raw);
  if (v.size() != N) throw ValueError("expected " + std::to_string(N) + " comma-separated numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int k = 0; k < N; ++k) out[k] = v[static_cast<std::size_t>(k)];
  return out;
}

template <typename Vec>
std::string format_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    out += format_real17(v[k]);
  }
  return out;
}

FeedbackMethod parse_method(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "none") return FeedbackMethod::kNone;
  if (s == "grid") return FeedbackMethod::kGrid;
  if (s == "m3c2") return FeedbackMethod::kM3c2;
  throw ValueError("expected none, grid or m3c2, got '" + s + "'");
}

BaselineMode parse_baseline(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "none") return BaselineMode::kNone;
  if (s == "lawnmower") return BaselineMode::kLawnmower;
  throw ValueError("expected none or lawnmower, got '" + s + "'");
}

struct Entry {
  const char* key;
  std::function<void(Scenario&, const std::string&)> set;
  std::function<std::string(const Scenario&)> get;
};

Entry real_entry(const char* key, double Scenario::*m) {
  return {key, [m](Scenario& s, const std::string& v) { s.*m = parse_real(v); },
          [m](const Scenario& s) { return format_real17(s.*m); }};
}

template <typename Sub>
Entry sub_real(const char* key, Sub Scenario::*outer, double Sub::*inner) {
  return {key, [=](Scenario& s, const std::string& v) { (s.*outer).*inner = parse_real(v); },
          [=](const Scenario& s) { return format_real17((s.*outer).*inner); }};
}

template <typename Sub>
Entry sub_bool(const char* key, Sub Scenario::*outer, bool Sub::*inner) {
  return {key, [=](Scenario& s, const std::string& v) { (s.*outer).*inner = parse_bool(v); },
          [=](const Scenario& s) { return std::string((s.*outer).*inner ? "true" : "false"); }};
}

Entry bool_entry(const char* key, bool Scenario::*m) {
  return {key, [m](Scenario& s, const std::string& v) { s.*m = parse_bool(v); },
          [m](const Scenario& s) { return std::string(s.*m ? "true" : "false"); }};
}

Entry vec3_entry(const char* key, Vec3d Scenario::*m) {
  return {key, [m](Scenario& s, const std::string& v) { s.*m = parse_fixed<3>(v); },
          [m](const Scenario& s) { return format_vec(s.*m); }};
}

Entry vec2_entry(const char* key, Eigen::Vector2d Scenario::*m) {
  return {key, [m](Scenario& s, const std::string& v) { s.*m = parse_fixed<2>(v); },
          [m](const Scenario& s) { return format_vec(s.*m); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(vec3_entry("region.target.min", &Scenario::target_min));
    t.push_back(vec3_entry("region.target.max", &Scenario::target_max));
    t.push_back(vec3_entry("region.flight.min", &Scenario::flight_min));
    t.push_back(vec3_entry("region.flight.max", &Scenario::flight_max));
    t.push_back(vec2_entry("field.theta_h", &Scenario::theta_h));
    t.push_back(vec2_entry("field.theta_v", &Scenario::theta_v));
    t.push_back({"field.resolution",
                 [](Scenario& s, const std::string& v) {
                   const auto r = parse_list(v);
                   if (r.size() == 1)
                     s.resolution = Vec5d::Constant(r[0]);
                   else if (r.size() == 5)
                     for (int k = 0; k < 5; ++k) s.resolution[k] = r[static_cast<std::size_t>(k)];
                   else
                     throw ValueError("expected 1 or 5 comma-separated numbers");
                 },
                 [](const Scenario& s) { return format_vec(s.resolution); }});
    t.push_back({"drones.count",
                 [](Scenario& s, const std::string& v) { s.drone_count = static_cast<std::size_t>(parse_uint(v)); },
                 [](const Scenario& s) { return std::to_string(s.drone_count); }});
    t.push_back({"drones.initial",
                 [](Scenario& s, const std::string& v) {
                   s.initial.clear();
                   std::stringstream ss(v);
                   std::string pose;
                   while (std::getline(ss, pose, ';'))
                     if (!trim(pose).empty()) s.initial.push_back(parse_fixed<5>(pose));
                 },
                 [](const Scenario& s) {
                   std::string out;
                   for (std::size_t i = 0; i < s.initial.size(); ++i) {
                     if (i) out += ';';
                     out += format_vec(s.initial[i]);
                   }
                   return out;
                 }});
    t.push_back(real_entry("drones.init_jitter", &Scenario::init_jitter));
    t.push_back(sub_real("sensing.D", &Scenario::sensing, &SensingParamsd::D));
    t.push_back(sub_real("sensing.sigma1", &Scenario::sensing, &SensingParamsd::sigma1));
    t.push_back(sub_real("sensing.sigma2", &Scenario::sensing, &SensingParamsd::sigma2));
    t.push_back(sub_real("sensing.sigma3", &Scenario::sensing, &SensingParamsd::sigma3));
    t.push_back(real_entry("importance.delta1", &Scenario::delta1));
    t.push_back({"feedback.method", [](Scenario& s, const std::string& v) { s.method = parse_method(v); },
                 [](const Scenario& s) { return std::string(to_string(s.method)); }});
    t.push_back(real_entry("feedback.delta2", &Scenario::delta2));
    t.push_back(real_entry("feedback.j_threshold", &Scenario::j_threshold));
    t.push_back(real_entry("feedback.sigma4", &Scenario::sigma4));
    t.push_back(real_entry("feedback.kappa", &Scenario::kappa));
    t.push_back(real_entry("feedback.core_spacing", &Scenario::core_spacing));
    t.push_back(real_entry("feedback.normal_radius", &Scenario::normal_radius));
    t.push_back(real_entry("feedback.cylinder_radius", &Scenario::cylinder_radius));
    t.push_back(real_entry("feedback.period", &Scenario::event_period));
    t.push_back(sub_real("control.gamma", &Scenario::control, &ControlParams::gamma));
    t.push_back(sub_real("control.a1", &Scenario::control, &ControlParams::a1));
    t.push_back(sub_real("control.a2", &Scenario::control, &ControlParams::a2));
    t.push_back(sub_real("control.a3", &Scenario::control, &ControlParams::a3));
    t.push_back(sub_real("control.a4", &Scenario::control, &ControlParams::a4));
    t.push_back(sub_real("control.epsilon", &Scenario::control, &ControlParams::epsilon));
    t.push_back(sub_real("control.d", &Scenario::control, &ControlParams::d));
    t.push_back(sub_real("control.theta_v_min", &Scenario::control, &ControlParams::theta_v_min));
    t.push_back(sub_real("control.theta_v_max", &Scenario::control, &ControlParams::theta_v_max));
    t.push_back({"control.u_max",
                 [](Scenario& s, const std::string& v) { s.control.u_max = parse_fixed<5>(v); },
                 [](const Scenario& s) { return format_vec(s.control.u_max); }});
    t.push_back(sub_bool("control.pitch_barrier_halfrange", &Scenario::control, &ControlParams::pitch_barrier_halfrange));
    t.push_back(sub_bool("control.collision_all_neighbors", &Scenario::control, &ControlParams::collision_all_neighbors));
    t.push_back(bool_entry("control.freeze_altitude", &Scenario::freeze_altitude));
    t.push_back(bool_entry("control.freeze_gimbal", &Scenario::freeze_gimbal));
    t.push_back({"oracle.scene", [](Scenario& s, const std::string& v) { s.scene = trim(v); },
                 [](const Scenario& s) { return s.scene; }});
    t.push_back(sub_real("oracle.reveal_threshold", &Scenario::oracle, &OracleParams::reveal_threshold));
    t.push_back(sub_real("oracle.noise_scale", &Scenario::oracle, &OracleParams::noise_scale));
    t.push_back(sub_real("oracle.noise_halflife", &Scenario::oracle, &OracleParams::noise_halflife));
    t.push_back(sub_real("oracle.refine_threshold", &Scenario::oracle, &OracleParams::refine_threshold));
    t.push_back(sub_bool("oracle.resample_noise", &Scenario::oracle, &OracleParams::resample_noise));
    t.push_back(real_entry("metrics.eta", &Scenario::eta));
    t.push_back(real_entry("sim.dt", &Scenario::dt));
    t.push_back(real_entry("sim.j_stop", &Scenario::j_stop));
    t.push_back(real_entry("sim.t_max", &Scenario::t_max));
    t.push_back({"seed", [](Scenario& s, const std::string& v) { s.seed = parse_uint(v); },
                 [](const Scenario& s) { return std::to_string(s.seed); }});
    t.push_back({"output.dir", [](Scenario& s, const std::string& v) { s.out_dir = trim(v); },
                 [](const Scenario& s) { return s.out_dir; }});
    t.push_back({"output.mesh_stride",
                 [](Scenario& s, const std::string& v) { s.mesh_stride = static_cast<std::size_t>(parse_uint(v)); },
                 [](const Scenario& s) { return std::to_string(s.mesh_stride); }});
    t.push_back({"baseline.mode", [](Scenario& s, const std::string& v) { s.baseline = parse_baseline(v); },
                 [](const Scenario& s) { return std::string(to_string(s.baseline)); }});
    t.push_back(sub_real("baseline.altitude", &Scenario::lawnmower, &LawnmowerParams::altitude));
    t.push_back(sub_real("baseline.lane_spacing", &Scenario::lawnmower, &LawnmowerParams::lane_spacing));
    t.push_back(sub_real("baseline.speed", &Scenario::lawnmower, &LawnmowerParams::speed));
    return t;
  }();
  return table;
}

const Entry* find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (key == e.key) return &e;
  return nullptr;
}

/// Where each key was last set, for error messages.
class Provenance {
 public:
  explicit Provenance(std::string origin) : origin_(std::move(origin)) {}
  void file(const std::string& key, std::size_t line) { where_[key] = origin_ + ":" + std::to_string(line); }
  void flag(const std::string& key) { where_[key] = "override " + key; }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = where_.find(key);
    const std::string loc = it != where_.end() ? it->second : origin_ + " (default)";
    throw ScenarioError(loc + ": " + key + ": " + what);
  }
  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> where_;
};

void validate(const Scenario& s, const Provenance& where) {
  auto need = [&](bool ok, const std::string& key, const std::string& what) {
    if (!ok) where.fail(key, what);
  };
  need((s.target_min.array() < s.target_max.array()).all(), "region.target.max", "must exceed region.target.min");
  need((s.flight_min.array() < s.flight_max.array()).all(), "region.flight.max", "must exceed region.flight.min");
  need(s.theta_h[0] < s.theta_h[1], "field.theta_h", "lower bound must be below upper bound");
  need(s.theta_v[0] < s.theta_v[1], "field.theta_v", "lower bound must be below upper bound");
  need(s.theta_v[0] > 0 && s.theta_v[1] <= std::numbers::pi / 2, "field.theta_v", "must lie in (0, pi/2]");
  need((s.resolution.array() > 0).all(), "field.resolution", "must be positive");
  need(s.drone_count >= 1, "drones.count", "at least one drone is required");
  need(s.initial.empty() || s.initial.size() == s.drone_count, "drones.initial",
       "lists " + std::to_string(s.initial.size()) + " poses but drones.count is " + std::to_string(s.drone_count));
  need(s.init_jitter >= 0, "drones.init_jitter", "must be nonnegative");
  need(s.sensing.D > 0, "sensing.D", "must be positive");
  need(s.sensing.sigma1 > 0, "sensing.sigma1", "must be positive");
  need(s.sensing.sigma2 > 0, "sensing.sigma2", "must be positive");
  need(s.sensing.sigma3 > 0, "sensing.sigma3", "must be positive");
  need(s.delta1 > 0, "importance.delta1", "must be positive");
  need(s.delta2 >= 0, "feedback.delta2", "must be nonnegative");
  need(s.j_threshold > 0 && s.j_threshold <= 1, "feedback.j_threshold", "must lie in (0, 1]");
  need(s.sigma4 > 0, "feedback.sigma4", "must be positive");
  need(s.kappa > 0, "feedback.kappa", "must be positive");
  need(s.core_spacing > 0, "feedback.core_spacing", "must be positive");
  need(s.normal_radius > 0, "feedback.normal_radius", "must be positive");
  need(s.cylinder_radius > 0, "feedback.cylinder_radius", "must be positive");
  need(s.event_period > 0, "feedback.period", "must be positive");
  need(s.control.gamma > 0, "control.gamma", "must be positive");
  need(s.control.a1 > 0, "control.a1", "must be positive");
  need(s.control.a2 > 0, "control.a2", "must be positive");
  need(s.control.a3 > 0, "control.a3", "must be positive");
  need(s.control.a4 > 0, "control.a4", "must be positive");
  need(s.control.epsilon > 0, "control.epsilon", "must be positive");
  need(s.control.d > 0, "control.d", "must be positive");
  need(s.control.theta_v_min < s.control.theta_v_max, "control.theta_v_max", "must exceed control.theta_v_min");
  need((s.control.u_max.array() > 0).all(), "control.u_max", "must be positive");
  need(!s.scene.empty(), "oracle.scene", "must name a PLY file or 'bundled'");
  need(s.oracle.reveal_threshold > 0, "oracle.reveal_threshold", "must be positive");
  need(s.oracle.noise_scale >= 0, "oracle.noise_scale", "must be nonnegative");
  need(s.oracle.noise_halflife > 0, "oracle.noise_halflife", "must be positive");
  need(s.oracle.refine_threshold > 0, "oracle.refine_threshold", "must be positive");
  need(s.eta > 0, "metrics.eta", "must be positive");
  need(s.dt > 0, "sim.dt", "must be positive");
  need(s.j_stop >= 0, "sim.j_stop", "must be nonnegative");
  need(s.t_max >= 0, "sim.t_max", "must be nonnegative");
  need(!s.out_dir.empty(), "output.dir", "must not be empty");
  need(s.mesh_stride >= 1, "output.mesh_stride", "must be at least 1");
  need(s.lawnmower.altitude > 0, "baseline.altitude", "must be positive");
  need(s.lawnmower.lane_spacing > 0, "baseline.lane_spacing", "must be positive");
  need(s.lawnmower.speed > 0, "baseline.speed", "must be positive");

  const std::string pose_key = s.initial.empty() ? "drones.count" : "drones.initial";
  std::vector<DroneStated> drones;
  try {
    drones = initial_states(s);
  } catch (const GeometryError& e) {
    where.fail(pose_key, e.what());
  }
  for (std::size_t i = 0; i < drones.size(); ++i) {
    const Vec3d p = drones[i].position();
    need((p.array() >= s.flight_min.array()).all() && (p.array() <= s.flight_max.array()).all(), pose_key,
         "drone " + std::to_string(i) + " starts outside the flight region");
    const double tv = drones[i].theta_v();
    need(tv >= s.control.theta_v_min - 1e-12 && tv <= s.control.theta_v_max + 1e-12, pose_key,
         "drone " + std::to_string(i) + " pitch outside [control.theta_v_min, control.theta_v_max]");
    for (std::size_t j = i + 1; j < drones.size(); ++j) {
      const double dist = (p - drones[j].position()).norm();
      need(dist >= s.control.d, pose_key,
           "drones " + std::to_string(i) + " and " + std::to_string(j) + " start " + format_real9(dist) +
               " m apart, closer than control.d = " + format_real9(s.control.d));
    }
  }
}

void apply(Scenario& s, const std::string& key, const std::string& value, Provenance& where, bool from_flag,
           std::size_t line, const std::filesystem::path& base_dir) {
  const Entry* e = find_entry(key);
  if (!e) {
    if (from_flag) throw ScenarioError("override " + key + ": unknown key");
    throw ScenarioError(where.origin() + ":" + std::to_string(line) + ": unknown key '" + key + "'");
  }
  if (from_flag)
    where.flag(key);
  else
    where.file(key, line);
  try {
    e->set(s, value);
  } catch (const ValueError& err) {
    where.fail(key, err.what());
  }
  if (key == "oracle.scene" && s.scene != "bundled") {
    const std::filesystem::path p(s.scene);
    if (p.is_relative()) s.scene = (base_dir / p).lexically_normal().string();
  }
}

}  // namespace

std::vector<std::string> scenario_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.emplace_back(e.key);
  return keys;
}

Scenario parse_scenario_text(const std::string& text, const Overrides& overrides, const std::string& origin,
                             const std::filesystem::path& base_dir) {
  Scenario s;
  Provenance where(origin);
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string t = trim(raw);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ScenarioError(origin + ":" + std::to_string(line) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (const auto it = seen.find(key); it != seen.end())
      throw ScenarioError(origin + ":" + std::to_string(line) + ": duplicate key '" + key + "' (first set on line " +
                          std::to_string(it->second) + ")");
    seen[key] = line;
    apply(s, key, value, where, false, line, base_dir);
  }
  for (const auto& [key, value] : overrides) apply(s, key, value, where, true, 0, std::filesystem::current_path());
  validate(s, where);
  return s;
}

Scenario parse_scenario(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), overrides, path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

std::string resolved_text(const Scenario& s) {
  std::string out;
  for (const auto& e : entries()) {
    out += e.key;
    out += '=';
    out += e.get(s);
    out += '\n';
  }
  return out;
}

std::vector<DroneStated> initial_states(const Scenario& s) {
  std::vector<DroneStated> out;
  const double pitch = s.freeze_gimbal || s.baseline == BaselineMode::kLawnmower ? std::numbers::pi / 2 : -1.0;
  if (!s.initial.empty()) {
    for (const auto& p : s.initial) {
      Vec5d q = p;
      if (pitch > 0) q[kPitch] = pitch;
      out.emplace_back(q);
    }
    return out;
  }
  const std::size_t n = s.drone_count;
  for (std::size_t i = 0; i < n; ++i) {
    Vec5d q;
    if (n == 1) {
      q << 0.0, 1.0, 2.0, 0.0, std::numbers::pi / 2;
    } else {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      q << 1.5 * std::cos(a), 1.5 * std::sin(a), 2.0, a + std::numbers::pi, std::numbers::pi / 2;
    }
    if (s.init_jitter > 0) {
      const std::uint64_t key = mix64(s.seed ^ 0x6a09e667f3bcc909ULL) ^ i;
      const double ux = static_cast<double>(mix64(key) >> 11) * 0x1.0p-53;
      const double uy = static_cast<double>(mix64(key ^ 0xbb67ae8584caa73bULL) >> 11) * 0x1.0p-53;
      q[kX] += s.init_jitter * (2.0 * ux - 1.0);
      q[kY] += s.init_jitter * (2.0 * uy - 1.0);
    }
    if (pitch > 0) q[kPitch] = pitch;
    out.emplace_back(q);
  }
  return out;
}

MissionConfig mission_config(const Scenario& s) {
  MissionConfig c;
  c.target = Regiond(s.target_min, s.target_max);
  c.flight = Regiond(s.flight_min, s.flight_max);
  c.yaw = {s.theta_h[0], s.theta_h[1]};
  c.pitch = {s.theta_v[0], s.theta_v[1]};
  c.resolution = s.resolution;
  c.initial = initial_states(s);
  c.sensing = s.sensing;
  c.control = s.control;
  c.control.locked[kZ] = s.freeze_altitude;
  c.control.locked[kPitch] = s.freeze_gimbal;
  c.delta1 = s.delta1;
  c.delta2 = s.delta2;
  c.j_threshold = s.j_threshold;
  c.method = s.method;
  c.feedback.core_points = grid_core_points(c.target, s.core_spacing);
  c.feedback.sigma4 = s.sigma4;
  c.feedback.kappa = s.kappa;
  c.feedback.normal_radius = s.normal_radius;
  c.feedback.cylinder_radius = s.cylinder_radius;
  c.event_period = s.event_period;
  c.oracle = s.oracle;
  c.oracle.seed = s.seed;
  c.ground_truth = s.scene == "bundled" ? bundled_scene() : read_mesh_file(s.scene);
  c.eta = s.eta;
  c.dt = s.dt;
  c.j_stop = s.j_stop;
  c.t_max = s.t_max;
  c.baseline = s.baseline;
  c.lawnmower = s.lawnmower;
  c.mesh_stride = s.mesh_stride;
  return c;
}

double time_to_objective(const MissionLog& log, double target) {
  for (const auto& r : log.steps)
    if (r.J <= target) return r.t;
  return -1.0;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

double round9(double v) { return std::isfinite(v) ? std::strtod(format_real9(v).c_str(), nullptr) : v; }

nlohmann::json json_real(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round9(v);
}

}  // namespace

void write_outputs(const MissionLog& log, const Scenario& s, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "meshes", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
  for (const auto& entry : std::filesystem::directory_iterator(out_dir / "meshes")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("event_", 0) == 0 && entry.path().extension() == ".ply") std::filesystem::remove(entry.path());
  }

  const std::size_t n = log.steps.empty() ? 0 : log.steps.front().pose.size();
  std::string steps = "t,J";
  static const char* const kPose[] = {"x", "y", "z", "th", "tv"};
  static const char* const kInput[] = {"ux", "uy", "uz", "uth", "utv"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string idx = "_" + std::to_string(i);
    for (const char* p : kPose) steps += std::string(",") + p + idx;
    for (const char* u : kInput) steps += std::string(",") + u + idx;
    steps += ",w" + idx;
  }
  steps += ",min_pair_dist\n";
  for (const auto& r : log.steps) {
    steps += format_real9(r.t);
    steps += ',';
    steps += format_real9(r.J);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 5; ++k) (steps += ',') += format_real9(r.pose[i][k]);
      for (int k = 0; k < 5; ++k) (steps += ',') += format_real9(r.u[i][k]);
      (steps += ',') += format_real9(r.w[i]);
    }
    (steps += ',') += format_real9(r.min_pair_dist);
    steps += '\n';
  }
  write_file(out_dir / "steps.csv", steps);

  std::string events = "t_event,sim_time,h2_max,h2_mean,jump_total,mesh_vertices,mesh_faces,fscore,precision,recall\n";
  for (const auto& e : log.events) {
    events += std::to_string(e.index) + ',' + format_real9(e.sim_time) + ',' + format_real9(e.h2_max) + ',' +
              format_real9(e.h2_mean) + ',' + format_real9(e.jump_total) + ',' + std::to_string(e.mesh_vertices) +
              ',' + std::to_string(e.mesh_faces) + ',' + format_real9(e.metrics.f_score) + ',' +
              format_real9(e.metrics.precision) + ',' + format_real9(e.metrics.recall) + '\n';
  }
  write_file(out_dir / "events.csv", events);

  for (const auto& m : log.meshes)
    write_mesh_file(out_dir / "meshes" / ("event_" + std::to_string(m.index) + ".ply"), m.mesh);

  nlohmann::json j;
  const MetricsReport& f = log.final_metrics;
  j["final"] = {{"precision", json_real(f.precision)},
                {"recall", json_real(f.recall)},
                {"f_score", json_real(f.f_score)},
                {"eta", json_real(f.eta)},
                {"recon_vertices", f.recon_vertices},
                {"truth_vertices", f.truth_vertices},
                {"sim_time", json_real(f.sim_time)}};
  j["termination"] = log.termination;
  j["safety_report"] = log.safety_report;
  j["steps"] = log.steps.empty() ? 0 : log.steps.size() - 1;
  j["events"] = log.events.size();
  j["final_J"] = log.steps.empty() ? nlohmann::json(nullptr) : json_real(log.steps.back().J);
  double min_pair = std::numeric_limits<double>::infinity();
  for (const auto& r : log.steps) min_pair = std::min(min_pair, r.min_pair_dist);
  j["min_pair_dist"] = json_real(min_pair);
  nlohmann::json ttj = nlohmann::json::object();
  for (const double target : {0.5, 0.25, 0.1, 0.05}) {
    const double t = time_to_objective(log, target);
    ttj[format_real9(target)] = t < 0 ? nlohmann::json(nullptr) : json_real(t);
  }
  j["time_to_J"] = ttj;
  nlohmann::json series = nlohmann::json::array();
  for (const auto& e : log.events)
    series.push_back({{"t_event", e.index},
                      {"sim_time", json_real(e.sim_time)},
                      {"f_score", json_real(e.metrics.f_score)},
                      {"precision", json_real(e.metrics.precision)},
                      {"recall", json_real(e.metrics.recall)}});
  j["fscore_series"] = series;
  write_file(out_dir / "metrics.json", j.dump(2) + "\n");

  write_file(out_dir / "scenario.resolved", resolved_text(s));
}

}  // namespace covrecon
