#include "covrecon/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace covrecon {

const char* to_string(FeedbackMethod m) {
  switch (m) {
    case FeedbackMethod::kNone: return "none";
    case FeedbackMethod::kGrid: return "grid";
    case FeedbackMethod::kM3c2: return "m3c2";
  }
  return "?";
}

const char* to_string(BaselineMode m) {
  switch (m) {
    case BaselineMode::kNone: return "none";
    case BaselineMode::kLawnmower: return "lawnmower";
  }
  return "?";
}

std::size_t lawnmower_lane_count(double width, double lane_spacing) {
  if (!(lane_spacing > 0)) throw std::invalid_argument("lawnmower: lane spacing must be positive");
  if (!(width >= 0)) throw std::invalid_argument("lawnmower: negative width");
  // Same slack as the cell-count rule: 6 / 2 must give 3, not 2.999...
  return static_cast<std::size_t>(std::floor(width / lane_spacing * (1 + 1e-12))) + 1;
}

namespace {

std::vector<Waypoint> serpentine(double x0, double x1, const std::vector<double>& lanes, double altitude,
                                 double speed) {
  std::vector<Waypoint> out;
  for (std::size_t k = 0; k < lanes.size(); ++k) {
    const bool forward = k % 2 == 0;
    out.push_back({Vec3d(forward ? x0 : x1, lanes[k], altitude), 0.0});
    out.push_back({Vec3d(forward ? x1 : x0, lanes[k], altitude), 0.0});
  }
  for (std::size_t k = 1; k < out.size(); ++k)
    out[k].time = out[k - 1].time + (out[k].position - out[k - 1].position).norm() / speed;
  return out;
}

std::vector<double> lane_positions(const Regiond& flight, double spacing) {
  const std::size_t n = lawnmower_lane_count(flight.extent().y(), spacing);
  std::vector<double> ys(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = flight.min.y() + static_cast<double>(k) * spacing;
  return ys;
}

Eigen::VectorXd h2_none(std::size_t cells) { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells)); }

}  // namespace

std::vector<Waypoint> lawnmower_waypoints(const Regiond& flight, double altitude, double lane_spacing, double speed) {
  if (!(speed > 0)) throw std::invalid_argument("lawnmower: speed must be positive");
  return serpentine(flight.min.x(), flight.max.x(), lane_positions(flight, lane_spacing), altitude, speed);
}

World::World(MissionConfig config)
    : cfg_(std::move(config)),
      clock_{0, cfg_.dt},
      drones_(cfg_.initial),
      field_(cfg_.target, cfg_.yaw, cfg_.pitch, cfg_.resolution),
      sensor_(field_),
      importance_(field_.size(), cfg_.delta1, cfg_.delta2, cfg_.j_threshold),
      exposure_(cfg_.ground_truth, cfg_.oracle, cfg_.pitch) {
  if (!(cfg_.dt > 0)) throw std::invalid_argument("sim: dt must be positive");
  if (!(cfg_.t_max >= 0)) throw std::invalid_argument("sim: t_max must be nonnegative");
  if (!(cfg_.event_period > 0)) throw std::invalid_argument("sim: event period must be positive");
  if (!(cfg_.eta > 0)) throw std::invalid_argument("sim: eta must be positive");
  if (cfg_.mesh_stride == 0) throw std::invalid_argument("sim: mesh stride must be positive");
  if (drones_.empty()) throw std::invalid_argument("sim: at least one drone is required");
  if (cfg_.ground_truth.vertices.empty()) throw std::invalid_argument("sim: empty ground-truth mesh");
  cfg_.sensing.validate();
  cfg_.control.validate();
  event_steps_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg_.event_period / cfg_.dt)));

  if (cfg_.baseline == BaselineMode::kLawnmower) {
    // Fixed downward camera: pitch held at pi/2 and yaw irrelevant.
    cfg_.control.locked[kYaw] = true;
    cfg_.control.locked[kPitch] = true;
    for (auto& d : drones_) d = DroneStated(d.x(), d.y(), d.z(), d.theta_h(), std::numbers::pi / 2);
    const auto lanes = lane_positions(cfg_.flight, cfg_.lawnmower.lane_spacing);
    if (!(cfg_.lawnmower.speed > 0)) throw std::invalid_argument("lawnmower: speed must be positive");
    const std::size_t n = drones_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = i * lanes.size() / n, b = (i + 1) * lanes.size() / n;
      const std::vector<double> strip(lanes.begin() + static_cast<std::ptrdiff_t>(a),
                                      lanes.begin() + static_cast<std::ptrdiff_t>(b));
      paths_.push_back(serpentine(cfg_.flight.min.x(), cfg_.flight.max.x(), strip, cfg_.lawnmower.altitude,
                                  cfg_.lawnmower.speed));
    }
    path_cursor_.assign(n, 0);
  }

  for (std::size_t i = 0; i < drones_.size(); ++i) {
    const std::string report = safety_report(i, drones_, cfg_.flight, cfg_.control, cfg_.tolerance);
    if (!report.empty()) throw std::invalid_argument("sim: unsafe initial state: " + report);
  }

  if (cfg_.method != FeedbackMethod::kNone) {
    cfg_.feedback.validate();
    weights_ = precompute_kernel_weights(field_, cfg_.feedback.core_points, cfg_.feedback.sigma4);
    if (cfg_.method == FeedbackMethod::kGrid) binner_.emplace(cfg_.feedback.core_points);
  }
  refresh_sensing();
}

void World::refresh_sensing() {
  h1_ = covrecon::sensing_table(drones_, sensor_, cfg_.sensing);
  partition_ = assign_partition(h1_);
}

double World::min_pair_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < drones_.size(); ++i)
    for (std::size_t j = i + 1; j < drones_.size(); ++j)
      best = std::min(best, (drones_[i].position() - drones_[j].position()).norm());
  return best;
}

bool World::finished() const { return !termination().empty(); }

std::string World::termination() const {
  if (cfg_.baseline == BaselineMode::kLawnmower) {
    bool done = true;
    for (std::size_t i = 0; i < paths_.size(); ++i) done = done && path_cursor_[i] >= paths_[i].size();
    if (done) return "path_complete";
  } else if (objective() <= cfg_.j_stop) {
    return "j_stop";
  }
  const auto max_steps = static_cast<std::uint64_t>(std::ceil(cfg_.t_max / cfg_.dt - 1e-9));
  if (clock_.steps >= max_steps) return "t_max";
  return {};
}

StepRecord World::initial_record() const {
  StepRecord r;
  r.t = clock_.time();
  r.J_begin = r.J_decayed = r.J = objective();
  for (const auto& d : drones_) r.pose.push_back(d.pose());
  r.u.assign(drones_.size(), Vec5d::Zero());
  r.w.assign(drones_.size(), 0.0);
  r.active.assign(drones_.size(), 0);
  r.min_pair_dist = min_pair_distance();
  return r;
}

std::pair<EventRecord, MeshEvent> World::reconstruction_event(double delta2) {
  const long long index = ++last_event_;
  MeshEvent mesh = emit_reconstruction_event(exposure_, index, clock_.time());
  EventRecord rec;
  rec.index = index;
  rec.sim_time = clock_.time();
  rec.mesh_vertices = mesh.mesh.vertices.size();
  rec.mesh_faces = mesh.mesh.faces.size();
  rec.metrics = evaluate_reconstruction(mesh.mesh, cfg_.ground_truth, cfg_.eta, clock_.time());

  Eigen::VectorXd h2;
  switch (cfg_.method) {
    case FeedbackMethod::kNone:
      h2 = h2_none(field_.size());
      break;
    case FeedbackMethod::kGrid: {
      const std::vector<int> counts = binner_->bin(mesh.mesh.vertices, cfg_.target);
      h2 = h2_grid(grid_delta(counts, prev_counts_), weights_, cfg_.feedback.kappa);
      prev_counts_ = counts;
      break;
    }
    case FeedbackMethod::kM3c2: {
      // No predecessor or nothing revealed yet: no measurable change.
      if (prev_cloud_.empty() || mesh.mesh.vertices.empty()) {
        h2 = h2_none(field_.size());
      } else {
        const M3c2Result r = m3c2_distance(prev_cloud_, mesh.mesh.vertices, cfg_.feedback);
        h2 = h2_m3c2(r.distance, weights_);
      }
      prev_cloud_ = mesh.mesh.vertices;
      break;
    }
  }
  rec.h2_max = h2.size() ? h2.maxCoeff() : 0.0;
  rec.h2_mean = h2.size() ? h2.mean() : 0.0;
  const double added = feedback_jump(importance_, std::span<const double>(h2.data(), static_cast<std::size_t>(h2.size())),
                                     delta2);
  rec.jump_total = added / static_cast<double>(importance_.size());
  return {std::move(rec), std::move(mesh)};
}

std::pair<EventRecord, MeshEvent> World::terminal_event() {
  const long long index = ++last_event_;
  MeshEvent mesh = emit_reconstruction_event(exposure_, index, clock_.time());
  EventRecord rec;
  rec.index = index;
  rec.sim_time = clock_.time();
  rec.mesh_vertices = mesh.mesh.vertices.size();
  rec.mesh_faces = mesh.mesh.faces.size();
  rec.metrics = evaluate_reconstruction(mesh.mesh, cfg_.ground_truth, cfg_.eta, clock_.time());
  rec.terminal = true;
  return {std::move(rec), std::move(mesh)};
}

Vec5d World::lawnmower_reference(std::size_t i) {
  const auto& path = paths_[i];
  std::size_t& c = path_cursor_[i];
  Vec5d u = Vec5d::Zero();
  if (c >= path.size()) return u;
  const Vec3d gap = path[c].position - drones_[i].position();
  const double dist = gap.norm();
  const double reach = cfg_.lawnmower.speed * cfg_.dt;
  if (dist <= reach) {
    u.head<3>() = gap / cfg_.dt;
    ++c;
  } else {
    u.head<3>() = cfg_.lawnmower.speed * gap / dist;
  }
  return u;
}

StepRecord World::step(const StepObserver& observer, std::optional<EventRecord>* event_out,
                       std::optional<MeshEvent>* mesh_out) {
  StepDiagnostics diag;
  diag.step = clock_.steps;
  diag.J_begin = objective();
  diag.delta2 = cfg_.method == FeedbackMethod::kNone ? 0.0 : feedback_gain(diag.J_begin, importance_);

  const Eigen::VectorXd hmax = max_over_drones(h1_);
  decay_step(importance_, std::span<const double>(hmax.data(), static_cast<std::size_t>(hmax.size())), cfg_.dt);
  diag.J_decayed = objective();

  const bool event_due = clock_.steps > 0 && clock_.steps % event_steps_ == 0;
  if (event_due) {
    auto [rec, mesh] = reconstruction_event(diag.delta2);
    diag.event = rec;
    if (event_out) *event_out = std::move(rec);
    if (mesh_out) *mesh_out = std::move(mesh);
  }

  const ControlSnapshot snap{drones_, partition_, h1_, sensor_, importance_, cfg_.flight};
  const std::size_t n = drones_.size();
  diag.control.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg_.baseline == BaselineMode::kLawnmower)
      diag.control.push_back(
          safety_filter(lawnmower_reference(i), i, drones_, cfg_.flight, cfg_.control, cfg_.tolerance));
    else
      diag.control.push_back(compute_control(i, snap, cfg_.sensing, cfg_.control, cfg_.tolerance));
    diag.contribution.push_back(drone_contribution(i, partition_, h1_, importance_));
  }
  if (observer) observer(*this, diag);

  for (std::size_t i = 0; i < n; ++i) drones_[i] = drones_[i].integrated(diag.control[i].u, cfg_.dt);
  ++clock_.steps;
  accumulate_exposure(exposure_, drones_, cfg_.sensing, cfg_.dt);
  refresh_sensing();

  StepRecord r;
  r.t = clock_.time();
  r.J_begin = diag.J_begin;
  r.J_decayed = diag.J_decayed;
  r.J = objective();
  r.event = event_due;
  for (std::size_t i = 0; i < n; ++i) {
    r.pose.push_back(drones_[i].pose());
    r.u.push_back(diag.control[i].u);
    r.w.push_back(diag.control[i].w);
    r.active.push_back(diag.control[i].diagnostics.active_mask);
  }
  r.min_pair_dist = min_pair_distance();
  return r;
}

MissionLog run_mission(const MissionConfig& config, const StepObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  MissionLog log;
  World world(config);
  log.steps.push_back(world.initial_record());
  while (!world.finished()) {
    std::optional<EventRecord> ev;
    std::optional<MeshEvent> mesh;
    try {
      log.steps.push_back(world.step(observer, &ev, &mesh));
    } catch (const UnsafeStateError& e) {
      log.termination = "emergency_stop";
      log.safety_report = e.what();
      break;
    }
    if (ev) {
      if (ev->index % static_cast<long long>(config.mesh_stride) == 0) log.meshes.push_back(std::move(*mesh));
      log.events.push_back(std::move(*ev));
    }
  }
  if (log.termination.empty()) log.termination = world.termination();
  auto [rec, mesh] = world.terminal_event();
  log.final_metrics = rec.metrics;
  log.events.push_back(std::move(rec));
  log.meshes.push_back(std::move(mesh));
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

}  // namespace covrecon
