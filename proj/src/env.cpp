#include "spoofwatch/env.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spoofwatch::env {

namespace {

constexpr double kMinObstacleSeparation = 1e-6;

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

void validate_box(const Box& b, const char* name) {
  if (b.empty()) throw ConfigError(std::string(name) + " box is empty");
}

void box_json(nlohmann::json& j, const char* key, const Box& b) {
  j[key] = {{"min", detail::vec3_json(b.lo)}, {"max", detail::vec3_json(b.hi)}};
}

void box_from(const nlohmann::json& j, const char* key, Box& b) {
  if (!j.contains(key)) return;
  const auto& o = j.at(key);
  b.lo = detail::vec3_from(o.at("min"), std::string(key) + ".min");
  b.hi = detail::vec3_from(o.at("max"), std::string(key) + ".max");
}

// Limits yaw rate, climb rate and speed of the commanded velocity.
Vec3 apply_kinematic_limits(const Vec3& cmd, const Vec3& prev_vel, const EnvConfig& cfg) {
  Vec3 v = cmd;
  Eigen::Vector2d horiz(v.x(), v.y());
  const Eigen::Vector2d prev_h(prev_vel.x(), prev_vel.y());
  const double max_turn = cfg.max_heading_change_deg * std::numbers::pi / 180.0;
  if (prev_h.norm() > 1e-6 && horiz.norm() > 1e-9) {
    const double prev_heading = std::atan2(prev_h.y(), prev_h.x());
    const double turn = wrap_angle(std::atan2(horiz.y(), horiz.x()) - prev_heading);
    if (std::abs(turn) > max_turn) {
      const double heading = prev_heading + std::copysign(max_turn, turn);
      const double mag = horiz.norm();
      horiz = mag * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    }
  }
  if (horiz.norm() > cfg.max_speed) horiz *= cfg.max_speed / horiz.norm();
  v.x() = horiz.x();
  v.y() = horiz.y();
  v.z() = std::clamp(v.z(), -cfg.max_climb_rate, cfg.max_climb_rate);
  return v;
}

// Constant-velocity obstacle, reflected off the airspace walls.
ObstacleState advance_obstacle(const ObstacleState& obs, const Box& airspace, double dt) {
  ObstacleState next = obs;
  next.position += dt * obs.velocity;
  for (int k = 0; k < 3; ++k) {
    if (next.position(k) < airspace.lo(k)) {
      next.position(k) = 2.0 * airspace.lo(k) - next.position(k);
      next.velocity(k) = -next.velocity(k);
    } else if (next.position(k) > airspace.hi(k)) {
      next.position(k) = 2.0 * airspace.hi(k) - next.position(k);
      next.velocity(k) = -next.velocity(k);
    }
  }
  next.position = airspace.clamp(next.position);
  return next;
}

}  // namespace

void EnvConfig::validate() const {
  validate_box(airspace, "airspace");
  validate_box(start_region, "start_region");
  validate_box(goal_region, "goal_region");
  if (!airspace.contains(start_region.lo) || !airspace.contains(start_region.hi)) {
    throw ConfigError("start_region must lie inside the airspace");
  }
  if (!airspace.contains(goal_region.lo) || !airspace.contains(goal_region.hi)) {
    throw ConfigError("goal_region must lie inside the airspace");
  }
  if (min_goal_distance < 200.0) throw ConfigError("min_goal_distance must be >= 200 m");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(cruise_speed > 0.0) || !(max_speed >= cruise_speed)) {
    throw ConfigError("speeds must satisfy 0 < cruise_speed <= max_speed");
  }
  if (!(max_climb_rate > 0.0) || !(max_heading_change_deg > 0.0)) {
    throw ConfigError("kinematic limits must be positive");
  }
  if (!(obstacle_radius > 0.0)) throw ConfigError("obstacle_radius must be > 0");
  if (obstacle_max_speed < 0.0 || obstacle_max_speed > 5.0) {
    throw ConfigError("obstacle_max_speed must be in [0, 5] m/s");
  }
  if (obstacle_max_lateral_offset < 0.0 || obstacle_max_lateral_offset > 100.0) {
    throw ConfigError("obstacle_max_lateral_offset must be in [0, 100] m");
  }
  if (!(obstacle_segment_lo >= 0.0 && obstacle_segment_lo <= obstacle_segment_hi &&
        obstacle_segment_hi <= 1.0)) {
    throw ConfigError("obstacle segment fractions must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(safety_margin >= 0.0)) throw ConfigError("safety_margin must be >= 0");
  if (!(goal_threshold > 0.0)) throw ConfigError("goal_threshold must be > 0");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (n_satellites < 4) throw ConfigError("n_satellites must be >= 4");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(solver.tol > 0.0) || solver.max_iter < 1) throw ConfigError("invalid solver options");
}

void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = nlohmann::json::object();
  box_json(j, "airspace", c.airspace);
  box_json(j, "start_region", c.start_region);
  box_json(j, "goal_region", c.goal_region);
  j["min_goal_distance"] = c.min_goal_distance;
  j["dt"] = c.dt;
  j["cruise_speed"] = c.cruise_speed;
  j["max_speed"] = c.max_speed;
  j["max_climb_rate"] = c.max_climb_rate;
  j["max_heading_change_deg"] = c.max_heading_change_deg;
  j["obstacle_radius"] = c.obstacle_radius;
  j["obstacle_max_speed"] = c.obstacle_max_speed;
  j["obstacle_max_lateral_offset"] = c.obstacle_max_lateral_offset;
  j["obstacle_segment"] = {c.obstacle_segment_lo, c.obstacle_segment_hi};
  j["safety_margin"] = c.safety_margin;
  j["goal_threshold"] = c.goal_threshold;
  j["max_steps"] = c.max_steps;
  j["clock_bias_range"] = c.clock_bias_range;
  j["gnss"] = {{"n_satellites", c.n_satellites},
               {"satellite_radius", c.satellite_radius},
               {"constellation_seed", c.constellation_seed},
               {"noise_sigma", c.noise_sigma},
               {"tol", c.solver.tol},
               {"max_iter", c.solver.max_iter}};
}

void from_json(const nlohmann::json& j, EnvConfig& c) {
  using detail::read_opt;
  box_from(j, "airspace", c.airspace);
  box_from(j, "start_region", c.start_region);
  box_from(j, "goal_region", c.goal_region);
  read_opt(j, "min_goal_distance", c.min_goal_distance);
  read_opt(j, "dt", c.dt);
  read_opt(j, "cruise_speed", c.cruise_speed);
  read_opt(j, "max_speed", c.max_speed);
  read_opt(j, "max_climb_rate", c.max_climb_rate);
  read_opt(j, "max_heading_change_deg", c.max_heading_change_deg);
  read_opt(j, "obstacle_radius", c.obstacle_radius);
  read_opt(j, "obstacle_max_speed", c.obstacle_max_speed);
  read_opt(j, "obstacle_max_lateral_offset", c.obstacle_max_lateral_offset);
  if (j.contains("obstacle_segment")) {
    const auto& s = j.at("obstacle_segment");
    if (s.size() != 2) throw ConfigError("obstacle_segment must be [lo, hi]");
    c.obstacle_segment_lo = s[0].get<double>();
    c.obstacle_segment_hi = s[1].get<double>();
  }
  read_opt(j, "safety_margin", c.safety_margin);
  read_opt(j, "goal_threshold", c.goal_threshold);
  read_opt(j, "max_steps", c.max_steps);
  read_opt(j, "clock_bias_range", c.clock_bias_range);
  if (j.contains("gnss")) {
    const auto& g = j.at("gnss");
    read_opt(g, "n_satellites", c.n_satellites);
    read_opt(g, "satellite_radius", c.satellite_radius);
    read_opt(g, "constellation_seed", c.constellation_seed);
    read_opt(g, "noise_sigma", c.noise_sigma);
    read_opt(g, "tol", c.solver.tol);
    read_opt(g, "max_iter", c.solver.max_iter);
  }
  c.validate();
}

ActionVec ActionVec::clamped(double rho0, double sigma0, double theta) {
  ActionVec a;
  a.rho0 = std::clamp(rho0, kStrengthLo, kStrengthHi);
  a.sigma0 = std::clamp(sigma0, kStrengthLo, kStrengthHi);
  a.theta = std::clamp(theta, kThetaLo, kThetaHi);
  return a;
}

std::string to_string(TerminalEvent e) {
  switch (e) {
    case TerminalEvent::none: return "none";
    case TerminalEvent::collision: return "collision";
    case TerminalEvent::goal_reached: return "goal_reached";
    case TerminalEvent::timeout: return "timeout";
  }
  return "none";
}

std::pair<Eigen::Matrix3d, Eigen::Matrix3d> flow_field_matrices(const Vec3& uav_pos,
                                                                const ObstacleState& obstacle,
                                                                const ActionVec& action) {
  const Vec3 rel = uav_pos - obstacle.position;
  const double dist = rel.norm();
  if (dist < kMinObstacleSeparation) {
    throw GeometryError("UAV position coincides with the obstacle center");
  }
  const double r = obstacle.radius;
  const double gamma = (dist / r) * (dist / r);
  // Gradient of gamma: the outward normal of the distance field.
  const Vec3 n = 2.0 * rel / (r * r);
  const Vec3 n_hat = rel / dist;

  const double w_rep = gamma <= 1.0 ? 1.0 : std::exp((1.0 - gamma) / action.rho0);
  const double w_tan = gamma <= 1.0 ? 1.0 : std::exp((1.0 - gamma) / action.sigma0);

  // Reference tangent is horizontal; theta rotates it about the normal.
  Vec3 t_ref = n_hat.cross(Vec3::UnitZ());
  if (t_ref.norm() < 1e-6) t_ref = n_hat.cross(Vec3::UnitX());
  t_ref.normalize();
  const Vec3 t = std::cos(action.theta) * t_ref + std::sin(action.theta) * n_hat.cross(t_ref);

  const Eigen::Matrix3d m_rep = -w_rep * (n * n.transpose()) / n.squaredNorm();
  const Eigen::Matrix3d m_tan = w_tan * (t * n.transpose()) / (t.norm() * n.norm());
  return {m_rep, m_tan};
}

WorldState step_dynamics(const WorldState& world, const ActionVec& action,
                         const EnvConfig& cfg) {
  const Vec3& nav = world.believed_pos;
  const Vec3 u = cfg.cruise_speed * unit_or_zero(world.goal - nav);
  const Vec3& v_obs = world.obstacle.velocity;
  const auto [m_rep, m_tan] = flow_field_matrices(nav, world.obstacle, action);
  const Vec3 u_bar =
      (Eigen::Matrix3d::Identity() + m_rep + m_tan) * (u - v_obs) + v_obs;
  const Vec3 vel = apply_kinematic_limits(u_bar, world.uav_vel, cfg);

  WorldState next = world;
  next.uav_pos = world.uav_pos + world.dt * vel;
  next.uav_vel = vel;
  // Geofence: the vehicle cannot leave the airspace.
  const Vec3 fenced = cfg.airspace.clamp(next.uav_pos);
  for (int k = 0; k < 3; ++k) {
    if (fenced(k) != next.uav_pos(k)) next.uav_vel(k) = 0.0;
  }
  next.uav_pos = fenced;
  next.obstacle = advance_obstacle(world.obstacle, cfg.airspace, world.dt);
  next.t = world.t + 1;
  return next;
}

Observation build_observation(const gnss::PvtSolution& pvt, const WorldState& world) {
  if (!pvt.converged) {
    throw ConfigError("cannot build an observation from a non-converged PVT solution");
  }
  Observation obs;
  obs.position = pvt.estimate.position;
  const Vec3 p_rel = world.obstacle.position - obs.position;
  const double dist = p_rel.norm();
  const Vec3 dir = unit_or_zero(p_rel);
  // p_rel . (p_rel - r * dir) / |p_rel| reduces to |p_rel| - r.
  const double threat = dist > 0.0 ? p_rel.dot(p_rel - world.obstacle.radius * dir) / dist : 0.0;
  obs.phi.segment<3>(0) = threat * dir;
  obs.phi.segment<3>(3) = world.goal - obs.position;
  obs.phi.segment<3>(6) = world.obstacle.velocity;
  return obs;
}

RewardBreakdown reward(const WorldState& world_next, const EnvConfig& cfg) {
  RewardBreakdown out;
  const double r = world_next.obstacle.radius;
  const double d = (world_next.obstacle.position - world_next.uav_pos).norm();
  const double xi = cfg.safety_margin;
  if (d <= r) {
    out.collision = -1.0 + (d - r) / r;
  } else if (d < r + xi) {
    out.threat = -0.3 + (d - (r + xi)) / (r + xi);
  }
  const double to_goal = (world_next.goal - world_next.uav_pos).norm();
  const double initial = (world_next.goal - world_next.start).norm();
  const bool at_goal = to_goal <= cfg.goal_threshold;
  out.goal_seek = (initial > 0.0 ? -to_goal / initial : 0.0) + (at_goal ? 3.0 : 0.0);
  out.total = out.collision + out.threat + out.goal_seek;
  if (d <= r) {
    out.terminal_event = TerminalEvent::collision;
  } else if (at_goal) {
    out.terminal_event = TerminalEvent::goal_reached;
  }
  return out;
}

Sensing sense(const WorldState& world, const gnss::Constellation& constellation,
              const EnvConfig& cfg, const spoofer::AttackConfig* attack, Rng& rng) {
  Sensing s;
  if (attack != nullptr) s.phase = spoofer::attack_alpha(world.t, *attack);
  if (s.phase.active) {
    const Vec3 forged = spoofer::spoof_position(world.uav_pos, s.phase, *attack);
    s.measurements = spoofer::spoof_pseudoranges(forged, world.clock_bias, constellation);
    if (attack->add_receiver_noise) {
      for (double& v : s.measurements.values) v += gaussian(rng, cfg.noise_sigma);
    }
  } else {
    s.measurements = gnss::measure_pseudoranges({world.uav_pos, world.clock_bias},
                                                constellation, cfg.noise_sigma, rng);
  }
  s.measurements.timestamp = world.t * world.dt;
  s.pvt = gnss::solve_pvt(s.measurements, constellation, cfg.solver);
  return s;
}

ResetResult env_reset(const EnvConfig& cfg, const gnss::Constellation& constellation,
                      Rng& rng, const spoofer::AttackConfig* attack) {
  cfg.validate();
  auto sample_in = [&rng](const Box& b) {
    return Vec3(uniform(rng, b.lo.x(), b.hi.x()), uniform(rng, b.lo.y(), b.hi.y()),
                uniform(rng, b.lo.z(), b.hi.z()));
  };

  ResetResult out;
  WorldState& w = out.world;
  w.dt = cfg.dt;
  w.start = sample_in(cfg.start_region);
  int attempts = 0;
  do {
    if (++attempts > 10000) {
      throw ConfigError("goal_region has no point at least min_goal_distance from the start");
    }
    w.goal = sample_in(cfg.goal_region);
  } while ((w.goal - w.start).norm() < cfg.min_goal_distance);

  const Vec3 axis = (w.goal - w.start).normalized();
  const double frac = uniform(rng, cfg.obstacle_segment_lo, cfg.obstacle_segment_hi);
  Vec3 side = axis.cross(Vec3::UnitZ());
  if (side.norm() < 1e-6) side = axis.cross(Vec3::UnitX());
  side.normalize();
  const Vec3 up = axis.cross(side);
  const double phase = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double offset = uniform(rng, 0.0, cfg.obstacle_max_lateral_offset);
  const Vec3 center = w.start + frac * (w.goal - w.start) +
                      offset * (std::cos(phase) * side + std::sin(phase) * up);
  w.obstacle.position = cfg.airspace.clamp(center);
  w.obstacle.radius = cfg.obstacle_radius;
  const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double speed = uniform(rng, 0.0, cfg.obstacle_max_speed);
  w.obstacle.velocity = Vec3(speed * std::cos(heading), speed * std::sin(heading), 0.0);

  w.uav_pos = w.start;
  w.uav_vel = Vec3::Zero();
  w.clock_bias = uniform(rng, -cfg.clock_bias_range, cfg.clock_bias_range);
  w.t = 0;

  out.sensing = sense(w, constellation, cfg, attack, rng);
  w.believed_pos = out.sensing.pvt.estimate.position;
  out.obs = build_observation(out.sensing.pvt, w);
  return out;
}

StepResult env_step(const WorldState& world, const ActionVec& action, const EnvConfig& cfg,
                    const gnss::Constellation& constellation,
                    const spoofer::AttackConfig* attack, Rng& rng) {
  StepResult out;
  out.world = step_dynamics(world, action, cfg);
  out.reward = reward(out.world, cfg);
  out.sensing = sense(out.world, constellation, cfg, attack, rng);
  out.world.believed_pos = out.sensing.pvt.estimate.position;
  out.obs = build_observation(out.sensing.pvt, out.world);
  if (out.reward.terminal_event == TerminalEvent::none && out.world.t >= cfg.max_steps) {
    out.reward.terminal_event = TerminalEvent::timeout;
  }
  out.done = out.reward.terminal_event != TerminalEvent::none;
  return out;
}

}  // namespace spoofwatch::env
