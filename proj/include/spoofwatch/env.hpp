#pragma once

#include "spoofwatch/common.hpp"
#include "spoofwatch/gnss.hpp"
#include "spoofwatch/spoofer.hpp"

#include <optional>
#include <string>
#include <utility>

namespace spoofwatch::env {

using Phi = Eigen::Matrix<double, 9, 1>;

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool empty() const { return !((hi.array() > lo.array()).all()); }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(lo).cwiseMin(hi); }
};

struct EnvConfig {
  Box airspace{Vec3(0, 0, 0), Vec3(1000, 1000, 300)};
  Box start_region{Vec3(500, 50, 50), Vec3(900, 250, 150)};
  Box goal_region{Vec3(500, 700, 80), Vec3(900, 950, 220)};
  double min_goal_distance = 600.0;

  double dt = 1.0;
  double cruise_speed = 5.0;
  double max_speed = 10.0;
  double max_climb_rate = 3.0;
  double max_heading_change_deg = 30.0;

  double obstacle_radius = 30.0;
  double obstacle_max_speed = 2.0;
  double obstacle_max_lateral_offset = 50.0;
  double obstacle_segment_lo = 0.35;
  double obstacle_segment_hi = 0.65;

  double safety_margin = 0.4;
  double goal_threshold = 10.0;
  int max_steps = 500;
  double clock_bias_range = 100.0;

  int n_satellites = 8;
  double satellite_radius = 2.0e7;
  std::uint64_t constellation_seed = 0;
  double noise_sigma = 2.0;
  gnss::SolverOptions solver{};

  void validate() const;
};

void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);

struct ObstacleState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 30.0;
};

/// Ground truth of one episode. `believed_pos` is the receiver's most recent
/// fix; the guidance law steers from it, everything else here is truth.
struct WorldState {
  Vec3 uav_pos = Vec3::Zero();
  Vec3 uav_vel = Vec3::Zero();
  Vec3 believed_pos = Vec3::Zero();
  ObstacleState obstacle;
  Vec3 goal = Vec3::Zero();
  Vec3 start = Vec3::Zero();
  double clock_bias = 0.0;
  int t = 0;
  double dt = 1.0;
};

/// [threat (3), goal - P_uav (3), v_obs (3)] built from the estimated position.
struct Observation {
  Phi phi = Phi::Zero();
  Vec3 position = Vec3::Zero();
};

struct ActionVec {
  static constexpr double kStrengthLo = 0.1;
  static constexpr double kStrengthHi = 3.0;
  static constexpr double kThetaLo = -3.14159265358979323846;
  static constexpr double kThetaHi = 3.14159265358979323846;

  double rho0 = 1.0;
  double sigma0 = 1.0;
  double theta = 0.0;

  /// Clamps every component into bounds.
  static ActionVec clamped(double rho0, double sigma0, double theta);
  Vec3 as_vector() const { return Vec3(rho0, sigma0, theta); }
};

enum class TerminalEvent { none, collision, goal_reached, timeout };
std::string to_string(TerminalEvent e);

struct RewardBreakdown {
  double collision = 0.0;
  double threat = 0.0;
  double goal_seek = 0.0;
  double total = 0.0;
  TerminalEvent terminal_event = TerminalEvent::none;
};

/// Repulsive and tangential modulation matrices around one spherical obstacle.
/// Throws GeometryError when the UAV sits on the obstacle center.
std::pair<Eigen::Matrix3d, Eigen::Matrix3d> flow_field_matrices(const Vec3& uav_pos,
                                                                const ObstacleState& obstacle,
                                                                const ActionVec& action);

/// Advances the truth by one step. The attractive vector and flow field are
/// evaluated at `world.believed_pos`; the displacement is applied to the
/// true position. Moves the obstacle and increments t.
WorldState step_dynamics(const WorldState& world, const ActionVec& action,
                         const EnvConfig& cfg);

/// Throws ConfigError for a non-converged fix.
Observation build_observation(const gnss::PvtSolution& pvt, const WorldState& world);

/// Reward terms from true geometry only.
RewardBreakdown reward(const WorldState& world_next, const EnvConfig& cfg);

/// Pseudoranges for the current truth (or forged ones when an attack is live),
/// the PVT fix, and the attack phase used.
struct Sensing {
  gnss::PseudorangeSet measurements;
  gnss::PvtSolution pvt;
  spoofer::AttackPhase phase;
};

Sensing sense(const WorldState& world, const gnss::Constellation& constellation,
              const EnvConfig& cfg, const spoofer::AttackConfig* attack, Rng& rng);

struct ResetResult {
  WorldState world;
  Observation obs;
  Sensing sensing;
};

ResetResult env_reset(const EnvConfig& cfg, const gnss::Constellation& constellation,
                      Rng& rng, const spoofer::AttackConfig* attack = nullptr);

struct StepResult {
  WorldState world;
  Observation obs;
  Sensing sensing;
  RewardBreakdown reward;
  bool done = false;
};

StepResult env_step(const WorldState& world, const ActionVec& action, const EnvConfig& cfg,
                    const gnss::Constellation& constellation,
                    const spoofer::AttackConfig* attack, Rng& rng);

}  // namespace spoofwatch::env
