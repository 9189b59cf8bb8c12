#include "spoofwatch/env.hpp"

#include <doctest.h>

#include <cmath>

using namespace spoofwatch;
using namespace spoofwatch::env;

namespace {

EnvConfig quiet_config() {
  EnvConfig cfg;
  cfg.noise_sigma = 0.0;
  return cfg;
}

gnss::Constellation constellation() { return gnss::make_constellation(8, 2.0e7, 0); }

WorldState far_obstacle_world(const Vec3& pos, const Vec3& goal) {
  WorldState w;
  w.uav_pos = w.believed_pos = w.start = pos;
  w.goal = goal;
  w.obstacle.position = Vec3(1e7, 1e7, 1e7);
  w.obstacle.velocity = Vec3::Zero();
  w.obstacle.radius = 30.0;
  return w;
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

}  // namespace

TEST_CASE("flow field vanishes far from the obstacle") {
  ObstacleState obs{Vec3::Zero(), Vec3::Zero(), 30.0};
  const auto [rep, tan] = flow_field_matrices(Vec3(3000, 0, 0), obs, ActionVec{});
  CHECK(rep.norm() < 1e-6);
  CHECK(tan.norm() < 1e-6);
}

TEST_CASE("flow field cancels the normal component on the surface") {
  ObstacleState obs{Vec3(10, 20, 30), Vec3::Zero(), 30.0};
  const Vec3 n = Vec3(1, 2, -1).normalized();
  const Vec3 p = obs.position + 30.0 * n;
  for (double rho : {0.1, 1.0, 3.0}) {
    const auto [rep, tan] = flow_field_matrices(p, obs, ActionVec::clamped(rho, 1.0, 0.4));
    CHECK((rep * n).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(((Eigen::Matrix3d::Identity() + rep) * n).norm() < 1e-12);
  }
  CHECK_THROWS_AS(flow_field_matrices(obs.position, obs, ActionVec{}), GeometryError);
}

TEST_CASE("straight-line step without an obstacle") {
  const auto cfg = quiet_config();
  const Vec3 p(500, 100, 100), goal(600, 800, 150);
  const auto w = far_obstacle_world(p, goal);
  const auto next = step_dynamics(w, ActionVec{}, cfg);
  const Vec3 expected = p + cfg.dt * cfg.cruise_speed * (goal - p).normalized();
  CHECK((next.uav_pos - expected).norm() < 1e-9);
  CHECK(next.t == 1);

  const auto at_goal = step_dynamics(far_obstacle_world(goal, goal), ActionVec{}, cfg);
  CHECK((at_goal.uav_pos - goal).norm() < 1e-12);
}

TEST_CASE("distance to goal decreases without obstacle influence") {
  const auto cfg = quiet_config();
  auto w = far_obstacle_world(Vec3(520, 80, 60), Vec3(880, 900, 200));
  double prev = (w.goal - w.uav_pos).norm();
  while (prev > cfg.dt * cfg.cruise_speed) {
    w = step_dynamics(w, ActionVec{}, cfg);
    w.believed_pos = w.uav_pos;
    const double d = (w.goal - w.uav_pos).norm();
    REQUIRE(d < prev);
    prev = d;
  }
}

TEST_CASE("static obstacle on the path is never hit dead centre") {
  const auto cfg = quiet_config();
  double closest = 1e300;
  for (double rho : {0.1, 1.0, 3.0})
    for (double sigma : {0.1, 1.0, 3.0})
      for (double theta : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        const auto a = ActionVec::clamped(rho, sigma, theta);
        auto w = far_obstacle_world(Vec3(500, 100, 100), Vec3(500, 900, 100));
        w.obstacle.position = Vec3(500, 500, 100);
        for (int t = 0; t < 400; ++t) {
          w = step_dynamics(w, a, cfg);
          w.believed_pos = w.uav_pos;
          closest = std::min(closest, (w.uav_pos - w.obstacle.position).norm());
        }
      }
  CHECK(closest > 0.0);
}

TEST_CASE("observation blocks") {
  const auto c = constellation();
  WorldState w = far_obstacle_world(Vec3(100, 200, 50), Vec3(100, 200, 50));
  w.obstacle.position = Vec3(160, 200, 50);
  w.obstacle.velocity = Vec3::Zero();
  gnss::PvtSolution pvt;
  pvt.converged = true;
  pvt.estimate.position = w.uav_pos;
  const auto obs = build_observation(pvt, w);
  CHECK(obs.phi.segment<3>(3).norm() == 0.0);
  CHECK(obs.phi.segment<3>(6).norm() == 0.0);
  // |p_rel| = 2r along +x: p_rel . (p_rel - r unit) / |p_rel| = (4r^2 - 2r^2) / 2r = r.
  CHECK(obs.phi(0) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(std::abs(obs.phi(1)) < 1e-9);
  CHECK(std::abs(obs.phi(2)) < 1e-9);

  pvt.converged = false;
  CHECK_THROWS_AS(build_observation(pvt, w), ConfigError);
}

TEST_CASE("reward terms") {
  const auto cfg = quiet_config();
  WorldState w = far_obstacle_world(Vec3(0, 0, 0), Vec3(1000, 0, 0));
  w.start = Vec3(0, 0, 0);
  w.uav_pos = Vec3(0, 300, 0);
  w.obstacle.position = w.uav_pos + Vec3(30, 0, 0);
  CHECK(reward(w, cfg).collision == doctest::Approx(-1.0));
  CHECK(reward(w, cfg).terminal_event == TerminalEvent::collision);
  w.obstacle.position = w.uav_pos;
  CHECK(reward(w, cfg).collision == doctest::Approx(-2.0));

  WorldState g = far_obstacle_world(Vec3(1000, 0, 0), Vec3(1000, 0, 0));
  g.start = Vec3(0, 0, 0);
  CHECK(reward(g, cfg).goal_seek == doctest::Approx(3.0));
  CHECK(reward(g, cfg).terminal_event == TerminalEvent::goal_reached);

  WorldState s = far_obstacle_world(Vec3(0, 0, 0), Vec3(1000, 0, 0));
  CHECK(reward(s, cfg).total == doctest::Approx(-1.0));
  CHECK(reward(s, cfg).terminal_event == TerminalEvent::none);
}

TEST_CASE("reward is continuous at the zone boundaries") {
  const auto cfg = quiet_config();
  const double r = 30.0, xi = cfg.safety_margin;
  auto at = [&](double d) {
    WorldState w = far_obstacle_world(Vec3(0, 0, 0), Vec3(1000, 0, 0));
    w.obstacle.position = Vec3(0, d, 0);
    return reward(w, cfg);
  };
  CHECK(std::abs(at(r - 1e-9).collision - (-1.0)) < 1e-6);
  CHECK(std::abs(at(r + 1e-9).threat - (-0.3 - xi / (r + xi))) < 1e-6);
  CHECK(std::abs(at(r + xi - 1e-9).threat - (-0.3)) < 1e-6);
  CHECK(at(r + xi + 1e-9).threat == 0.0);
}

TEST_CASE("env_reset placement") {
  const auto cfg = quiet_config();
  const auto c = constellation();
  Rng a(11), b(11);
  const auto r1 = env_reset(cfg, c, a);
  const auto r2 = env_reset(cfg, c, b);
  CHECK(r1.world.uav_pos == r2.world.uav_pos);
  CHECK(r1.world.goal == r2.world.goal);
  CHECK(r1.obs.phi == r2.obs.phi);

  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto r = env_reset(cfg, c, rng);
    REQUIRE(cfg.start_region.contains(r.world.start));
    REQUIRE(cfg.airspace.contains(r.world.goal));
    REQUIRE((r.world.goal - r.world.start).norm() >= cfg.min_goal_distance);
    REQUIRE(segment_distance(r.world.obstacle.position, r.world.start, r.world.goal) <= 100.0);
    REQUIRE(r.world.obstacle.velocity.norm() <= cfg.obstacle_max_speed + 1e-12);
  }
}

TEST_CASE("env config errors") {
  EnvConfig cfg;
  cfg.airspace.hi = cfg.airspace.lo;
  const auto c = constellation();
  Rng rng(1);
  CHECK_THROWS_AS(env_reset(cfg, c, rng), ConfigError);

  EnvConfig fast;
  fast.obstacle_max_speed = 6.0;
  CHECK_THROWS_AS(fast.validate(), ConfigError);
}

TEST_CASE("env_step recovers truth without noise or attack") {
  const auto cfg = quiet_config();
  const auto c = constellation();
  Rng rng(13);
  auto r = env_reset(cfg, c, rng);
  CHECK((r.obs.position - r.world.uav_pos).norm() < 1e-6);
  const auto s = env_step(r.world, ActionVec{}, cfg, c, nullptr, rng);
  CHECK((s.obs.position - s.world.uav_pos).norm() < 1e-6);
}

TEST_CASE("env_step times out at max_steps") {
  const auto cfg = quiet_config();
  const auto c = constellation();
  Rng rng(14);
  auto r = env_reset(cfg, c, rng);
  WorldState w = r.world;
  w.t = cfg.max_steps - 2;
  auto s = env_step(w, ActionVec{}, cfg, c, nullptr, rng);
  CHECK_FALSE(s.done);
  s = env_step(s.world, ActionVec{}, cfg, c, nullptr, rng);
  CHECK(s.done);
  CHECK(s.reward.terminal_event == TerminalEvent::timeout);
}

TEST_CASE("full-strength drift puts the fix on the target") {
  const auto cfg = quiet_config();
  const auto c = constellation();
  Rng rng(15);
  spoofer::AttackConfig attack;
  attack.enabled = true;
  attack.t_start = 0;
  attack.drift_duration = 1;
  auto r = env_reset(cfg, c, rng, &attack);
  WorldState w = r.world;
  w.t = 5;
  const auto s = env_step(w, ActionVec{}, cfg, c, &attack, rng);
  CHECK(s.sensing.phase.alpha == 1.0);
  CHECK(s.obs.position.norm() < 1e-4);
  CHECK(s.world.uav_pos.norm() > 100.0);
}

TEST_CASE("reward ignores the spoofed fix") {
  const auto cfg = quiet_config();
  const auto c = constellation();
  Rng rng(16);
  auto r = env_reset(cfg, c, rng);
  spoofer::AttackConfig attack;
  attack.enabled = true;
  attack.t_start = 0;
  attack.drift_duration = 1;
  Rng ra(17), rb(17);
  const auto clean = env_step(r.world, ActionVec{}, cfg, c, nullptr, ra);
  const auto spoofed = env_step(r.world, ActionVec{}, cfg, c, &attack, rb);
  CHECK(clean.world.uav_pos == spoofed.world.uav_pos);
  CHECK(clean.reward.total == spoofed.reward.total);
  CHECK((clean.obs.position - spoofed.obs.position).norm() > 100.0);
}

TEST_CASE("env_step is bit-reproducible") {
  const auto cfg = EnvConfig{};
  const auto c = constellation();
  Rng a(18), b(18);
  auto ra = env_reset(cfg, c, a);
  auto rb = env_reset(cfg, c, b);
  WorldState wa = ra.world, wb = rb.world;
  for (int t = 0; t < 50; ++t) {
    const auto sa = env_step(wa, ActionVec::clamped(1.5, 0.5, 0.3), cfg, c, nullptr, a);
    const auto sb = env_step(wb, ActionVec::clamped(1.5, 0.5, 0.3), cfg, c, nullptr, b);
    REQUIRE(sa.world.uav_pos == sb.world.uav_pos);
    REQUIRE(sa.obs.phi == sb.obs.phi);
    REQUIRE(sa.reward.total == sb.reward.total);
    wa = sa.world;
    wb = sb.world;
    if (sa.done) break;
  }
}
