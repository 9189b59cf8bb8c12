#include "spoofwatch/ddpg.hpp"
#include "spoofwatch/mlp.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace spoofwatch;
using namespace spoofwatch::nn;

namespace {

using oracles::weighted_output;

double gradient_check(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& up) {
  return oracles::mlp_gradient_error(net, x, up);
}

env::Observation random_obs(Rng& rng) {
  env::Observation o;
  for (int i = 0; i < 9; ++i) o.phi(i) = uniform(rng, -500, 500);
  o.phi.tail<3>() /= 100.0;
  return o;
}

std::vector<ddpg::Transition> random_batch(Rng& rng, int n, bool terminal) {
  std::vector<ddpg::Transition> b;
  for (int i = 0; i < n; ++i) {
    ddpg::Transition t;
    t.phi = random_obs(rng).phi;
    t.next_phi = random_obs(rng).phi;
    t.action = Vec3(uniform(rng, 0.1, 3), uniform(rng, 0.1, 3), uniform(rng, -3, 3));
    t.reward = uniform(rng, -2, 1);
    t.done = terminal;
    b.push_back(t);
  }
  return b;
}

ddpg::Agent small_agent(std::uint64_t seed) {
  Rng rng(seed);
  ddpg::AgentConfig cfg;
  cfg.hidden = {16, 16};
  return ddpg::make_agent(cfg, rng);
}

}  // namespace

TEST_CASE("mlp forward special cases") {
  Rng rng(1);
  const auto zero = Mlp::create({4, 5, 3}, Activation::relu, Activation::tanh, Init::zero, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(4);
  CHECK(mlp_forward(zero, x).first.isZero(0.0));

  Layer id;
  id.weight = Eigen::MatrixXd::Identity(4, 4);
  id.bias = Eigen::VectorXd::Zero(4);
  const Mlp ident({id});
  CHECK(mlp_forward(ident, x).first == x);

  CHECK_THROWS_AS(mlp_forward(ident, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("mlp gradients match central differences") {
  Rng rng(2);
  SUBCASE("9-8-1") {
    const auto net = Mlp::create({9, 8, 1}, Activation::tanh, Activation::identity,
                                 Init::fan_in_uniform, rng, 0.5);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 1);
    CHECK(gradient_check(net, x, Eigen::MatrixXd::Ones(1, 1)) < 1e-4);
  }
  SUBCASE("actor shape") {
    const auto net = Mlp::create({9, 64, 64, 3}, Activation::relu, Activation::tanh,
                                 Init::fan_in_uniform, rng, 0.5);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 4);
    const Eigen::MatrixXd up = Eigen::MatrixXd::Random(3, 4);
    CHECK(gradient_check(net, x, up) < 1e-4);
  }
  SUBCASE("critic shape") {
    const auto net = Mlp::create({12, 64, 64, 1}, Activation::relu, Activation::identity,
                                 Init::fan_in_uniform, rng, 0.5);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(12, 4);
    const Eigen::MatrixXd up = Eigen::MatrixXd::Random(1, 4);
    CHECK(gradient_check(net, x, up) < 1e-4);
  }
}

TEST_CASE("input gradient matches central differences") {
  Rng rng(3);
  const auto net = Mlp::create({5, 7, 2}, Activation::tanh, Activation::tanh,
                               Init::fan_in_uniform, rng, 0.5);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 1);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Random(2, 1);
  const auto g = mlp_gradients(net, forward_batch(net, x), up);
  for (int i = 0; i < 5; ++i) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(i, 0) += 1e-6;
    xm(i, 0) -= 1e-6;
    const double fd = (weighted_output(net, xp, up) - weighted_output(net, xm, up)) / 2e-6;
    CHECK(std::abs(fd - g.input(i, 0)) < 1e-7);
  }
}

TEST_CASE("linear least squares gradient is closed form") {
  Rng rng(4);
  Layer l;
  l.weight = Eigen::MatrixXd::Random(2, 3);
  l.bias = Eigen::VectorXd::Random(2);
  const Mlp net({l});
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(2, 5);
  const auto cache = forward_batch(net, x);
  const Eigen::MatrixXd err = cache.output - y;  // d/dout of 0.5 ||out - y||^2
  const auto g = mlp_gradients(net, cache, err);
  CHECK((g.weight[0] - err * x.transpose()).norm() < 1e-9);
  CHECK((g.bias[0] - err.rowwise().sum()).norm() < 1e-9);

  const auto zero = mlp_gradients(net, cache, Eigen::MatrixXd::Zero(2, 5));
  CHECK(zero.weight[0].isZero(0.0));
  CHECK(zero.bias[0].isZero(0.0));
}

TEST_CASE("soft update") {
  Rng rng(5);
  auto a = Mlp::create({3, 4, 1}, Activation::relu, Activation::identity, Init::fan_in_uniform, rng);
  auto b = Mlp::create({3, 4, 1}, Activation::relu, Activation::identity, Init::fan_in_uniform, rng);
  const auto pa = a.parameters(), pb = b.parameters();
  soft_update(b, a, 0.25);
  const auto mixed = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(mixed[i] == doctest::Approx(0.25 * pa[i] + 0.75 * pb[i]));
  soft_update(b, a, 1.0);
  CHECK(b.parameters() == pa);
}

TEST_CASE("actions stay in bounds and are deterministic without noise") {
  auto agent = small_agent(6);
  Rng rng(7);
  const auto obs = random_obs(rng);
  const auto a1 = ddpg::act(agent, obs, 0.0, rng);
  const auto a2 = ddpg::act(agent, obs, 0.0, rng);
  CHECK(a1.as_vector() == a2.as_vector());
  for (int i = 0; i < 1000; ++i) {
    const auto a = ddpg::act(agent, random_obs(rng), 0.3, rng);
    REQUIRE(a.rho0 >= env::ActionVec::kStrengthLo);
    REQUIRE(a.rho0 <= env::ActionVec::kStrengthHi);
    REQUIRE(a.sigma0 >= env::ActionVec::kStrengthLo);
    REQUIRE(a.sigma0 <= env::ActionVec::kStrengthHi);
    REQUIRE(a.theta >= env::ActionVec::kThetaLo);
    REQUIRE(a.theta <= env::ActionVec::kThetaHi);
  }
  const env::ActionVec mid = ddpg::action_from_unit(Vec3::Zero());
  CHECK(ddpg::unit_from_action(mid).norm() < 1e-12);
}

TEST_CASE("zero-initialized critic outputs zero") {
  Rng rng(8);
  const auto agent = ddpg::make_agent(ddpg::AgentConfig{}, rng, Init::zero);
  for (int i = 0; i < 10; ++i)
    CHECK(ddpg::q_value(agent, random_obs(rng), env::ActionVec::clamped(2, 1, 0.5)) == 0.0);
}

TEST_CASE("replay buffer") {
  ddpg::ReplayBuffer buf(5);
  for (int i = 0; i < 8; ++i) {
    ddpg::Transition t;
    t.reward = i;
    buf.push(t);
  }
  CHECK(buf.size() == 5);
  Rng rng(9);
  const auto s = buf.sample(5, rng);
  std::set<double> seen;
  for (const auto& t : s) seen.insert(t.reward);
  CHECK(seen == std::set<double>{3, 4, 5, 6, 7});
  CHECK_THROWS_AS(ddpg::ReplayBuffer(0), ConfigError);
}

TEST_CASE("exploration schedule") {
  ddpg::TrainConfig cfg;
  cfg.episodes = 200;
  cfg.warmup_episodes = 30;
  CHECK(ddpg::noise_for_episode(cfg, 0) == 0.0);
  CHECK(ddpg::noise_for_episode(cfg, 29) == 0.0);
  CHECK(ddpg::noise_for_episode(cfg, 30) == doctest::Approx(cfg.noise_start));
  CHECK(ddpg::noise_for_episode(cfg, 199) == doctest::Approx(cfg.noise_end));
}

TEST_CASE("terminal transitions have reward targets") {
  auto agent = small_agent(10);
  Rng rng(11);
  const auto batch = random_batch(rng, 16, true);
  const auto y = ddpg::td_targets(agent, batch, 0.99);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(y(static_cast<Eigen::Index>(i)) == batch[i].reward);
}

TEST_CASE("critic loss decreases on a fixed batch") {
  auto agent = small_agent(12);
  Rng rng(13);
  const auto batch = random_batch(rng, 32, false);
  const double first = ddpg::train_step(agent, batch, 0.99, 0.005).critic_loss;
  double last = first;
  for (int i = 0; i < 99; ++i) last = ddpg::train_step(agent, batch, 0.99, 0.005).critic_loss;
  CHECK(last < first);
}

TEST_CASE("soft update tau 1 copies the online networks") {
  auto agent = small_agent(14);
  Rng rng(15);
  ddpg::train_step(agent, random_batch(rng, 8, false), 0.99, 1.0);
  CHECK(agent.target_actor.parameters() == agent.actor.parameters());
  CHECK(agent.target_critic.parameters() == agent.critic.parameters());
}

TEST_CASE("actor step follows the critic's gradient") {
  // One actor update with a tiny learning rate must not decrease the mean
  // critic value of the batch to first order.
  auto agent = small_agent(16);
  Rng rng(17);
  const auto batch = random_batch(rng, 32, false);
  auto mean_q = [&](const ddpg::Agent& a) {
    double s = 0.0;
    for (const auto& t : batch) {
      env::Observation o;
      o.phi = t.phi;
      s += ddpg::q_value(a, o, ddpg::policy(a, o));
    }
    return s / static_cast<double>(batch.size());
  };
  ddpg::Agent probe = agent;
  probe.critic_opt = Adam(probe.critic, 1e-12);
  probe.actor_opt = Adam(probe.actor, 1e-4);
  const double before = mean_q(probe);
  ddpg::train_step(probe, batch, 0.99, 0.005);
  CHECK(mean_q(probe) >= before);
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto agent = small_agent(18);
  const auto dir = std::filesystem::temp_directory_path() / "spoofwatch_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "agent.ckpt";
  ddpg::save_checkpoint(agent, path);
  const auto loaded = ddpg::load_checkpoint(path);
  Rng rng(19);
  for (int i = 0; i < 20; ++i) {
    const auto o = random_obs(rng);
    const auto a = ddpg::policy(agent, o);
    CHECK(ddpg::q_value(loaded, o, a) == ddpg::q_value(agent, o, a));
    CHECK(ddpg::policy(loaded, o).as_vector() == a.as_vector());
  }

  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  const auto truncated = dir / "truncated.ckpt";
  std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(ddpg::load_checkpoint(truncated), CorruptFileError);

  std::string flipped = bytes;
  flipped[flipped.size() / 2] = static_cast<char>(flipped[flipped.size() / 2] ^ 0x5a);
  const auto bad = dir / "flipped.ckpt";
  std::ofstream(bad, std::ios::binary) << flipped;
  CHECK_THROWS_AS(ddpg::load_checkpoint(bad), CorruptFileError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic") {
  env::EnvConfig env;
  const auto c = gnss::make_constellation(env.n_satellites, env.satellite_radius, env.constellation_seed);
  ddpg::TrainConfig cfg;
  cfg.episodes = 3;
  cfg.warmup_episodes = 1;
  cfg.max_steps = 60;
  cfg.batch_size = 16;
  cfg.hidden = {16, 16};
  const auto a = ddpg::train(env, c, cfg, 21);
  const auto b = ddpg::train(env, c, cfg, 21);
  CHECK(a.reward_history == b.reward_history);
  CHECK(a.agent.actor.parameters() == b.agent.actor.parameters());
}

TEST_CASE("train config validation") {
  ddpg::TrainConfig cfg;
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.hidden.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  const nlohmann::json j = cfg;
  const auto back = j.get<ddpg::TrainConfig>();
  CHECK(nlohmann::json(back) == j);
}
