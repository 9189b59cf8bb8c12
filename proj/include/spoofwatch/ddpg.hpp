#pragma once

#include "spoofwatch/common.hpp"
#include "spoofwatch/env.hpp"
#include "spoofwatch/mlp.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace spoofwatch::ddpg {

/// Fixed divisors applied to the observation before it reaches a network.
struct ObsScaling {
  double distance = 1000.0;
  double velocity = 10.0;
};

struct AgentConfig {
  std::vector<int> hidden{64, 64};
  ObsScaling scaling{};
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
};

/// Actor 9 -> hidden -> 3 (tanh head mapped onto the action bounds) and critic
/// 12 -> hidden -> 1 over [scaled phi, action in [-1, 1]^3].
struct Agent {
  nn::Mlp actor, critic, target_actor, target_critic;
  nn::Adam actor_opt, critic_opt;
  ObsScaling scaling{};
};

Agent make_agent(const AgentConfig& cfg, Rng& rng, nn::Init init = nn::Init::fan_in_uniform);

Eigen::VectorXd scale_observation(const env::Phi& phi, const ObsScaling& s);

/// Bounds <-> [-1, 1]^3 used on the network side.
env::ActionVec action_from_unit(const Vec3& u);
Vec3 unit_from_action(const env::ActionVec& a);

/// Deterministic policy output.
env::ActionVec policy(const Agent& agent, const env::Observation& obs);

/// pi(phi) plus per-component Gaussian noise of std `noise_scale`, clamped.
env::ActionVec act(const Agent& agent, const env::Observation& obs, double noise_scale, Rng& rng);

double q_value(const Agent& agent, const env::Observation& obs, const env::ActionVec& a);

struct Transition {
  env::Phi phi = env::Phi::Zero();
  Vec3 action = Vec3::Zero();  // raw (rho0, sigma0, theta)
  double reward = 0.0;
  env::Phi next_phi = env::Phi::Zero();
  bool done = false;  // true terminal only; timeouts bootstrap
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// Uniform without replacement inside one batch.
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

struct TrainConfig {
  int episodes = 200;
  int max_steps = 500;
  double gamma = 0.99;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double noise_start = 0.3;
  double noise_end = 0.1;
  int warmup_episodes = 30;
  int batch_size = 64;
  double soft_update_tau = 0.005;
  std::size_t replay_capacity = 1'000'000;
  std::vector<int> hidden{64, 64};
  ObsScaling scaling{};

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Exploration noise for episode `episode` (0-based); zero during warmup,
/// where actions are drawn uniformly instead.
double noise_for_episode(const TrainConfig& cfg, int episode);

/// y = r + gamma * (1 - done) * Q'(phi', pi'(phi')).
Eigen::VectorXd td_targets(const Agent& agent, const std::vector<Transition>& batch, double gamma);

struct StepStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

StepStats train_step(Agent& agent, const std::vector<Transition>& batch, double gamma,
                     double soft_update_tau);

struct EpisodeSummary {
  double total_reward = 0.0;
  int steps = 0;
  env::TerminalEvent outcome = env::TerminalEvent::none;
};

struct TrainResult {
  Agent agent;
  std::vector<double> reward_history;
  std::vector<EpisodeSummary> episodes;
};

using ProgressFn = std::function<void(int episode, const EpisodeSummary&)>;

TrainResult train(const env::EnvConfig& env_cfg, const gnss::Constellation& constellation,
                  const TrainConfig& cfg, std::uint64_t seed, const ProgressFn& progress = {});

/// Binary checkpoint: magic, version, observation scaling, then for each of
/// actor, critic, target actor, target critic the layer shapes, activation
/// tags and raw little-endian doubles, followed by an FNV-1a checksum.
void save_checkpoint(const Agent& agent, const std::filesystem::path& path);
Agent load_checkpoint(const std::filesystem::path& path);

}  // namespace spoofwatch::ddpg
