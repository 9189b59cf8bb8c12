#include "spoofwatch/ddpg.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace spoofwatch::ddpg {

namespace {

constexpr int kPhiDim = 9;
constexpr int kActionDim = 3;

const Vec3 kActionLo(env::ActionVec::kStrengthLo, env::ActionVec::kStrengthLo,
                     env::ActionVec::kThetaLo);
const Vec3 kActionHi(env::ActionVec::kStrengthHi, env::ActionVec::kStrengthHi,
                     env::ActionVec::kThetaHi);

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& phi_scaled, const Eigen::MatrixXd& unit_act) {
  Eigen::MatrixXd x(kPhiDim + kActionDim, phi_scaled.cols());
  x.topRows(kPhiDim) = phi_scaled;
  x.bottomRows(kActionDim) = unit_act;
  return x;
}

Eigen::MatrixXd scale_batch(const std::vector<Transition>& batch, const ObsScaling& s, bool next) {
  Eigen::MatrixXd out(kPhiDim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = scale_observation(next ? batch[i].next_phi : batch[i].phi, s);
  }
  return out;
}

// ---- checkpoint encoding -------------------------------------------------

constexpr std::array<char, 8> kMagic{'S', 'P', 'W', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size()) {
      throw CorruptFileError("checkpoint truncated while reading " + std::string(what) +
                             " at byte " + std::to_string(pos_));
    }
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

void encode_net(std::string& out, const nn::Mlp& net) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
  }
  const auto params = net.parameters();
  put<std::uint64_t>(out, params.size());
  for (double p : params) put<double>(out, p);
}

nn::Mlp decode_net(Reader& in, const char* name, int expect_in, int expect_out) {
  const auto n_layers = in.get<std::uint32_t>("layer count");
  if (n_layers == 0 || n_layers > 64) {
    throw CorruptFileError(std::string(name) + ": implausible layer count " +
                           std::to_string(n_layers));
  }
  std::vector<nn::Layer> layers;
  std::uint32_t prev_out = 0;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto in_w = in.get<std::uint32_t>("layer input width");
    const auto out_w = in.get<std::uint32_t>("layer output width");
    const auto act = in.get<std::uint8_t>("activation tag");
    if (in_w == 0 || out_w == 0 || in_w > 4096 || out_w > 4096 || act > 2) {
      throw CorruptFileError(std::string(name) + ": bad header for layer " + std::to_string(i));
    }
    if (i > 0 && in_w != prev_out) {
      throw CorruptFileError(std::string(name) + ": shape mismatch at layer " + std::to_string(i) +
                             " (input " + std::to_string(in_w) + " vs previous output " +
                             std::to_string(prev_out) + ")");
    }
    nn::Layer l;
    l.weight = Eigen::MatrixXd::Zero(out_w, in_w);
    l.bias = Eigen::VectorXd::Zero(out_w);
    l.activation = static_cast<nn::Activation>(act);
    layers.push_back(std::move(l));
    prev_out = out_w;
  }
  nn::Mlp net(std::move(layers));
  if (net.input_size() != expect_in || net.output_size() != expect_out) {
    throw CorruptFileError(std::string(name) + ": shape mismatch, expected " +
                           std::to_string(expect_in) + " -> " + std::to_string(expect_out) +
                           ", found " + std::to_string(net.input_size()) + " -> " +
                           std::to_string(net.output_size()));
  }
  const auto count = in.get<std::uint64_t>("parameter count");
  if (count != net.parameter_count()) {
    throw CorruptFileError(std::string(name) + ": parameter count " + std::to_string(count) +
                           " does not match layer shapes (" +
                           std::to_string(net.parameter_count()) + ")");
  }
  std::vector<double> params(count);
  for (auto& p : params) p = in.get<double>("parameters");
  net.set_parameters(params);
  return net;
}

}  // namespace

Agent make_agent(const AgentConfig& cfg, Rng& rng, nn::Init init) {
  std::vector<int> actor_sizes{kPhiDim};
  actor_sizes.insert(actor_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_sizes.push_back(kActionDim);
  std::vector<int> critic_sizes{kPhiDim + kActionDim};
  critic_sizes.insert(critic_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_sizes.push_back(1);

  Agent a;
  a.actor = nn::Mlp::create(actor_sizes, nn::Activation::relu, nn::Activation::tanh, init, rng);
  a.critic =
      nn::Mlp::create(critic_sizes, nn::Activation::relu, nn::Activation::identity, init, rng);
  a.target_actor = a.actor;
  a.target_critic = a.critic;
  a.actor_opt = nn::Adam(a.actor, cfg.lr_actor);
  a.critic_opt = nn::Adam(a.critic, cfg.lr_critic);
  a.scaling = cfg.scaling;
  return a;
}

Eigen::VectorXd scale_observation(const env::Phi& phi, const ObsScaling& s) {
  Eigen::VectorXd x(kPhiDim);
  x.head<6>() = phi.head<6>() / s.distance;
  x.tail<3>() = phi.tail<3>() / s.velocity;
  return x;
}

env::ActionVec action_from_unit(const Vec3& u) {
  const Vec3 raw = kActionLo + 0.5 * (u.array() + 1.0).matrix().cwiseProduct(kActionHi - kActionLo);
  return env::ActionVec::clamped(raw.x(), raw.y(), raw.z());
}

Vec3 unit_from_action(const env::ActionVec& a) {
  return (2.0 * (a.as_vector() - kActionLo).array() / (kActionHi - kActionLo).array() - 1.0)
      .matrix();
}

env::ActionVec policy(const Agent& agent, const env::Observation& obs) {
  const Eigen::VectorXd out = nn::predict(agent.actor, scale_observation(obs.phi, agent.scaling));
  return action_from_unit(Vec3(out(0), out(1), out(2)));
}

env::ActionVec act(const Agent& agent, const env::Observation& obs, double noise_scale, Rng& rng) {
  const env::ActionVec base = policy(agent, obs);
  if (noise_scale <= 0.0) return base;
  return env::ActionVec::clamped(base.rho0 + gaussian(rng, noise_scale),
                                 base.sigma0 + gaussian(rng, noise_scale),
                                 base.theta + gaussian(rng, noise_scale));
}

double q_value(const Agent& agent, const env::Observation& obs, const env::ActionVec& a) {
  const Eigen::MatrixXd x =
      critic_input(scale_observation(obs.phi, agent.scaling), unit_from_action(a));
  return nn::predict(agent.critic, x)(0, 0);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const std::size_t n = data_.size();
  batch = std::min(batch, n);
  // Floyd's algorithm: distinct indices in O(batch^2) without touching n.
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(picked.begin(), picked.end(), k) == picked.end()) {
      picked.push_back(k);
    } else {
      picked.push_back(j);
    }
  }
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t k : picked) out.push_back(data_[k]);
  return out;
}

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("train.episodes must be >= 1");
  if (max_steps < 1) throw ConfigError("train.max_steps must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train.gamma must be in (0, 1)");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(noise_start >= noise_end && noise_end >= 0.0)) {
    throw ConfigError("train noise must satisfy noise_start >= noise_end >= 0");
  }
  if (warmup_episodes < 0) throw ConfigError("train.warmup_episodes must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(soft_update_tau > 0.0 && soft_update_tau <= 1.0)) {
    throw ConfigError("train.soft_update_tau must be in (0, 1]");
  }
  if (replay_capacity < static_cast<std::size_t>(batch_size)) {
    throw ConfigError("train.replay_capacity must hold at least one batch");
  }
  if (hidden.empty()) throw ConfigError("train.hidden must list at least one layer");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"episodes", c.episodes},
       {"max_steps", c.max_steps},
       {"gamma", c.gamma},
       {"lr_actor", c.lr_actor},
       {"lr_critic", c.lr_critic},
       {"noise_start", c.noise_start},
       {"noise_end", c.noise_end},
       {"warmup_episodes", c.warmup_episodes},
       {"batch_size", c.batch_size},
       {"soft_update_tau", c.soft_update_tau},
       {"replay_capacity", c.replay_capacity},
       {"hidden", c.hidden},
       {"distance_scale", c.scaling.distance},
       {"velocity_scale", c.scaling.velocity}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  using detail::read_opt;
  read_opt(j, "episodes", c.episodes);
  read_opt(j, "max_steps", c.max_steps);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "lr_actor", c.lr_actor);
  read_opt(j, "lr_critic", c.lr_critic);
  read_opt(j, "noise_start", c.noise_start);
  read_opt(j, "noise_end", c.noise_end);
  read_opt(j, "warmup_episodes", c.warmup_episodes);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "soft_update_tau", c.soft_update_tau);
  read_opt(j, "replay_capacity", c.replay_capacity);
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "distance_scale", c.scaling.distance);
  read_opt(j, "velocity_scale", c.scaling.velocity);
  c.validate();
}

double noise_for_episode(const TrainConfig& cfg, int episode) {
  if (episode < cfg.warmup_episodes) return 0.0;
  const int span = std::max(1, cfg.episodes - cfg.warmup_episodes - 1);
  const double frac = std::min(1.0, static_cast<double>(episode - cfg.warmup_episodes) / span);
  return cfg.noise_start + (cfg.noise_end - cfg.noise_start) * frac;
}

Eigen::VectorXd td_targets(const Agent& agent, const std::vector<Transition>& batch, double gamma) {
  const Eigen::MatrixXd next = scale_batch(batch, agent.scaling, true);
  const Eigen::MatrixXd next_act = nn::predict(agent.target_actor, next);
  const Eigen::MatrixXd next_q = nn::predict(agent.target_critic, critic_input(next, next_act));
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    y(k) = batch[i].reward + (batch[i].done ? 0.0 : gamma * next_q(0, k));
  }
  return y;
}

StepStats train_step(Agent& agent, const std::vector<Transition>& batch, double gamma,
                     double soft_update_tau) {
  if (batch.empty()) throw ConfigError("train_step needs a non-empty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(b);
  StepStats stats;

  const Eigen::VectorXd y = td_targets(agent, batch, gamma);
  const Eigen::MatrixXd phi = scale_batch(batch, agent.scaling, false);
  Eigen::MatrixXd acts(kActionDim, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Vec3& a = batch[static_cast<std::size_t>(i)].action;
    acts.col(i) = unit_from_action(env::ActionVec::clamped(a.x(), a.y(), a.z()));
  }

  // Critic: mean squared TD error.
  {
    const nn::ForwardCache cache = nn::forward_batch(agent.critic, critic_input(phi, acts));
    const Eigen::RowVectorXd err = cache.output.row(0) - y.transpose();
    stats.critic_loss = err.squaredNorm() * inv_b;
    const nn::MlpGrads g = nn::mlp_gradients(agent.critic, cache, 2.0 * inv_b * err);
    agent.critic_opt.step(agent.critic, g);
  }

  // Actor: ascend mean Q(phi, pi(phi)) through the critic's input gradient.
  {
    const nn::ForwardCache actor_cache = nn::forward_batch(agent.actor, phi);
    const nn::ForwardCache critic_cache =
        nn::forward_batch(agent.critic, critic_input(phi, actor_cache.output));
    stats.actor_objective = critic_cache.output.mean();
    const Eigen::MatrixXd up = Eigen::MatrixXd::Constant(1, b, -inv_b);
    const nn::MlpGrads cg = nn::mlp_gradients(agent.critic, critic_cache, up);
    const nn::MlpGrads ag =
        nn::mlp_gradients(agent.actor, actor_cache, cg.input.bottomRows(kActionDim));
    agent.actor_opt.step(agent.actor, ag);
  }

  nn::soft_update(agent.target_critic, agent.critic, soft_update_tau);
  nn::soft_update(agent.target_actor, agent.actor, soft_update_tau);
  return stats;
}

TrainResult train(const env::EnvConfig& env_cfg, const gnss::Constellation& constellation,
                  const TrainConfig& cfg, std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  env::EnvConfig ecfg = env_cfg;
  ecfg.max_steps = cfg.max_steps;

  Rng init_rng(derive_seed(seed, streams::kInit));
  AgentConfig acfg;
  acfg.hidden = cfg.hidden;
  acfg.scaling = cfg.scaling;
  acfg.lr_actor = cfg.lr_actor;
  acfg.lr_critic = cfg.lr_critic;

  TrainResult result{make_agent(acfg, init_rng), {}, {}};
  Agent& agent = result.agent;
  ReplayBuffer buffer(cfg.replay_capacity);
  Rng learn_rng(derive_seed(seed, streams::kTrain, 0xffffffffULL));

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Rng env_rng(derive_seed(seed, streams::kTrain, static_cast<std::uint64_t>(ep)));
    env::ResetResult start = env::env_reset(ecfg, constellation, env_rng);
    env::WorldState world = start.world;
    env::Observation obs = start.obs;
    const bool warmup = ep < cfg.warmup_episodes;
    const double noise = noise_for_episode(cfg, ep);

    EpisodeSummary summary;
    for (int step = 0; step < cfg.max_steps; ++step) {
      env::ActionVec a;
      if (warmup) {
        a = env::ActionVec::clamped(
            uniform(learn_rng, env::ActionVec::kStrengthLo, env::ActionVec::kStrengthHi),
            uniform(learn_rng, env::ActionVec::kStrengthLo, env::ActionVec::kStrengthHi),
            uniform(learn_rng, env::ActionVec::kThetaLo, env::ActionVec::kThetaHi));
      } else {
        a = act(agent, obs, noise, learn_rng);
      }
      env::StepResult next = env::env_step(world, a, ecfg, constellation, nullptr, env_rng);
      const bool terminal = next.reward.terminal_event == env::TerminalEvent::collision ||
                            next.reward.terminal_event == env::TerminalEvent::goal_reached;
      buffer.push({obs.phi, a.as_vector(), next.reward.total, next.obs.phi, terminal});
      summary.total_reward += next.reward.total;
      summary.steps = step + 1;

      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        train_step(agent, buffer.sample(static_cast<std::size_t>(cfg.batch_size), learn_rng),
                   cfg.gamma, cfg.soft_update_tau);
      }
      world = next.world;
      obs = next.obs;
      if (next.done) {
        summary.outcome = next.reward.terminal_event;
        break;
      }
    }
    result.reward_history.push_back(summary.total_reward);
    result.episodes.push_back(summary);
    if (progress) progress(ep, summary);
  }
  return result;
}

void save_checkpoint(const Agent& agent, const std::filesystem::path& path) {
  std::string out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<double>(out, agent.scaling.distance);
  put<double>(out, agent.scaling.velocity);
  put<std::uint32_t>(out, 4);
  encode_net(out, agent.actor);
  encode_net(out, agent.critic);
  encode_net(out, agent.target_actor);
  encode_net(out, agent.target_critic);
  put<std::uint64_t>(out, fnv1a(out));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Agent load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  const std::string where = " (" + path.string() + ")";
  if (data.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), data.begin())) {
    throw CorruptFileError("not a spoofwatch checkpoint" + where);
  }
  Reader in(data);
  for (std::size_t i = 0; i < kMagic.size(); ++i) in.get<char>("magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CorruptFileError("unsupported checkpoint version " + std::to_string(version) + where);
  }
  Agent a;
  a.scaling.distance = in.get<double>("distance scale");
  a.scaling.velocity = in.get<double>("velocity scale");
  const auto n_nets = in.get<std::uint32_t>("network count");
  if (n_nets != 4) throw CorruptFileError("expected 4 networks, found " + std::to_string(n_nets) + where);
  a.actor = decode_net(in, "actor", kPhiDim, kActionDim);
  a.critic = decode_net(in, "critic", kPhiDim + kActionDim, 1);
  a.target_actor = decode_net(in, "target_actor", kPhiDim, kActionDim);
  a.target_critic = decode_net(in, "target_critic", kPhiDim + kActionDim, 1);
  const std::size_t body = in.pos();
  const auto checksum = in.get<std::uint64_t>("checksum");
  if (checksum != fnv1a(data.substr(0, body))) throw CorruptFileError("checksum mismatch" + where);
  if (in.pos() != data.size()) throw CorruptFileError("trailing bytes after checkpoint" + where);
  a.actor_opt = nn::Adam(a.actor, 1e-3);
  a.critic_opt = nn::Adam(a.critic, 1e-3);
  return a;
}

}  // namespace spoofwatch::ddpg
