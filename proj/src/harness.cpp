#include "spoofwatch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace spoofwatch::harness {

namespace {

constexpr std::uint64_t kGoalStream = 0x676f616c;

detectors::PageHinkley make_ph(const detectors::DetectorArtifacts& a) {
  return detectors::PageHinkley(a.ph_delta, a.ph_lambda);
}

}  // namespace

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing: " + path.string());
}

// ---- detector bank ---------------------------------------------------------

DetectorBank::DetectorBank(const detectors::DetectorArtifacts& a)
    : bocpd_cfg_(a.bocpd),
      bocpd_(a.profile, a.bocpd.hazard, a.bocpd.prune_threshold, a.bocpd.max_run_length),
      ph_(make_ph(a)),
      residual_(a.residual),
      ae_(a.autoencoder) {}

std::array<detectors::DetectorVerdict, kNumDetectors> DetectorBank::update(
    double q, const gnss::PvtSolution& pvt, int t) {
  std::array<detectors::DetectorVerdict, kNumDetectors> out;
  const std::size_t l_hat = bocpd_.update(q);
  out[0] = detectors::bocpd_flag(l_hat, bocpd_.t(), bocpd_cfg_.tau, bocpd_cfg_.warmup);
  out[1] = ph_.update(q);
  out[2] = residual_.update(pvt, t);
  out[3] = ae_.update(q, t);
  for (auto& v : out) v.t = t;
  return out;
}

// ---- episodes --------------------------------------------------------------

int EpisodeLog::onset() const {
  for (const auto& r : rows) {
    if (r.attack_active) return r.t;
  }
  return -1;
}

EpisodeLog run_episode(const ddpg::Agent& agent, const env::EnvConfig& env_cfg,
                       const gnss::Constellation& constellation,
                       const spoofer::AttackConfig& attack,
                       const detectors::DetectorArtifacts* artifacts, std::uint64_t seed) {
  EpisodeLog log;
  log.seed = seed;
  log.attack = attack;
  Rng rng(seed);
  env::ResetResult start = env::env_reset(env_cfg, constellation, rng, &attack);
  env::WorldState world = start.world;
  env::Observation obs = start.obs;
  env::Sensing sensing = start.sensing;
  std::optional<DetectorBank> bank;
  if (artifacts != nullptr) bank.emplace(*artifacts);

  for (;;) {
    StepRecord row;
    row.t = world.t;
    row.true_pos = world.uav_pos;
    row.est_pos = sensing.pvt.estimate.position;
    row.phi = obs.phi;
    row.attack_active = sensing.phase.active;
    row.alpha = sensing.phase.active ? sensing.phase.alpha : 0.0;
    row.action = ddpg::policy(agent, obs);
    row.q = ddpg::q_value(agent, obs, row.action);
    if (bank) {
      row.verdicts = bank->update(row.q, sensing.pvt, world.t);
    } else {
      for (std::size_t d = 0; d < kNumDetectors; ++d) {
        row.verdicts[d].detector = kDetectorNames[d];
        row.verdicts[d].t = world.t;
        row.verdicts[d].statistic = std::numeric_limits<double>::quiet_NaN();
      }
    }

    env::StepResult next = env::env_step(world, row.action, env_cfg, constellation, &attack, rng);
    row.reward = next.reward;
    log.rows.push_back(std::move(row));
    world = next.world;
    obs = next.obs;
    sensing = next.sensing;
    if (next.done) {
      log.terminal_event = next.reward.terminal_event;
      break;
    }
  }
  if (bank) log.bocpd_underflow_resets = bank->bocpd().underflow_resets();
  return log;
}

std::string episode_csv(const EpisodeLog& log) {
  std::string out =
      "t,true_x,true_y,true_z,est_x,est_y,est_z,"
      "phi_0,phi_1,phi_2,phi_3,phi_4,phi_5,phi_6,phi_7,phi_8,"
      "rho0,sigma0,theta,r_collision,r_threat,r_goal,r_total,terminal,q,alpha,attack_active";
  for (const char* name : kDetectorNames) {
    out += std::string(",") + name + "_flag," + name + "_stat";
  }
  out += '\n';
  for (const auto& r : log.rows) {
    std::string line = std::to_string(r.t);
    auto add = [&line](double v) {
      line += ',';
      line += fmt(v);
    };
    for (int i = 0; i < 3; ++i) add(r.true_pos(i));
    for (int i = 0; i < 3; ++i) add(r.est_pos(i));
    for (int i = 0; i < 9; ++i) add(r.phi(i));
    add(r.action.rho0);
    add(r.action.sigma0);
    add(r.action.theta);
    add(r.reward.collision);
    add(r.reward.threat);
    add(r.reward.goal_seek);
    add(r.reward.total);
    line += ',' + env::to_string(r.reward.terminal_event);
    add(r.q);
    add(r.alpha);
    line += r.attack_active ? ",1" : ",0";
    for (const auto& v : r.verdicts) {
      line += v.flag ? ",1" : ",0";
      add(v.statistic);
    }
    out += line + '\n';
  }
  return out;
}

nlohmann::json episode_meta(const EpisodeLog& log) {
  return {{"seed", log.seed},
          {"config_hash", log.config_hash},
          {"kind", log.kind},
          {"index", log.index},
          {"steps", log.rows.size()},
          {"terminal_event", env::to_string(log.terminal_event)},
          {"onset", log.onset()},
          {"bocpd_underflow_resets", log.bocpd_underflow_resets},
          {"attack", log.attack}};
}

// ---- metrics ---------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  m.n = static_cast<int>(v.size());
  if (v.empty()) {
    m.mean = std::numeric_limits<double>::quiet_NaN();
    m.std = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(v.size()));
  return m;
}

EpisodeFlags flags_from_log(const EpisodeLog& log, std::size_t d) {
  EpisodeFlags f;
  f.attacked = log.attack.enabled;
  f.onset = log.onset();
  f.flags.reserve(log.rows.size());
  for (const auto& r : log.rows) f.flags.push_back(r.verdicts[d].flag);
  return f;
}

DetectorMetrics compute_metrics(const std::vector<EpisodeFlags>& episodes) {
  DetectorMetrics m;
  std::vector<double> acc, fpr, miss, delay;
  int missed = 0;
  for (const auto& ep : episodes) {
    const int n = static_cast<int>(ep.flags.size());
    if (n == 0) continue;
    // Attacked episodes that ended before the attack started carry no
    // positive step and are scored like nominal ones.
    const int onset = ep.attacked && ep.onset >= 0 && ep.onset < n ? ep.onset : n;
    int first = n;
    for (int t = 0; t < n; ++t) {
      if (ep.flags[static_cast<std::size_t>(t)]) {
        first = t;
        break;
      }
    }
    int correct = 0, neg = 0, fp = 0, pos = 0, fn = 0;
    for (int t = 0; t < n; ++t) {
      const bool latched = t >= first;
      const bool positive = t >= onset;
      if (latched == positive) ++correct;
      if (positive) {
        ++pos;
        if (!latched) ++fn;
      } else {
        ++neg;
        if (latched) ++fp;
      }
    }
    acc.push_back(static_cast<double>(correct) / n);
    if (neg > 0) fpr.push_back(static_cast<double>(fp) / neg);
    if (pos > 0) {
      ++m.attacked_episodes;
      miss.push_back(static_cast<double>(fn) / pos);
      if (first < n) {
        ++m.detected;
        delay.push_back(static_cast<double>(std::max(0, first - onset)));
      } else {
        ++missed;
      }
    } else {
      ++m.nominal_episodes;
    }
  }
  m.accuracy = mean_std(acc);
  m.false_positive = mean_std(fpr);
  m.fnr_step = mean_std(miss);
  m.delay = mean_std(delay);
  if (delay.empty()) m.delay.mean = std::numeric_limits<double>::infinity();
  m.fnr_episode = m.attacked_episodes > 0 ? static_cast<double>(missed) / m.attacked_episodes : 0.0;
  return m;
}

// ---- pipeline --------------------------------------------------------------

gnss::Constellation constellation_for(const env::EnvConfig& cfg) {
  return gnss::make_constellation(cfg.n_satellites, cfg.satellite_radius, cfg.constellation_seed);
}

std::vector<EpisodeLog> run_nominal(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                                    std::uint64_t seed, std::uint64_t stream, int count,
                                    const detectors::DetectorArtifacts* artifacts) {
  const auto constellation = constellation_for(cfg.env);
  const std::string hash = config_hash(cfg);
  spoofer::AttackConfig off = cfg.attack;
  off.enabled = false;
  std::vector<EpisodeLog> logs;
  for (int i = 0; i < count; ++i) {
    EpisodeLog log = run_episode(agent, cfg.env, constellation, off, artifacts,
                                 derive_seed(seed, stream, static_cast<std::uint64_t>(i)));
    log.kind = "nominal";
    log.index = i;
    log.config_hash = hash;
    logs.push_back(std::move(log));
  }
  return logs;
}

std::vector<std::vector<double>> q_streams(const std::vector<EpisodeLog>& logs) {
  std::vector<std::vector<double>> out;
  for (const auto& log : logs) {
    std::vector<double> q;
    q.reserve(log.rows.size());
    for (const auto& r : log.rows) q.push_back(r.q);
    out.push_back(std::move(q));
  }
  return out;
}

detectors::DetectorArtifacts fit_detectors(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                                           std::uint64_t seed, CalibrationReport* report) {
  const auto nominal = run_nominal(agent, cfg, seed, streams::kProfile, cfg.eval.n_profile, nullptr);
  const auto streams = q_streams(nominal);
  std::vector<std::uint64_t> ids;
  for (const auto& log : nominal) ids.push_back(log.seed);

  detectors::DetectorArtifacts a;
  a.profile = detectors::fit_nominal_profile(streams, ids);
  a.autoencoder = detectors::window_ae_train(streams, cfg.detectors.autoencoder,
                                             derive_seed(seed, streams::kProfile, 0xae));
  const double sigma0 = std::sqrt(a.profile.sigma0_sq);
  a.ph_delta = cfg.detectors.ph_delta_k * sigma0;
  a.ph_lambda = cfg.detectors.ph_lambda_k * sigma0;
  a.residual.k_sigma = cfg.detectors.residual_k_sigma;
  a.residual.noise_sigma = cfg.env.noise_sigma;
  a.residual.max_speed = cfg.env.max_speed;
  a.residual.dt = cfg.env.dt;
  a.residual.gate_margin = cfg.detectors.residual_gate_margin;
  a.bocpd = cfg.detectors.bocpd;
  if (a.bocpd.max_run_length == 0) {
    a.bocpd.max_run_length = static_cast<std::size_t>(cfg.env.max_steps);
  }

  CalibrationReport rep;
  rep.tau_initial = a.bocpd.tau;
  rep.tau_final = a.bocpd.tau;
  if (cfg.detectors.calibrate_tau && cfg.eval.n_calibration > 0) {
    const auto calib =
        run_nominal(agent, cfg, seed, streams::kCalib, cfg.eval.n_calibration, &a);
    // Smallest l_hat seen after warmup in each calibration episode.
    std::vector<long> min_lhat;
    for (const auto& log : calib) {
      long lo = std::numeric_limits<long>::max();
      for (const auto& r : log.rows) {
        if (r.t + 1 > a.bocpd.warmup) lo = std::min(lo, static_cast<long>(r.verdicts[0].statistic));
      }
      min_lhat.push_back(lo);
    }
    auto fp_rate = [&](int tau) {
      long hits = 0;
      for (long v : min_lhat) hits += v <= tau ? 1 : 0;
      return static_cast<double>(hits) / static_cast<double>(min_lhat.size());
    };
    // Largest tau not above warmup (beyond it the initial run-length ramp
    // itself would trip the flag) that keeps the episode false-alarm rate
    // within bounds.
    int tau = a.bocpd.warmup;
    while (tau > 0 && fp_rate(tau) > cfg.detectors.calibration_max_fp) --tau;
    a.bocpd.tau = tau;
    rep.tau_final = tau;
    rep.episode_fp_rate = fp_rate(tau);
  }
  if (report != nullptr) *report = rep;
  return a;
}

Evaluation evaluate(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                    const detectors::DetectorArtifacts& artifacts, std::uint64_t seed) {
  Evaluation ev;
  const auto constellation = constellation_for(cfg.env);
  const std::string hash = config_hash(cfg);
  spoofer::AttackConfig off = cfg.attack;
  off.enabled = false;
  spoofer::AttackConfig on = cfg.attack;
  on.enabled = true;

  // Nominal and attacked episode i share the mission seed.
  for (int i = 0; i < std::max(cfg.eval.n_nominal, cfg.eval.n_attacked); ++i) {
    const std::uint64_t s = derive_seed(seed, streams::kEval, static_cast<std::uint64_t>(i));
    if (i < cfg.eval.n_nominal) {
      EpisodeLog log = run_episode(agent, cfg.env, constellation, off, &artifacts, s);
      log.kind = "nominal";
      log.index = i;
      log.config_hash = hash;
      ev.nominal.push_back(std::move(log));
    }
    if (i < cfg.eval.n_attacked) {
      EpisodeLog log = run_episode(agent, cfg.env, constellation, on, &artifacts, s);
      log.kind = "attacked";
      log.index = i;
      log.config_hash = hash;
      ev.attacked.push_back(std::move(log));
    }
  }

  for (std::size_t d = 0; d < kNumDetectors; ++d) {
    std::vector<EpisodeFlags> flags;
    for (const auto& log : ev.nominal) flags.push_back(flags_from_log(log, d));
    for (const auto& log : ev.attacked) flags.push_back(flags_from_log(log, d));
    ev.metrics[d] = compute_metrics(flags);
  }
  return ev;
}

QShift q_shift(const Evaluation& ev) {
  QShift s;
  int onset = std::numeric_limits<int>::max();
  std::vector<double> att;
  for (const auto& log : ev.attacked) {
    for (const auto& r : log.rows) {
      if (r.attack_active) {
        att.push_back(r.q);
        onset = std::min(onset, r.t);
      }
    }
  }
  std::vector<double> nom;
  for (const auto& log : ev.nominal) {
    for (const auto& r : log.rows) {
      if (r.t >= onset) nom.push_back(r.q);
    }
  }
  const MeanStd a = mean_std(att);
  const MeanStd n = mean_std(nom);
  s.attacked_mean = a.mean;
  s.nominal_mean = n.mean;
  s.nominal_std = n.std;
  s.attacked_samples = att.size();
  s.nominal_samples = nom.size();
  return s;
}

double goal_rate(const ddpg::Agent& agent, const ExperimentConfig& cfg, std::uint64_t seed,
                 int count) {
  if (count < 1) return 0.0;
  const auto logs = run_nominal(agent, cfg, seed, kGoalStream, count, nullptr);
  int reached = 0;
  for (const auto& log : logs) {
    if (log.terminal_event == env::TerminalEvent::goal_reached) ++reached;
  }
  return static_cast<double>(reached) / count;
}

}  // namespace spoofwatch::harness
