#pragma once

#include "spoofwatch/config.hpp"
#include "spoofwatch/ddpg.hpp"
#include "spoofwatch/detectors.hpp"
#include "spoofwatch/env.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace spoofwatch::harness {

inline constexpr std::array<const char*, 4> kDetectorNames{"bocpd", "page_hinkley", "residual",
                                                           "autoencoder"};
inline constexpr std::size_t kNumDetectors = kDetectorNames.size();

/// Detectors attached to one episode stream.
class DetectorBank {
 public:
  explicit DetectorBank(const detectors::DetectorArtifacts& artifacts);

  std::array<detectors::DetectorVerdict, kNumDetectors> update(double q,
                                                              const gnss::PvtSolution& pvt,
                                                              int t);

  const detectors::Bocpd& bocpd() const { return bocpd_; }

 private:
  detectors::BocpdConfig bocpd_cfg_;
  detectors::Bocpd bocpd_;
  detectors::PageHinkley ph_;
  detectors::ResidualThreshold residual_;
  detectors::WindowAeDetector ae_;
};

struct StepRecord {
  int t = 0;
  Vec3 true_pos = Vec3::Zero();
  Vec3 est_pos = Vec3::Zero();
  env::Phi phi = env::Phi::Zero();
  env::ActionVec action{};
  env::RewardBreakdown reward{};
  double q = 0.0;
  double alpha = 0.0;
  bool attack_active = false;
  std::array<detectors::DetectorVerdict, kNumDetectors> verdicts{};
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string kind;  // "nominal", "attacked", ...
  int index = 0;
  spoofer::AttackConfig attack{};
  env::TerminalEvent terminal_event = env::TerminalEvent::none;
  int bocpd_underflow_resets = 0;
  std::vector<StepRecord> rows;

  /// First step with the attack live, or -1.
  int onset() const;
};

/// One closed-loop episode: ranges, fix, observation, action, critic value,
/// detector updates, then the environment step. Without detector artifacts
/// the verdict columns stay empty.
EpisodeLog run_episode(const ddpg::Agent& agent, const env::EnvConfig& env_cfg,
                       const gnss::Constellation& constellation,
                       const spoofer::AttackConfig& attack,
                       const detectors::DetectorArtifacts* artifacts, std::uint64_t seed);

/// Stable-column CSV of the per-step rows.
std::string episode_csv(const EpisodeLog& log);
nlohmann::json episode_meta(const EpisodeLog& log);

// ---- metrics ---------------------------------------------------------------

/// Raw per-step flags of one detector on one episode. `valid` is false for
/// steps where the detector produced no verdict.
struct EpisodeFlags {
  bool attacked = false;
  int onset = -1;  // first positive step; -1 when no step is positive
  std::vector<bool> flags;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

MeanStd mean_std(const std::vector<double>& v);

struct DetectorMetrics {
  MeanStd accuracy;        // per-episode latched accuracy
  MeanStd false_positive;  // per-episode latched flag rate on negative steps
  double fnr_episode = 0.0;  // attacked episodes with no latched flag at or after onset
  MeanStd fnr_step;          // per-episode latched miss rate on positive steps
  MeanStd delay;             // over detected attacked episodes
  int detected = 0;
  int attacked_episodes = 0;
  int nominal_episodes = 0;
};

DetectorMetrics compute_metrics(const std::vector<EpisodeFlags>& episodes);

/// Flags of detector `d` (index into kDetectorNames) from a log.
EpisodeFlags flags_from_log(const EpisodeLog& log, std::size_t d);

// ---- pipeline --------------------------------------------------------------

gnss::Constellation constellation_for(const env::EnvConfig& cfg);

/// Nominal q streams for episodes derive_seed(seed, stream, i).
std::vector<EpisodeLog> run_nominal(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                                    std::uint64_t seed, std::uint64_t stream, int count,
                                    const detectors::DetectorArtifacts* artifacts);

std::vector<std::vector<double>> q_streams(const std::vector<EpisodeLog>& logs);

struct CalibrationReport {
  int tau_initial = 0;
  int tau_final = 0;
  double episode_fp_rate = 0.0;
};

/// Fits the nominal profile, trains the autoencoder, sets PH thresholds and
/// calibrates tau on separate nominal episodes.
detectors::DetectorArtifacts fit_detectors(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                                           std::uint64_t seed,
                                           CalibrationReport* report = nullptr);

struct Evaluation {
  std::vector<EpisodeLog> nominal;
  std::vector<EpisodeLog> attacked;
  std::array<DetectorMetrics, kNumDetectors> metrics;
};

Evaluation evaluate(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                    const detectors::DetectorArtifacts& artifacts, std::uint64_t seed);

/// Post-onset q of attacked episodes against nominal q at the same steps.
struct QShift {
  double attacked_mean = 0.0;
  double nominal_mean = 0.0;
  double nominal_std = 0.0;
  std::size_t attacked_samples = 0;
  std::size_t nominal_samples = 0;
  double shift_in_std() const {
    return nominal_std > 0.0 ? (nominal_mean - attacked_mean) / nominal_std
                             : std::numeric_limits<double>::quiet_NaN();
  }
};

QShift q_shift(const Evaluation& ev);

/// Fraction of `count` nominal episodes where the deterministic policy
/// reaches the goal.
double goal_rate(const ddpg::Agent& agent, const ExperimentConfig& cfg, std::uint64_t seed,
                 int count);

/// Fixed-format number used in every CSV.
std::string fmt(double v);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace spoofwatch::harness
