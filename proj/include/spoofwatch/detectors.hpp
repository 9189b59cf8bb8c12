#pragma once

#include "spoofwatch/common.hpp"
#include "spoofwatch/gnss.hpp"
#include "spoofwatch/mlp.hpp"

#include <json.hpp>

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spoofwatch::detectors {

struct NominalProfile {
  double mu0 = 0.0;
  double sigma0_sq = 1.0;
  std::size_t n_samples = 0;
  std::vector<std::uint64_t> source_episodes;
};

inline constexpr std::size_t kMinProfileSamples = 2;

/// Pooled mean and population variance, floored at 1e-6 (1 + mu0^2).
/// Throws InsufficientDataError below kMinProfileSamples values.
NominalProfile fit_nominal_profile(const std::vector<std::vector<double>>& streams,
                                   std::vector<std::uint64_t> source_episodes = {});

void to_json(nlohmann::json& j, const NominalProfile& p);
void from_json(const nlohmann::json& j, NominalProfile& p);

struct DetectorVerdict {
  bool flag = false;
  double statistic = 0.0;  // NaN when the detector has no verdict yet
  std::string detector;
  int t = 0;
};

// ---- BOCPD ---------------------------------------------------------------

struct BocpdConfig {
  double hazard = 0.01;
  int tau = 5;
  int warmup = 10;
  double prune_threshold = 1e-8;  // 0 disables pruning
  std::size_t max_run_length = 0;   // 0 means unbounded

  void validate() const;
};

void to_json(nlohmann::json& j, const BocpdConfig& c);
void from_json(const nlohmann::json& j, BocpdConfig& c);

/// Run-length posterior with a constant hazard and a Gaussian predictive whose
/// segment mean is updated recursively. Support entries are kept sparse once
/// pruning removes small weights; `posterior()` expands them densely.
class Bocpd {
 public:
  Bocpd(const NominalProfile& profile, double hazard, double prune_threshold = 1e-8,
        std::size_t max_run_length = 0);

  /// Consumes one value, returns the most probable run length.
  std::size_t update(double q);

  std::size_t map_run_length() const;
  int t() const { return t_; }
  double hazard() const { return hazard_; }
  int underflow_resets() const { return underflow_resets_; }

  const std::vector<std::size_t>& run_lengths() const { return run_lengths_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& seg_means() const { return means_; }
  const std::vector<double>& seg_counts() const { return counts_; }

  /// Dense P(l_t = l), l = 0..max support.
  std::vector<double> posterior() const;

 private:
  double mu0_, sigma0_sq_, hazard_, prune_;
  std::size_t cap_;
  int t_ = 0;
  int underflow_resets_ = 0;
  std::vector<std::size_t> run_lengths_;
  std::vector<double> weights_, means_, counts_;
};

/// flag = t > warmup and l_hat <= tau.
DetectorVerdict bocpd_flag(std::size_t l_hat, int t, int tau, int warmup);

inline constexpr std::size_t kOracleMaxLength = 64;

/// Posterior over run length after every prefix of `stream`, computed by
/// summing over the position of the most recent changepoint with batch
/// sufficient statistics. Entry t has t + 2 values (l = 0..t+1).
std::vector<std::vector<double>> bocpd_oracle(const std::vector<double>& stream,
                                              const NominalProfile& profile, double hazard);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

struct OracleCheck {
  int streams = 0;
  int with_change = 0;
  double max_tv = 0.0;
};

/// Random streams (half with one mean shift) with random profiles and
/// hazards; reports the largest TV distance between the unpruned recursive
/// posterior and bocpd_oracle over every step of every stream.
OracleCheck oracle_check(std::uint64_t seed, int n_streams = 50, int length = 30);

// ---- Page-Hinkley --------------------------------------------------------

/// One-sided test for a downward shift in the mean.
class PageHinkley {
 public:
  PageHinkley(double delta, double lambda);
  DetectorVerdict update(double x);

  double statistic() const { return m_ - m_min_; }
  double mean() const { return mean_; }

 private:
  double delta_, lambda_;
  long n_ = 0;
  double mean_ = 0.0, m_ = 0.0, m_min_ = 0.0;
};

// ---- Pseudorange residual / kinematic gate -------------------------------

struct ResidualConfig {
  double k_sigma = 3.0;
  double noise_sigma = 2.0;
  double max_speed = 10.0;
  double dt = 1.0;
  double gate_margin = 3.5;

  double gate() const { return max_speed * dt * gate_margin; }
  void validate() const;
};

void to_json(nlohmann::json& j, const ResidualConfig& c);
void from_json(const nlohmann::json& j, ResidualConfig& c);

class ResidualThreshold {
 public:
  explicit ResidualThreshold(ResidualConfig cfg);

  /// statistic = ||residuals|| / sqrt(N). Also flags when the implied position
  /// moved further than the kinematic gate since the previous fix.
  DetectorVerdict update(const gnss::PvtSolution& pvt, int t);

  double last_jump() const { return last_jump_; }

 private:
  ResidualConfig cfg_;
  std::optional<Vec3> previous_;
  double last_jump_ = 0.0;
};

// ---- Window autoencoder --------------------------------------------------

struct AutoencoderConfig {
  int window = 32;
  int hidden = 16;
  int bottleneck = 4;
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double threshold_k = 3.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const AutoencoderConfig& c);
void from_json(const nlohmann::json& j, AutoencoderConfig& c);

inline constexpr std::size_t kMinAeWindows = 500;

struct WindowAutoencoder {
  AutoencoderConfig cfg;
  nn::Mlp net;
  double input_mean = 0.0;
  double input_scale = 1.0;
  double threshold = 0.0;
  double train_error_mean = 0.0;
  double train_error_std = 0.0;
  std::vector<double> epoch_losses;

  /// Reconstruction MSE of one window in normalized units.
  double reconstruction_error(const std::vector<double>& window) const;
};

/// Sliding windows (stride 1) inside each stream.
std::vector<std::vector<double>> sliding_windows(const std::vector<std::vector<double>>& streams,
                                                 int window);

WindowAutoencoder window_ae_train(const std::vector<std::vector<double>>& nominal_streams,
                                  const AutoencoderConfig& cfg, std::uint64_t seed);

DetectorVerdict window_ae_score(const WindowAutoencoder& model,
                                const std::vector<double>& recent_window, int t);

void to_json(nlohmann::json& j, const WindowAutoencoder& m);
void from_json(const nlohmann::json& j, WindowAutoencoder& m);

/// Streaming wrapper that keeps the last `window` values.
class WindowAeDetector {
 public:
  explicit WindowAeDetector(const WindowAutoencoder& model) : model_(&model) {}
  DetectorVerdict update(double q, int t);

 private:
  const WindowAutoencoder* model_;
  std::deque<double> buffer_;
};

// ---- Artifacts -------------------------------------------------------------

/// Nominal profile plus the trained autoencoder and frozen thresholds.
struct DetectorArtifacts {
  NominalProfile profile;
  WindowAutoencoder autoencoder;
  BocpdConfig bocpd;
  double ph_delta = 0.0;
  double ph_lambda = 0.0;
  ResidualConfig residual;
};

void save_artifacts(const DetectorArtifacts& a, const std::filesystem::path& path);
DetectorArtifacts load_artifacts(const std::filesystem::path& path);

}  // namespace spoofwatch::detectors
