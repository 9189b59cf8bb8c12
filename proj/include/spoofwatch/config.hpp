#pragma once

#include "spoofwatch/ddpg.hpp"
#include "spoofwatch/detectors.hpp"
#include "spoofwatch/env.hpp"
#include "spoofwatch/spoofer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace spoofwatch {

inline constexpr int kConfigVersion = 1;

/// Detector settings before calibration. PH parameters are multiples of the
/// nominal standard deviation.
struct DetectorSettings {
  detectors::BocpdConfig bocpd{};
  double ph_delta_k = 0.005;
  double ph_lambda_k = 50.0;
  double residual_k_sigma = 3.0;
  double residual_gate_margin = 3.5;
  detectors::AutoencoderConfig autoencoder{};
  /// Calibration picks the largest tau <= warmup for which at most this
  /// fraction of calibration episodes raise a BOCPD flag.
  double calibration_max_fp = 0.05;
  bool calibrate_tau = true;
};

struct EvalSettings {
  int n_nominal = 20;
  int n_attacked = 20;
  int n_profile = 30;
  int n_calibration = 20;
  int histogram_bins = 40;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  env::EnvConfig env{};
  ddpg::TrainConfig train{};
  spoofer::AttackConfig attack{};  // applied to attacked episodes
  DetectorSettings detectors{};
  EvalSettings eval{};

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Throws ConfigError naming the path for missing, unreadable or invalid files.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the resolved config.
std::string canonical_json(const ExperimentConfig& c);

/// 16 hex digits of FNV-1a over canonical_json.
std::string config_hash(const ExperimentConfig& c);

}  // namespace spoofwatch
