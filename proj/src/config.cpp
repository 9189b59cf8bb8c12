#include "spoofwatch/config.hpp"

#include "json_util.hpp"

#include <cstdio>
#include <fstream>

namespace spoofwatch {

void ExperimentConfig::validate() const {
  if (version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version));
  }
  env.validate();
  train.validate();
  attack.validate();
  detectors.bocpd.validate();
  detectors.autoencoder.validate();
  if (!(detectors.ph_delta_k >= 0.0) || !(detectors.ph_lambda_k > 0.0)) {
    throw ConfigError("page_hinkley multipliers must satisfy delta_k >= 0, lambda_k > 0");
  }
  if (!(detectors.residual_k_sigma > 0.0) || !(detectors.residual_gate_margin > 0.0)) {
    throw ConfigError("residual k_sigma and gate_margin must be > 0");
  }
  if (!(detectors.calibration_max_fp >= 0.0 && detectors.calibration_max_fp <= 1.0)) {
    throw ConfigError("calibration_max_fp must be in [0, 1]");
  }
  if (eval.n_nominal < 0 || eval.n_attacked < 0 || eval.n_nominal + eval.n_attacked < 1) {
    throw ConfigError("eval needs n_nominal + n_attacked >= 1");
  }
  if (eval.n_profile < 1) throw ConfigError("eval.n_profile must be >= 1");
  if (eval.n_calibration < 0) throw ConfigError("eval.n_calibration must be >= 0");
  if (eval.histogram_bins < 1) throw ConfigError("eval.histogram_bins must be >= 1");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  const auto& d = c.detectors;
  j = {{"version", c.version},
       {"env", c.env},
       {"train", c.train},
       {"attack", c.attack},
       {"detectors",
        {{"bocpd", d.bocpd},
         {"page_hinkley", {{"delta_k", d.ph_delta_k}, {"lambda_k", d.ph_lambda_k}}},
         {"residual", {{"k_sigma", d.residual_k_sigma}, {"gate_margin", d.residual_gate_margin}}},
         {"autoencoder", d.autoencoder},
         {"calibration_max_fp", d.calibration_max_fp},
         {"calibrate_tau", d.calibrate_tau}}},
       {"eval",
        {{"n_nominal", c.eval.n_nominal},
         {"n_attacked", c.eval.n_attacked},
         {"n_profile", c.eval.n_profile},
         {"n_calibration", c.eval.n_calibration},
         {"histogram_bins", c.eval.histogram_bins}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  using detail::read_opt;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  read_opt(j, "version", c.version);
  if (j.contains("env")) c.env = j.at("env").get<env::EnvConfig>();
  if (j.contains("train")) c.train = j.at("train").get<ddpg::TrainConfig>();
  if (j.contains("attack")) c.attack = j.at("attack").get<spoofer::AttackConfig>();
  if (j.contains("detectors")) {
    const auto& d = j.at("detectors");
    auto& s = c.detectors;
    if (d.contains("bocpd")) s.bocpd = d.at("bocpd").get<detectors::BocpdConfig>();
    if (d.contains("page_hinkley")) {
      read_opt(d.at("page_hinkley"), "delta_k", s.ph_delta_k);
      read_opt(d.at("page_hinkley"), "lambda_k", s.ph_lambda_k);
    }
    if (d.contains("residual")) {
      read_opt(d.at("residual"), "k_sigma", s.residual_k_sigma);
      read_opt(d.at("residual"), "gate_margin", s.residual_gate_margin);
    }
    if (d.contains("autoencoder")) {
      s.autoencoder = d.at("autoencoder").get<detectors::AutoencoderConfig>();
    }
    read_opt(d, "calibration_max_fp", s.calibration_max_fp);
    read_opt(d, "calibrate_tau", s.calibrate_tau);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    read_opt(e, "n_nominal", c.eval.n_nominal);
    read_opt(e, "n_attacked", c.eval.n_attacked);
    read_opt(e, "n_profile", c.eval.n_profile);
    read_opt(e, "n_calibration", c.eval.n_calibration);
    read_opt(e, "histogram_bins", c.eval.histogram_bins);
  }
  c.validate();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(f);
    return j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string canonical_json(const ExperimentConfig& c) { return nlohmann::json(c).dump(); }

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spoofwatch
