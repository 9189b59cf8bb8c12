#include "spoofwatch/spoofer.hpp"

#include <algorithm>
#include <string>

namespace spoofwatch::spoofer {

void AttackConfig::validate() const {
  if (drift_duration < 1) throw ConfigError("attack drift_duration must be >= 1");
  if (t_start < 0) throw ConfigError("attack t_start must be >= 0");
  if (!target.allFinite()) throw ConfigError("attack target must be finite");
  if (!jump_offset.allFinite()) throw ConfigError("attack jump_offset must be finite");
}

AttackPhase attack_alpha(int t, const AttackConfig& cfg) {
  AttackPhase phase;
  if (t < cfg.t_start) return phase;
  phase.alpha = std::min(1.0, static_cast<double>(t - cfg.t_start) / cfg.drift_duration);
  phase.active = cfg.enabled;
  return phase;
}

Vec3 spoof_position(const Vec3& true_pos, const AttackPhase& phase, const AttackConfig& cfg) {
  if (!phase.active) return true_pos;
  if (cfg.kind == AttackKind::jump) return true_pos + cfg.jump_offset;
  return (1.0 - phase.alpha) * true_pos + phase.alpha * cfg.target;
}

gnss::PseudorangeSet spoof_pseudoranges(const Vec3& spoof_pos, double bias,
                                        const gnss::Constellation& constellation) {
  gnss::PseudorangeSet out;
  out.values.reserve(constellation.size());
  const gnss::ReceiverEstimate forged{spoof_pos, bias};
  for (const auto& sat : constellation.satellites) {
    out.values.push_back(gnss::predicted_range(forged, sat));
  }
  return out;
}

void to_json(nlohmann::json& j, const AttackConfig& c) {
  j = {{"enabled", c.enabled},
       {"kind", c.kind == AttackKind::jump ? "jump" : "drift"},
       {"t_start", c.t_start},
       {"drift_duration", c.drift_duration},
       {"target", {c.target.x(), c.target.y(), c.target.z()}},
       {"jump_offset", {c.jump_offset.x(), c.jump_offset.y(), c.jump_offset.z()}},
       {"add_receiver_noise", c.add_receiver_noise}};
}

void from_json(const nlohmann::json& j, AttackConfig& c) {
  c.enabled = j.value("enabled", c.enabled);
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "drift") {
      c.kind = AttackKind::drift;
    } else if (kind == "jump") {
      c.kind = AttackKind::jump;
    } else {
      throw ConfigError("attack kind must be \"drift\" or \"jump\", got \"" + kind + "\"");
    }
  }
  c.t_start = j.value("t_start", c.t_start);
  c.drift_duration = j.value("drift_duration", c.drift_duration);
  if (j.contains("target")) {
    const auto& t = j.at("target");
    if (t.size() != 3) throw ConfigError("attack target must have 3 components");
    c.target = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  }
  if (j.contains("jump_offset")) {
    const auto& o = j.at("jump_offset");
    if (o.size() != 3) throw ConfigError("attack jump_offset must have 3 components");
    c.jump_offset = Vec3(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
  }
  c.add_receiver_noise = j.value("add_receiver_noise", c.add_receiver_noise);
  c.validate();
}

}  // namespace spoofwatch::spoofer
