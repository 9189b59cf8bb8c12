#pragma once

#include "spoofwatch/common.hpp"
#include "spoofwatch/gnss.hpp"

namespace spoofwatch::spoofer {

enum class AttackKind { drift, jump };

/// Drift attack: starting at step `t_start`, the implied position slides
/// linearly onto `target` over `drift_duration` steps. The jump kind is the
/// naive abrupt attack: the implied position is displaced by `jump_offset`
/// from `t_start` on.
struct AttackConfig {
  bool enabled = false;
  AttackKind kind = AttackKind::drift;
  int t_start = 100;
  int drift_duration = 50;
  Vec3 target = Vec3::Zero();
  Vec3 jump_offset = Vec3(500.0, 0.0, 0.0);
  /// Add receiver-side noise to the forged ranges (ablation only).
  bool add_receiver_noise = false;

  void validate() const;
};

struct AttackPhase {
  double alpha = 0.0;
  bool active = false;
};

AttackPhase attack_alpha(int t, const AttackConfig& cfg);

Vec3 spoof_position(const Vec3& true_pos, const AttackPhase& phase, const AttackConfig& cfg);

/// Geometry-consistent forged ranges ||P_spoof - S_i|| + bias.
gnss::PseudorangeSet spoof_pseudoranges(const Vec3& spoof_pos, double bias,
                                        const gnss::Constellation& constellation);

void to_json(nlohmann::json& j, const AttackConfig& c);
void from_json(const nlohmann::json& j, AttackConfig& c);

}  // namespace spoofwatch::spoofer
