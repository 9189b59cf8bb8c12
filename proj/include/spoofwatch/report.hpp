#pragma once

#include "spoofwatch/harness.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace spoofwatch::report {

inline constexpr int kSummarySchemaVersion = 1;

struct RunInfo {
  std::uint64_t seed = 0;
  std::string config_hash;
  harness::CalibrationReport calibration{};
  detectors::NominalProfile profile{};
};

nlohmann::json summary_json(const harness::Evaluation& ev, const RunInfo& info);

/// Columns: episode, total_reward, steps, outcome, moving_avg_10.
std::string training_curve_csv(const std::vector<ddpg::EpisodeSummary>& episodes);

/// Shared bins over every logged q; one count column per population
/// (nominal, attacked_pre, attacked_post).
std::string histogram_csv(const harness::Evaluation& ev, int bins);

/// Long format: kind, episode, t, q, alpha, attack_active.
std::string traces_csv(const harness::Evaluation& ev);

std::string detector_bars_csv(const harness::Evaluation& ev);

/// Grouped bar chart (accuracy, FNR, FPR) with std error bars.
std::string detector_bars_svg(const harness::Evaluation& ev);

/// Writes summary.json, q_histogram.csv, q_traces.csv, detector_bars.csv,
/// detector_bars.svg and one CSV plus meta JSON per episode under episodes/.
void emit_report(const harness::Evaluation& ev, const RunInfo& info,
                 const std::filesystem::path& out_dir, int histogram_bins);

}  // namespace spoofwatch::report
