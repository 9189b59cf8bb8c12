#include "spoofwatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace spoofwatch::report {

namespace {

using harness::fmt;

nlohmann::json num(double v) {
  // JSON has no NaN or infinity; those become null.
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::json mean_std_json(const harness::MeanStd& m) {
  return {{"mean", num(m.mean)}, {"std", num(m.std)}, {"n", m.n}};
}

std::string padded(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return buf;
}

}  // namespace

nlohmann::json summary_json(const harness::Evaluation& ev, const RunInfo& info) {
  nlohmann::json dets = nlohmann::json::object();
  for (std::size_t d = 0; d < harness::kNumDetectors; ++d) {
    const auto& m = ev.metrics[d];
    dets[harness::kDetectorNames[d]] = {
        {"accuracy", mean_std_json(m.accuracy)},
        {"false_positive_rate", mean_std_json(m.false_positive)},
        {"false_negative_rate", num(m.fnr_episode)},
        {"step_miss_rate", mean_std_json(m.fnr_step)},
        {"detection_delay", mean_std_json(m.delay)},
        {"detected_episodes", m.detected},
        {"attacked_episodes", m.attacked_episodes},
        {"nominal_episodes", m.nominal_episodes}};
  }
  const harness::QShift shift = harness::q_shift(ev);
  auto outcomes = [](const std::vector<harness::EpisodeLog>& logs) {
    nlohmann::json o = {{"collision", 0}, {"goal_reached", 0}, {"timeout", 0}, {"none", 0}};
    for (const auto& l : logs) o[env::to_string(l.terminal_event)] = o[env::to_string(l.terminal_event)].get<int>() + 1;
    return o;
  };
  return {{"schema_version", kSummarySchemaVersion},
          {"seed", info.seed},
          {"config_hash", info.config_hash},
          {"episodes",
           {{"nominal", ev.nominal.size()},
            {"attacked", ev.attacked.size()},
            {"nominal_outcomes", outcomes(ev.nominal)},
            {"attacked_outcomes", outcomes(ev.attacked)}}},
          {"profile",
           {{"mu0", num(info.profile.mu0)},
            {"sigma0_sq", num(info.profile.sigma0_sq)},
            {"n_samples", info.profile.n_samples}}},
          {"calibration",
           {{"tau_initial", info.calibration.tau_initial},
            {"tau_final", info.calibration.tau_final},
            {"episode_fp_rate", num(info.calibration.episode_fp_rate)}}},
          {"q_shift",
           {{"attacked_post_onset_mean", num(shift.attacked_mean)},
            {"nominal_same_step_mean", num(shift.nominal_mean)},
            {"nominal_same_step_std", num(shift.nominal_std)},
            {"shift_in_nominal_std", num(shift.shift_in_std())},
            {"attacked_samples", shift.attacked_samples},
            {"nominal_samples", shift.nominal_samples}}},
          {"detectors", dets}};
}

std::string training_curve_csv(const std::vector<ddpg::EpisodeSummary>& episodes) {
  std::string out = "episode,total_reward,steps,outcome,moving_avg_10\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const std::size_t from = i >= 9 ? i - 9 : 0;
    double s = 0.0;
    for (std::size_t k = from; k <= i; ++k) s += episodes[k].total_reward;
    out += std::to_string(i + 1) + ',' + fmt(episodes[i].total_reward) + ',' +
           std::to_string(episodes[i].steps) + ',' + env::to_string(episodes[i].outcome) + ',' +
           fmt(s / static_cast<double>(i - from + 1)) + '\n';
  }
  return out;
}

std::string histogram_csv(const harness::Evaluation& ev, int bins) {
  std::vector<double> nominal, pre, post;
  for (const auto& log : ev.nominal) {
    for (const auto& r : log.rows) nominal.push_back(r.q);
  }
  for (const auto& log : ev.attacked) {
    for (const auto& r : log.rows) (r.attack_active ? post : pre).push_back(r.q);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* v : {&nominal, &pre, &post}) {
    for (double q : *v) {
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
  }
  std::string out = "bin_lo,bin_hi,nominal,attacked_pre,attacked_post\n";
  if (!(lo <= hi)) return out;
  if (hi == lo) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  auto counts = [&](const std::vector<double>& v) {
    std::vector<long> c(static_cast<std::size_t>(bins), 0);
    for (double q : v) {
      auto b = static_cast<long>(std::floor((q - lo) / width));
      b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
      ++c[static_cast<std::size_t>(b)];
    }
    return c;
  };
  const auto cn = counts(nominal), cpre = counts(pre), cpost = counts(post);
  for (int b = 0; b < bins; ++b) {
    const auto k = static_cast<std::size_t>(b);
    out += fmt(lo + b * width) + ',' + fmt(b + 1 == bins ? hi : lo + (b + 1) * width) + ',' +
           std::to_string(cn[k]) + ',' + std::to_string(cpre[k]) + ',' +
           std::to_string(cpost[k]) + '\n';
  }
  return out;
}

std::string traces_csv(const harness::Evaluation& ev) {
  std::string out = "kind,episode,t,q,alpha,attack_active\n";
  for (const auto* logs : {&ev.nominal, &ev.attacked}) {
    for (const auto& log : *logs) {
      for (const auto& r : log.rows) {
        out += log.kind + ',' + std::to_string(log.index) + ',' + std::to_string(r.t) + ',' +
               fmt(r.q) + ',' + fmt(r.alpha) + (r.attack_active ? ",1\n" : ",0\n");
      }
    }
  }
  return out;
}

std::string detector_bars_csv(const harness::Evaluation& ev) {
  std::string out =
      "detector,accuracy_mean,accuracy_std,fnr,step_miss_mean,step_miss_std,fpr_mean,fpr_std,"
      "delay_mean,delay_std\n";
  for (std::size_t d = 0; d < harness::kNumDetectors; ++d) {
    const auto& m = ev.metrics[d];
    out += std::string(harness::kDetectorNames[d]) + ',' + fmt(m.accuracy.mean) + ',' +
           fmt(m.accuracy.std) + ',' + fmt(m.fnr_episode) + ',' + fmt(m.fnr_step.mean) + ',' +
           fmt(m.fnr_step.std) + ',' + fmt(m.false_positive.mean) + ',' +
           fmt(m.false_positive.std) + ',' + fmt(m.delay.mean) + ',' + fmt(m.delay.std) + '\n';
  }
  return out;
}

std::string detector_bars_svg(const harness::Evaluation& ev) {
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  const char* groups[] = {"Accuracy", "False negative rate", "False positive rate"};
  const double W = 720, left = 60, bottom = 300, top = 40, plot_h = bottom - top;
  const double group_w = (W - left - 20) / 3.0, bar_w = group_w / 6.0;
  auto y_of = [&](double v) { return bottom - std::clamp(v, 0.0, 1.0) * plot_h; };

  std::string s;
  auto add = [&s](const std::string& x) { s += x + '\n'; };
  add("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"360\" "
      "font-family=\"sans-serif\" font-size=\"12\">");
  add("<rect width=\"720\" height=\"360\" fill=\"white\"/>");
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    add("<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(W - 20) + "\" y1=\"" + fmt(y_of(v)) +
        "\" y2=\"" + fmt(y_of(v)) + "\" stroke=\"#ddd\"/>");
    add("<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(y_of(v) + 4) +
        "\" text-anchor=\"end\">" + fmt(v) + "</text>");
  }
  for (int g = 0; g < 3; ++g) {
    const double gx = left + g * group_w;
    for (std::size_t d = 0; d < harness::kNumDetectors; ++d) {
      const auto& m = ev.metrics[d];
      double v = 0.0, e = 0.0;
      if (g == 0) {
        v = m.accuracy.mean;
        e = m.accuracy.std;
      } else if (g == 1) {
        v = m.fnr_step.mean;
        e = m.fnr_step.std;
      } else {
        v = m.false_positive.mean;
        e = m.false_positive.std;
      }
      if (!std::isfinite(v)) v = 0.0;
      if (!std::isfinite(e)) e = 0.0;
      const double x = gx + bar_w * (1.0 + static_cast<double>(d));
      add("<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y_of(v)) + "\" width=\"" + fmt(bar_w * 0.9) +
          "\" height=\"" + fmt(bottom - y_of(v)) + "\" fill=\"" + colors[d] + "\"/>");
      const double cx = x + bar_w * 0.45;
      add("<line x1=\"" + fmt(cx) + "\" x2=\"" + fmt(cx) + "\" y1=\"" + fmt(y_of(v - e)) +
          "\" y2=\"" + fmt(y_of(v + e)) + "\" stroke=\"black\"/>");
    }
    add("<text x=\"" + fmt(gx + group_w / 2) + "\" y=\"" + fmt(bottom + 18) +
        "\" text-anchor=\"middle\">" + groups[g] + "</text>");
  }
  for (std::size_t d = 0; d < harness::kNumDetectors; ++d) {
    const double x = left + 10 + 150.0 * static_cast<double>(d);
    add("<rect x=\"" + fmt(x) + "\" y=\"12\" width=\"12\" height=\"12\" fill=\"" + colors[d] +
        "\"/>");
    add("<text x=\"" + fmt(x + 16) + "\" y=\"22\">" + harness::kDetectorNames[d] + "</text>");
  }
  add("<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(W - 20) + "\" y1=\"" + fmt(bottom) +
      "\" y2=\"" + fmt(bottom) + "\" stroke=\"black\"/>");
  add("</svg>");
  return s;
}

void emit_report(const harness::Evaluation& ev, const RunInfo& info,
                 const std::filesystem::path& out_dir, int histogram_bins) {
  std::filesystem::create_directories(out_dir / "episodes");
  harness::write_text(out_dir / "summary.json", summary_json(ev, info).dump(2) + '\n');
  harness::write_text(out_dir / "q_histogram.csv", histogram_csv(ev, histogram_bins));
  harness::write_text(out_dir / "q_traces.csv", traces_csv(ev));
  harness::write_text(out_dir / "detector_bars.csv", detector_bars_csv(ev));
  harness::write_text(out_dir / "detector_bars.svg", detector_bars_svg(ev));
  for (const auto* logs : {&ev.nominal, &ev.attacked}) {
    for (const auto& log : *logs) {
      const std::string stem = log.kind + "_" + padded(log.index);
      harness::write_text(out_dir / "episodes" / (stem + ".csv"), harness::episode_csv(log));
      harness::write_text(out_dir / "episodes" / (stem + ".json"),
                          harness::episode_meta(log).dump(2) + '\n');
    }
  }
}

}  // namespace spoofwatch::report
