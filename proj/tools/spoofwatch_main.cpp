#include "spoofwatch/config.hpp"
#include "spoofwatch/ddpg.hpp"
#include "spoofwatch/detectors.hpp"
#include "spoofwatch/harness.hpp"
#include "spoofwatch/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace spoofwatch;

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string checkpoint;
  std::string profile;
  bool attack = false;
  bool quiet = false;
};

ExperimentConfig resolve_config(const Options& o) {
  if (o.config.empty()) {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  return load_config(o.config);
}

void log_line(const Options& o, const std::string& s) {
  if (!o.quiet) std::cerr << s << '\n';
}

nlohmann::json run_meta(const ExperimentConfig& cfg, const Options& o, const char* command) {
  return {{"command", command},
          {"seed", o.seed},
          {"config_hash", config_hash(cfg)},
          {"config", cfg}};
}

ddpg::TrainResult do_train(const ExperimentConfig& cfg, const Options& o, const fs::path& out) {
  const auto constellation = harness::constellation_for(cfg.env);
  auto progress = [&o](int ep, const ddpg::EpisodeSummary& s) {
    if ((ep + 1) % 10 == 0) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "episode %d: reward %.2f steps %d %s", ep + 1,
                    s.total_reward, s.steps, env::to_string(s.outcome).c_str());
      log_line(o, buf);
    }
  };
  auto result = ddpg::train(cfg.env, constellation, cfg.train, o.seed, progress);
  fs::create_directories(out);
  ddpg::save_checkpoint(result.agent, out / "agent.ckpt");
  harness::write_text(out / "training_curve.csv", report::training_curve_csv(result.episodes));
  harness::write_text(out / "train.json", run_meta(cfg, o, "train").dump(2) + '\n');
  return result;
}

detectors::DetectorArtifacts do_profile(const ddpg::Agent& agent, const ExperimentConfig& cfg,
                                        const Options& o, const fs::path& out,
                                        harness::CalibrationReport* calib) {
  harness::CalibrationReport rep;
  auto art = harness::fit_detectors(agent, cfg, o.seed, &rep);
  fs::create_directories(out);
  detectors::save_artifacts(art, out / "detectors.json");
  nlohmann::json meta = run_meta(cfg, o, "profile");
  meta["calibration"] = {{"tau_initial", rep.tau_initial},
                         {"tau_final", rep.tau_final},
                         {"episode_fp_rate", rep.episode_fp_rate}};
  harness::write_text(out / "profile.json", meta.dump(2) + '\n');
  if (calib != nullptr) *calib = rep;
  return art;
}

int cmd_train(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto result = do_train(cfg, o, o.out);
  std::printf("trained %d episodes; checkpoint %s\n", static_cast<int>(result.episodes.size()),
              (fs::path(o.out) / "agent.ckpt").string().c_str());
  return 0;
}

int cmd_profile(const Options& o) {
  const auto cfg = resolve_config(o);
  if (o.checkpoint.empty()) throw ConfigError("profile needs --checkpoint");
  const auto agent = ddpg::load_checkpoint(o.checkpoint);
  harness::CalibrationReport rep;
  const auto art = do_profile(agent, cfg, o, o.out, &rep);
  std::printf("profile mu0 %.6g sigma0_sq %.6g n %zu; tau %d\n", art.profile.mu0,
              art.profile.sigma0_sq, art.profile.n_samples, art.bocpd.tau);
  return 0;
}

int cmd_run(const Options& o) {
  const auto cfg = resolve_config(o);
  if (o.checkpoint.empty()) throw ConfigError("run needs --checkpoint");
  const auto agent = ddpg::load_checkpoint(o.checkpoint);
  std::optional<detectors::DetectorArtifacts> art;
  if (!o.profile.empty()) art = detectors::load_artifacts(o.profile);
  spoofer::AttackConfig attack = cfg.attack;
  attack.enabled = o.attack;
  auto log = harness::run_episode(agent, cfg.env, harness::constellation_for(cfg.env), attack,
                                  art ? &*art : nullptr,
                                  derive_seed(o.seed, streams::kEval, 0));
  log.kind = o.attack ? "attacked" : "nominal";
  log.config_hash = config_hash(cfg);
  const fs::path out(o.out);
  fs::create_directories(out);
  harness::write_text(out / "episode.csv", harness::episode_csv(log));
  harness::write_text(out / "episode.json", harness::episode_meta(log).dump(2) + '\n');
  std::printf("%s episode: %zu steps, %s\n", log.kind.c_str(), log.rows.size(),
              env::to_string(log.terminal_event).c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  const auto cfg = resolve_config(o);
  const fs::path out(o.out);
  fs::create_directories(out);
  ddpg::Agent agent;
  if (o.checkpoint.empty()) {
    log_line(o, "no checkpoint given; training");
    agent = do_train(cfg, o, out).agent;
  } else {
    agent = ddpg::load_checkpoint(o.checkpoint);
  }
  harness::CalibrationReport calib;
  detectors::DetectorArtifacts art;
  if (o.profile.empty()) {
    log_line(o, "no detector profile given; profiling");
    art = do_profile(agent, cfg, o, out, &calib);
  } else {
    art = detectors::load_artifacts(o.profile);
    calib.tau_initial = calib.tau_final = art.bocpd.tau;
  }
  log_line(o, "evaluating");
  const auto ev = harness::evaluate(agent, cfg, art, o.seed);
  report::RunInfo info;
  info.seed = o.seed;
  info.config_hash = config_hash(cfg);
  info.calibration = calib;
  info.profile = art.profile;
  report::emit_report(ev, info, out, cfg.eval.histogram_bins);

  std::printf("%-13s %9s %9s %9s %9s\n", "detector", "accuracy", "fpr", "fnr", "delay");
  for (std::size_t d = 0; d < harness::kNumDetectors; ++d) {
    const auto& m = ev.metrics[d];
    std::printf("%-13s %9.3f %9.3f %9.3f %9.2f\n", harness::kDetectorNames[d], m.accuracy.mean,
                m.false_positive.mean, m.fnr_episode, m.delay.mean);
  }
  std::printf("summary %s\n", (out / "summary.json").string().c_str());
  return 0;
}

int cmd_oracle_check(const Options& o) {
  resolve_config(o);  // rejects a bad --config even though the suite needs none
  const auto r = detectors::oracle_check(o.seed);
  std::printf("oracle-check: %d streams (%d with a change), max TV distance %.3e\n", r.streams,
              r.with_change, r.max_tv);
  return r.max_tv < 1e-9 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS spoofing detection experiments for a DDPG-guided UAV"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Experiment config JSON");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--quiet", o.quiet, "Suppress progress on stderr");

  auto* train = app.add_subcommand("train", "Train the agent; writes checkpoint and training curve");
  auto* profile = app.add_subcommand("profile", "Fit the nominal profile and detector baselines");
  profile->add_option("--checkpoint", o.checkpoint, "Agent checkpoint")->required();
  auto* run = app.add_subcommand("run", "Run one logged episode");
  run->add_option("--checkpoint", o.checkpoint, "Agent checkpoint")->required();
  run->add_option("--profile", o.profile, "Detector artifacts JSON");
  run->add_flag("--attack", o.attack, "Enable the configured attack");
  auto* eval = app.add_subcommand("eval", "Nominal and attacked episodes with every detector");
  eval->add_option("--checkpoint", o.checkpoint, "Agent checkpoint (trained when absent)");
  eval->add_option("--profile", o.profile, "Detector artifacts JSON (fitted when absent)");
  auto* oracle = app.add_subcommand("oracle-check", "Recursive BOCPD against the exhaustive oracle");

  // Global options may also follow the subcommand.
  for (auto* sub : {train, profile, run, eval, oracle}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*train) return cmd_train(o);
    if (*profile) return cmd_profile(o);
    if (*run) return cmd_run(o);
    if (*eval) return cmd_eval(o);
    if (*oracle) return cmd_oracle_check(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
