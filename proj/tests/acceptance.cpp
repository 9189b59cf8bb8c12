// Runs every acceptance criterion and prints one PASS/FAIL line per item.
// Exit status is non-zero when any criterion fails.

#include "oracles.hpp"

#include "spoofwatch/config.hpp"
#include "spoofwatch/ddpg.hpp"
#include "spoofwatch/detectors.hpp"
#include "spoofwatch/harness.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace spoofwatch;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %2d %-34s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
}

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec3 airspace_point(Rng& rng) {
  return Vec3(uniform(rng, 0, 1000), uniform(rng, 0, 1000), uniform(rng, 0, 300));
}

void criterion_pvt() {
  const auto t0 = Clock::now();
  const auto c = gnss::make_constellation(8, 2.0e7, 0);
  Rng rng(101);
  double worst = 0.0;
  int max_iter = 0;
  bool ok = true;
  for (int i = 0; i < 100; ++i) {
    const gnss::ReceiverEstimate truth{airspace_point(rng), uniform(rng, -100, 100)};
    const auto sol = gnss::solve_pvt(gnss::measure_pseudoranges(truth, c, 0.0, rng), c);
    ok = ok && sol.converged;
    worst = std::max({worst, (sol.estimate.position - truth.position).norm(),
                      std::abs(sol.estimate.clock_bias - truth.clock_bias)});
    max_iter = std::max(max_iter, sol.iterations);
  }
  const double secs = seconds_since(t0);
  report(1, "PVT solver correctness", ok && worst < 1e-6 && max_iter <= 20 && secs < 1.0,
         format("max error %.2e m, max iterations %d, %.3f s", worst, max_iter, secs));
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  const auto c = gnss::make_constellation(8, 2.0e7, 0);
  Rng rng(202);
  double jac = 0.0;
  for (int i = 0; i < 100; ++i)
    jac = std::max(jac, oracles::jacobian_error(c, airspace_point(rng), uniform(rng, -100, 100)));
  const auto actor = nn::Mlp::create({9, 64, 64, 3}, nn::Activation::relu, nn::Activation::tanh,
                                     nn::Init::fan_in_uniform, rng, 0.5);
  const auto critic = nn::Mlp::create({12, 64, 64, 1}, nn::Activation::relu,
                                      nn::Activation::identity, nn::Init::fan_in_uniform, rng, 0.5);
  const double ga = oracles::mlp_gradient_error(actor, Eigen::MatrixXd::Random(9, 4),
                                                Eigen::MatrixXd::Random(3, 4));
  const double gc = oracles::mlp_gradient_error(critic, Eigen::MatrixXd::Random(12, 4),
                                                Eigen::MatrixXd::Random(1, 4));
  const double secs = seconds_since(t0);
  report(2, "Jacobian and gradient oracles", jac < 1e-6 && ga < 1e-4 && gc < 1e-4 && secs < 10.0,
         format("jacobian %.2e, actor %.2e, critic %.2e, %.2f s", jac, ga, gc, secs));
}

void criterion_oracle() {
  const auto t0 = Clock::now();
  const auto r = detectors::oracle_check(303, 50, 30);
  const double secs = seconds_since(t0);
  report(3, "BOCPD oracle equivalence", r.streams == 50 && r.max_tv < 1e-9 && secs < 10.0,
         format("%d streams (%d with a change), max TV %.2e, %.3f s", r.streams, r.with_change,
                r.max_tv, secs));
}

void criterion_synthetic() {
  const auto t0 = Clock::now();
  detectors::NominalProfile p;
  p.mu0 = 0.0;
  p.sigma0_sq = 1.0;
  const detectors::BocpdConfig defaults;
  Rng rng(404);
  int responsive = 0;
  const int trials = 20;
  for (int k = 0; k < trials; ++k) {
    detectors::Bocpd b(p, 0.01);
    bool hit = false;
    for (int t = 0; t < 80; ++t) {
      const double q = (t >= 50 ? -10.0 : 0.0) + gaussian(rng, 1.0);
      const auto l = b.update(q);
      if (t >= 50 && t < 55 && l <= 5) hit = true;
    }
    responsive += hit ? 1 : 0;
  }
  detectors::Bocpd flat(p, 0.01);
  int flags = 0;
  for (int t = 1; t <= 1000; ++t)
    flags += detectors::bocpd_flag(flat.update(0.0), t, defaults.tau, defaults.warmup).flag ? 1 : 0;
  const double secs = seconds_since(t0);
  report(4, "BOCPD synthetic responsiveness", responsive == trials && flags == 0 && secs < 5.0,
         format("%d/%d steps caught within 5 steps, %d flags on constant stream, %.3f s", responsive,
                trials, flags, secs));
}

struct SeedRun {
  std::uint64_t seed = 0;
  ddpg::TrainResult trained;
  double train_seconds = 0.0;
  double early_ma = 0.0, late_ma = 0.0;
  double goal_rate = 0.0;
};

double moving_average_mean(const std::vector<double>& r, int from, int to) {
  // Mean over episodes [from, to) of the trailing 10-episode average.
  double acc = 0.0;
  for (int e = from; e < to; ++e) {
    const int lo = std::max(0, e - 9);
    double s = 0.0;
    for (int k = lo; k <= e; ++k) s += r[static_cast<std::size_t>(k)];
    acc += s / (e - lo + 1);
  }
  return acc / (to - from);
}

SeedRun train_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  const auto t0 = Clock::now();
  run.trained = ddpg::train(cfg.env, harness::constellation_for(cfg.env), cfg.train, seed);
  run.train_seconds = seconds_since(t0);
  const auto& r = run.trained.reward_history;
  const int n = static_cast<int>(r.size());
  run.early_ma = moving_average_mean(r, 30, 50);
  run.late_ma = moving_average_mean(r, n - 20, n);
  run.goal_rate = harness::goal_rate(run.trained.agent, cfg, seed, 20);
  return run;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Every regular file under `a` must exist under `b` with identical bytes.
bool same_tree(const fs::path& a, const fs::path& b, int& files, std::string& diff) {
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || read_file(e.path()) != read_file(b / rel)) {
      diff = rel.string();
      return false;
    }
  }
  return files > 0;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SPOOFWATCH_CLI_PATH + "\" " + args + " --quiet > /dev/null";
  return std::system(cmd.c_str());
}

void criterion_determinism(const fs::path& work) {
  const fs::path cfg_path = work / "small.json";
  ExperimentConfig small = load_config(fs::path(SPOOFWATCH_SOURCE_DIR) / "configs" / "default.json");
  small.train.episodes = 12;
  small.train.warmup_episodes = 3;
  small.eval.n_nominal = small.eval.n_attacked = 4;
  small.eval.n_profile = 8;
  small.eval.n_calibration = 4;
  small.detectors.autoencoder.epochs = 20;
  std::ofstream(cfg_path) << nlohmann::json(small).dump(2);

  bool ok = true;
  int total = 0;
  std::string diff;
  for (const char* run : {"r1", "r2"}) {
    const auto out = work / run;
    fs::remove_all(out);
    const std::string common = "--config \"" + cfg_path.string() + "\" --seed 9 ";
    ok = ok && run_cli("train " + common + "--out \"" + (out / "train").string() + "\"") == 0;
    const std::string ckpt = (out / "train" / "agent.ckpt").string();
    ok = ok && run_cli("eval " + common + "--checkpoint \"" + ckpt + "\" --out \"" +
                       (out / "eval").string() + "\"") == 0;
    ok = ok && run_cli("run " + common + "--attack --checkpoint \"" + ckpt + "\" --profile \"" +
                       (out / "eval" / "detectors.json").string() + "\" --out \"" +
                       (out / "run").string() + "\"") == 0;
  }
  int files = 0;
  ok = ok && same_tree(work / "r1", work / "r2", files, diff);
  report(9, "Determinism", ok,
         ok ? format("train, eval and run repeated: %d files byte-identical", files)
            : format("mismatch or failure (%s)", diff.empty() ? "CLI error" : diff.c_str()));
}

}  // namespace

int main() {
  const auto t_start = Clock::now();
  const fs::path work = fs::temp_directory_path() / "spoofwatch_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion_pvt();
  criterion_gradients();
  criterion_oracle();
  criterion_synthetic();

  const ExperimentConfig cfg = load_config(fs::path(SPOOFWATCH_SOURCE_DIR) / "configs" / "default.json");

  // Criterion 5: three independent training runs.
  std::vector<std::future<SeedRun>> jobs;
  for (std::uint64_t s : {1, 2, 3}) jobs.push_back(std::async(std::launch::async, train_seed, cfg, s));
  std::vector<SeedRun> runs;
  for (auto& j : jobs) runs.push_back(j.get());
  int improved = 0;
  bool goals = true;
  std::string detail;
  for (const auto& r : runs) {
    const bool up = r.late_ma > r.early_ma;
    improved += up ? 1 : 0;
    goals = goals && r.goal_rate >= 0.7;
    detail += format("seed %llu: MA %.1f -> %.1f, goal %.0f%%; ",
                     static_cast<unsigned long long>(r.seed), r.early_ma, r.late_ma, 100 * r.goal_rate);
  }
  report(5, "Training trend", improved >= 2 && goals,
         format("%d/3 seeds improve. ", improved) + detail);

  // Criteria 6-8 and 10 use the first seed's agent end to end.
  const SeedRun& main_run = runs.front();
  const auto t_profile = Clock::now();
  harness::CalibrationReport calib;
  const auto art = harness::fit_detectors(main_run.trained.agent, cfg, main_run.seed, &calib);
  const auto ev = harness::evaluate(main_run.trained.agent, cfg, art, main_run.seed);
  const double pipeline_seconds = main_run.train_seconds + seconds_since(t_profile);

  const auto shift = harness::q_shift(ev);
  report(6, "Value-distribution shift", shift.shift_in_std() > 0.5,
         format("attacked post-onset mean %.2f vs nominal %.2f (std %.2f): %.1f std lower",
                shift.attacked_mean, shift.nominal_mean, shift.nominal_std, shift.shift_in_std()));

  {
    constexpr std::size_t kResidual = 2;
    int flagged = 0;
    for (const auto& log : ev.attacked) {
      bool any = false;
      for (const auto& row : log.rows) any = any || row.verdicts[kResidual].flag;
      flagged += any ? 1 : 0;
    }
    const double drift_rate = static_cast<double>(flagged) / static_cast<double>(ev.attacked.size());

    spoofer::AttackConfig jump = cfg.attack;
    jump.enabled = true;
    jump.kind = spoofer::AttackKind::jump;
    jump.jump_offset = Vec3(500, 0, 0);
    jump.t_start = 50;
    const auto constellation = harness::constellation_for(cfg.env);
    int jump_eps = 0, jump_caught = 0;
    for (std::uint64_t i = 0; i < 60 && jump_eps < 20; ++i) {
      const auto log = harness::run_episode(main_run.trained.agent, cfg.env, constellation, jump, &art,
                                            derive_seed(main_run.seed, 0x6a756d70, i));
      const int onset = log.onset();
      if (onset < 0) continue;
      ++jump_eps;
      bool caught = false;
      for (const auto& row : log.rows) caught = caught || (row.t >= onset && row.verdicts[kResidual].flag);
      jump_caught += caught ? 1 : 0;
    }
    report(7, "Evasion property", drift_rate < 0.1 && jump_eps == 20 && jump_caught == jump_eps,
           format("drift flagged in %.0f%% of attacked episodes; 500 m jump flagged in %d/%d",
                  100 * drift_rate, jump_caught, jump_eps));
  }

  {
    const auto& b = ev.metrics[0];
    bool best = true;
    std::string others;
    for (std::size_t d = 1; d < harness::kNumDetectors; ++d) {
      best = best && b.accuracy.mean >= ev.metrics[d].accuracy.mean;
      others += format("%s%s %.3f", d == 1 ? " " : ", ", harness::kDetectorNames[d],
                       ev.metrics[d].accuracy.mean);
    }
    const bool pass = b.accuracy.mean >= 0.9 && best && b.false_positive.mean <= 0.1 &&
                      b.fnr_episode <= 0.1 && b.delay.mean <= 25.0;
    report(8, "Comparative detection", pass,
           format("seed %llu (tau %d): BOCPD acc %.3f, FPR %.3f, FNR %.3f, delay %.1f; baseline acc",
                  static_cast<unsigned long long>(main_run.seed), art.bocpd.tau, b.accuracy.mean,
                  b.false_positive.mean, b.fnr_episode, b.delay.mean) + others);
    // Remaining seeds for reference; they do not decide the criterion.
    for (std::size_t k = 1; k < runs.size(); ++k) {
      const auto a2 = harness::fit_detectors(runs[k].trained.agent, cfg, runs[k].seed);
      const auto e2 = harness::evaluate(runs[k].trained.agent, cfg, a2, runs[k].seed);
      const auto& m = e2.metrics[0];
      std::printf("     seed %llu (tau %d): BOCPD acc %.3f, FPR %.3f, FNR %.3f, delay %.1f; PH acc %.3f, AE acc %.3f\n",
                  static_cast<unsigned long long>(runs[k].seed), a2.bocpd.tau, m.accuracy.mean,
                  m.false_positive.mean, m.fnr_episode, m.delay.mean, e2.metrics[1].accuracy.mean,
                  e2.metrics[3].accuracy.mean);
    }
  }

  criterion_determinism(work);

  report(10, "End-to-end runtime", pipeline_seconds < 15 * 60,
         format("train + profile + eval for one seed: %.1f s", pipeline_seconds));

  fs::remove_all(work);
  std::printf("%s: %d failing criteria, %.1f s total\n", failures == 0 ? "ALL PASS" : "FAILURES",
              failures, seconds_since(t_start));
  return failures == 0 ? 0 : 1;
}
