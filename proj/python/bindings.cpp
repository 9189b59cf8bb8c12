#include "spoofwatch/config.hpp"
#include "spoofwatch/ddpg.hpp"
#include "spoofwatch/detectors.hpp"
#include "spoofwatch/gnss.hpp"
#include "spoofwatch/harness.hpp"
#include "spoofwatch/report.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <filesystem>

namespace py = pybind11;
using namespace spoofwatch;

namespace {

// Configs cross the boundary as JSON text; the Python side parses it.
ExperimentConfig config_from(const std::string& text) {
  if (text.empty()) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  auto cfg = j.get<ExperimentConfig>();
  cfg.validate();
  return cfg;
}

detectors::NominalProfile make_profile(double mu0, double sigma0_sq) {
  detectors::NominalProfile p;
  p.mu0 = mu0;
  p.sigma0_sq = sigma0_sq;
  return p;
}

using Xyz = std::array<double, 3>;
Xyz to_xyz(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 to_vec(const Xyz& a) { return Vec3(a[0], a[1], a[2]); }

gnss::Constellation constellation_of(const std::vector<Xyz>& sats) {
  gnss::Constellation c;
  for (std::size_t i = 0; i < sats.size(); ++i) c.satellites.push_back({static_cast<int>(i), to_vec(sats[i])});
  return c;
}

}  // namespace

PYBIND11_MODULE(_spoofwatch, m) {
  m.doc() = "Native core of the spoofwatch GNSS spoofing detection toolkit";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CorruptFileError>(m, "CorruptFileError", PyExc_IOError);
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ArithmeticError);

  m.def("default_config_json", [] { return nlohmann::json(ExperimentConfig{}).dump(); });
  m.def("resolve_config_json", [](const std::string& text) { return canonical_json(config_from(text)); },
        py::arg("config_json"));
  m.def("load_config_json", [](const std::string& path) { return canonical_json(load_config(path)); },
        py::arg("path"));
  m.def("config_hash", [](const std::string& text) { return config_hash(config_from(text)); },
        py::arg("config_json"));

  m.def("make_constellation",
        [](int n, double radius, std::uint64_t seed) {
          std::vector<Xyz> out;
          for (const auto& s : gnss::make_constellation(n, radius, seed).satellites) out.push_back(to_xyz(s.position));
          return out;
        },
        py::arg("n_satellites") = 8, py::arg("radius") = 2.0e7, py::arg("seed") = 0);
  m.def("pseudoranges",
        [](const std::vector<Xyz>& sats, const Xyz& pos, double bias, double noise_sigma, std::uint64_t seed) {
          Rng rng(seed);
          return gnss::measure_pseudoranges({to_vec(pos), bias}, constellation_of(sats), noise_sigma, rng).values;
        },
        py::arg("satellites"), py::arg("position"), py::arg("clock_bias") = 0.0,
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);
  m.def("solve_pvt",
        [](const std::vector<Xyz>& sats, const std::vector<double>& ranges) {
          gnss::PseudorangeSet meas;
          meas.values = ranges;
          const auto sol = gnss::solve_pvt(meas, constellation_of(sats));
          py::dict d;
          d["position"] = to_xyz(sol.estimate.position);
          d["clock_bias"] = sol.estimate.clock_bias;
          d["iterations"] = sol.iterations;
          d["converged"] = sol.converged;
          d["residuals"] = sol.residuals;
          return d;
        },
        py::arg("satellites"), py::arg("ranges"));

  py::class_<detectors::Bocpd>(m, "Bocpd")
      .def(py::init([](double mu0, double sigma0_sq, double hazard, double prune, std::size_t cap) {
             return detectors::Bocpd(make_profile(mu0, sigma0_sq), hazard, prune, cap);
           }),
           py::arg("mu0"), py::arg("sigma0_sq"), py::arg("hazard") = 0.01,
           py::arg("prune_threshold") = 1e-8, py::arg("max_run_length") = 0)
      .def("update", &detectors::Bocpd::update, py::arg("q"))
      .def("posterior", &detectors::Bocpd::posterior)
      .def_property_readonly("map_run_length", &detectors::Bocpd::map_run_length)
      .def_property_readonly("t", &detectors::Bocpd::t)
      .def_property_readonly("underflow_resets", &detectors::Bocpd::underflow_resets);

  m.def("bocpd_flag",
        [](std::size_t l_hat, int t, int tau, int warmup) { return detectors::bocpd_flag(l_hat, t, tau, warmup).flag; },
        py::arg("l_hat"), py::arg("t"), py::arg("tau") = 5, py::arg("warmup") = 10);
  m.def("bocpd_oracle",
        [](const std::vector<double>& q, double mu0, double sigma0_sq, double hazard) {
          return detectors::bocpd_oracle(q, make_profile(mu0, sigma0_sq), hazard);
        },
        py::arg("stream"), py::arg("mu0"), py::arg("sigma0_sq"), py::arg("hazard"));
  m.def("oracle_check",
        [](std::uint64_t seed, int n, int length) {
          const auto r = detectors::oracle_check(seed, n, length);
          py::dict d;
          d["streams"] = r.streams;
          d["with_change"] = r.with_change;
          d["max_tv"] = r.max_tv;
          return d;
        },
        py::arg("seed") = 0, py::arg("n_streams") = 50, py::arg("length") = 30);
  m.def("fit_nominal_profile",
        [](const std::vector<std::vector<double>>& streams) {
          const auto p = detectors::fit_nominal_profile(streams);
          return std::make_pair(p.mu0, p.sigma0_sq);
        },
        py::arg("streams"));

  m.def("train",
        [](const std::string& config_json, std::uint64_t seed, const std::string& checkpoint) {
          const auto cfg = config_from(config_json);
          ddpg::TrainResult r;
          {
            py::gil_scoped_release release;
            r = ddpg::train(cfg.env, harness::constellation_for(cfg.env), cfg.train, seed);
            if (!checkpoint.empty()) ddpg::save_checkpoint(r.agent, checkpoint);
          }
          return r.reward_history;
        },
        py::arg("config_json"), py::arg("seed"), py::arg("checkpoint") = "");

  m.def("evaluate",
        [](const std::string& config_json, std::uint64_t seed, const std::string& checkpoint,
           const std::string& out_dir) {
          const auto cfg = config_from(config_json);
          nlohmann::json summary;
          {
            py::gil_scoped_release release;
            const auto agent = ddpg::load_checkpoint(checkpoint);
            harness::CalibrationReport calib;
            const auto art = harness::fit_detectors(agent, cfg, seed, &calib);
            const auto ev = harness::evaluate(agent, cfg, art, seed);
            report::RunInfo info;
            info.seed = seed;
            info.config_hash = config_hash(cfg);
            info.calibration = calib;
            info.profile = art.profile;
            if (!out_dir.empty()) {
              std::filesystem::create_directories(out_dir);
              detectors::save_artifacts(art, std::filesystem::path(out_dir) / "detectors.json");
              report::emit_report(ev, info, out_dir, cfg.eval.histogram_bins);
            }
            summary = report::summary_json(ev, info);
          }
          return summary.dump();
        },
        py::arg("config_json"), py::arg("seed"), py::arg("checkpoint"), py::arg("out_dir") = "");
}
