#include "spoofwatch/gnss.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace spoofwatch::gnss {

namespace {

constexpr double kMinSeparationRad = 10.0 * std::numbers::pi / 180.0;
constexpr double kMaxConditionNumber = 1e12;
// Keep satellites above 15 degrees elevation; very low elevations blow up GDOP.
constexpr double kMinElevationSin = 0.2588190451025208;

void validate_alignment(const PseudorangeSet& meas, const Constellation& c) {
  if (meas.values.size() != c.size()) {
    throw DimensionError("pseudorange count " + std::to_string(meas.values.size()) +
                         " does not match constellation size " + std::to_string(c.size()));
  }
}

}  // namespace

Constellation make_constellation(int n_sats, double radius, std::uint64_t seed) {
  if (n_sats < 4) {
    throw ConfigError("constellation needs at least 4 satellites, got " +
                      std::to_string(n_sats));
  }
  if (!(radius >= 1e7)) {
    throw ConfigError("satellite radius must be >= 1e7 m, got " + std::to_string(radius));
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> dirs;
  int attempts = 0;
  while (static_cast<int>(dirs.size()) < n_sats) {
    if (++attempts > 200000) {
      throw ConfigError("cannot place " + std::to_string(n_sats) +
                        " satellites with 10 degree separation");
    }
    Vec3 d(normal(rng), normal(rng), normal(rng));
    if (d.norm() < 1e-9) continue;
    d.normalize();
    d.z() = std::abs(d.z());
    if (d.z() < kMinElevationSin) continue;
    bool separated = true;
    for (const Vec3& other : dirs) {
      const double c = std::clamp(d.dot(other), -1.0, 1.0);
      if (std::acos(c) < kMinSeparationRad) {
        separated = false;
        break;
      }
    }
    if (separated) dirs.push_back(d);
  }

  Constellation out;
  out.satellites.reserve(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    out.satellites.push_back({static_cast<int>(i), radius * dirs[i]});
  }
  return out;
}

double predicted_range(const ReceiverEstimate& est, const Satellite& sat) {
  return (est.position - sat.position).norm() + est.clock_bias;
}

PseudorangeSet measure_pseudoranges(const ReceiverEstimate& truth,
                                    const Constellation& constellation,
                                    double noise_sigma, Rng& rng) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  PseudorangeSet out;
  out.values.reserve(constellation.size());
  for (const auto& sat : constellation.satellites) {
    out.values.push_back(predicted_range(truth, sat) + gaussian(rng, noise_sigma));
  }
  return out;
}

std::vector<double> residuals(const ReceiverEstimate& est, const PseudorangeSet& meas,
                              const Constellation& constellation) {
  validate_alignment(meas, constellation);
  std::vector<double> out(meas.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = meas.values[i] - predicted_range(est, constellation.satellites[i]);
  }
  return out;
}

Jacobian jacobian(const ReceiverEstimate& est, const Constellation& constellation) {
  Jacobian h(static_cast<Eigen::Index>(constellation.size()), 4);
  for (std::size_t i = 0; i < constellation.size(); ++i) {
    const Vec3 los = est.position - constellation.satellites[i].position;
    const double range = los.norm();
    if (range < 1.0) {
      throw GeometryError("receiver within 1 m of satellite " +
                          std::to_string(constellation.satellites[i].id));
    }
    const auto row = static_cast<Eigen::Index>(i);
    h.block<1, 3>(row, 0) = (los / range).transpose();
    h(row, 3) = 1.0;
  }
  return h;
}

std::pair<ReceiverEstimate, double> ls_step(const ReceiverEstimate& est,
                                            const PseudorangeSet& meas,
                                            const Constellation& constellation) {
  const Jacobian h = jacobian(est, constellation);
  const std::vector<double> d = residuals(est, meas, constellation);
  const Eigen::Map<const Eigen::VectorXd> delta(d.data(), static_cast<Eigen::Index>(d.size()));

  const Eigen::Matrix4d normal = h.transpose() * h;
  // Symmetric PSD, so the singular values are the eigenvalues.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
    throw GeometryError("singular satellite geometry (normal-matrix condition number " +
                        std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
  }

  const Eigen::Vector4d dp = normal.ldlt().solve(h.transpose() * delta);
  ReceiverEstimate next = est;
  next.position += dp.head<3>();
  next.clock_bias += dp(3);
  return {next, dp.norm()};
}

PvtSolution solve_pvt(const PseudorangeSet& meas, const Constellation& constellation,
                      const SolverOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("solver tolerance must be > 0");
  if (opts.max_iter < 1) throw ConfigError("solver max_iter must be >= 1");
  validate_alignment(meas, constellation);

  PvtSolution sol;
  ReceiverEstimate est = opts.init;
  for (int k = 0; k < opts.max_iter; ++k) {
    auto [next, step] = ls_step(est, meas, constellation);
    est = next;
    sol.iterations = k + 1;
    sol.final_correction_norm = step;
    if (step < opts.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.estimate = est;
  sol.residuals = residuals(est, meas, constellation);
  double ss = 0.0;
  for (double r : sol.residuals) ss += r * r;
  sol.final_residual_norm = std::sqrt(ss);
  return sol;
}

void to_json(nlohmann::json& j, const Constellation& c) {
  j = nlohmann::json::object();
  j["version"] = 1;
  auto& sats = j["satellites"] = nlohmann::json::array();
  for (const auto& s : c.satellites) {
    sats.push_back({{"id", s.id}, {"position", {s.position.x(), s.position.y(), s.position.z()}}});
  }
}

void from_json(const nlohmann::json& j, Constellation& c) {
  c.satellites.clear();
  for (const auto& s : j.at("satellites")) {
    const auto& p = s.at("position");
    if (p.size() != 3) throw ConfigError("satellite position must have 3 components");
    c.satellites.push_back({s.at("id").get<int>(),
                            Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>())});
  }
  if (c.satellites.size() < 4) throw ConfigError("constellation needs at least 4 satellites");
  for (const auto& s : c.satellites) {
    if (s.position.norm() < 1e7) {
      throw ConfigError("satellite " + std::to_string(s.id) + " closer than 1e7 m to origin");
    }
  }
}

}  // namespace spoofwatch::gnss
