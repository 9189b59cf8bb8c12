#pragma once

#include "spoofwatch/common.hpp"

#include <json.hpp>

#include <utility>
#include <vector>

namespace spoofwatch::gnss {

struct Satellite {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

struct Constellation {
  std::vector<Satellite> satellites;

  std::size_t size() const { return satellites.size(); }
};

/// Pseudoranges in meters, aligned with Constellation order.
struct PseudorangeSet {
  std::vector<double> values;
  double timestamp = 0.0;
};

/// Receiver position plus clock bias, both in meters.
struct ReceiverEstimate {
  Vec3 position = Vec3::Zero();
  double clock_bias = 0.0;
};

struct PvtSolution {
  ReceiverEstimate estimate;
  int iterations = 0;
  double final_residual_norm = 0.0;
  double final_correction_norm = 0.0;
  bool converged = false;
  std::vector<double> residuals;
};

struct SolverOptions {
  double tol = 1e-4;
  int max_iter = 20;
  ReceiverEstimate init{};
};

using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, 4>;

/// Satellites at `radius` along upper-hemisphere directions with at least
/// 10 degrees pairwise separation. Throws ConfigError for n_sats < 4.
Constellation make_constellation(int n_sats, double radius, std::uint64_t seed);

/// Ideal range plus bias: ||P - S_i|| + b.
double predicted_range(const ReceiverEstimate& est, const Satellite& sat);

PseudorangeSet measure_pseudoranges(const ReceiverEstimate& truth,
                                    const Constellation& constellation,
                                    double noise_sigma, Rng& rng);

/// delta_i = kappa_i - ||P - S_i|| - b.
std::vector<double> residuals(const ReceiverEstimate& est, const PseudorangeSet& meas,
                              const Constellation& constellation);

/// Rows [(P - S_i)^T / ||P - S_i||, 1]. Throws GeometryError when the receiver
/// is within 1 m of a satellite.
Jacobian jacobian(const ReceiverEstimate& est, const Constellation& constellation);

/// One Gauss-Newton update. Returns the new estimate and ||dP||.
std::pair<ReceiverEstimate, double> ls_step(const ReceiverEstimate& est,
                                            const PseudorangeSet& meas,
                                            const Constellation& constellation);

/// Iterates ls_step until the correction drops below opts.tol. Running out of
/// iterations is reported through `converged`, not an exception.
PvtSolution solve_pvt(const PseudorangeSet& meas, const Constellation& constellation,
                      const SolverOptions& opts = {});

void to_json(nlohmann::json& j, const Constellation& c);
void from_json(const nlohmann::json& j, Constellation& c);

}  // namespace spoofwatch::gnss
