#pragma once

#include "spoofwatch/common.hpp"

#include <string>
#include <vector>

namespace spoofwatch::nn {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

std::string to_string(Activation a);

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::identity;
};

enum class Init { zero, fan_in_uniform };

/// Plain feedforward network. Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// `sizes` lists every width including input and output. Hidden layers use
  /// `hidden`, the last one `output`. fan_in_uniform draws U(+-1/sqrt(fan_in))
  /// and shrinks the output layer to U(+-final_scale).
  static Mlp create(const std::vector<int>& sizes, Activation hidden, Activation output,
                    Init init, Rng& rng, double final_scale = 3e-3);

  int input_size() const;
  int output_size() const;
  std::vector<int> sizes() const;
  std::size_t parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Flat parameter view, layer by layer: weight (column-major) then bias.
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);

  bool all_finite() const;

 private:
  std::vector<Layer> layers_;
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  Eigen::MatrixXd output;
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;  // d(loss)/d(input), one column per sample

  std::vector<double> flat() const;
};

/// Throws DimensionError when x has the wrong number of rows.
ForwardCache forward_batch(const Mlp& net, const Eigen::MatrixXd& x);

/// Single-sample forward; returns the output and the cache for backprop.
std::pair<Eigen::VectorXd, ForwardCache> mlp_forward(const Mlp& net, const Eigen::VectorXd& x);

/// Output only, no cache kept.
Eigen::MatrixXd predict(const Mlp& net, const Eigen::MatrixXd& x);

/// Reverse-mode gradients of sum_j upstream_j . output_j over the batch.
MlpGrads mlp_gradients(const Mlp& net, const ForwardCache& cache,
                       const Eigen::MatrixXd& upstream);

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Mlp& net, const MlpGrads& grads);
  double learning_rate() const { return lr_; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
};

/// target <- tau * online + (1 - tau) * target.
void soft_update(Mlp& target, const Mlp& online, double tau);

}  // namespace spoofwatch::nn
