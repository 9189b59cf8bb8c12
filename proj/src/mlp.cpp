#include "spoofwatch/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spoofwatch::nn {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
  }
  return z;
}

// dy/dz evaluated from the pre-activation z.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: {
      const Eigen::ArrayXXd t = z.array().tanh();
      return (1.0 - t * t).matrix();
    }
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) {
      throw DimensionError("layer " + std::to_string(i) + ": bias length does not match rows");
    }
    if (i > 0 && layers_[i - 1].weight.rows() != l.weight.cols()) {
      throw DimensionError("layer " + std::to_string(i) + ": input width " +
                           std::to_string(l.weight.cols()) + " does not chain from " +
                           std::to_string(layers_[i - 1].weight.rows()));
    }
  }
}

Mlp Mlp::create(const std::vector<int>& sizes, Activation hidden, Activation output, Init init,
                Rng& rng, double final_scale) {
  if (sizes.size() < 2) throw DimensionError("an MLP needs at least input and output sizes");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    if (in < 1 || out < 1) throw DimensionError("layer widths must be positive");
    Layer l;
    l.weight = Eigen::MatrixXd::Zero(out, in);
    l.bias = Eigen::VectorXd::Zero(out);
    const bool last = i + 2 == sizes.size();
    l.activation = last ? output : hidden;
    if (init == Init::fan_in_uniform) {
      const double bound = last ? final_scale : 1.0 / std::sqrt(static_cast<double>(in));
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = uniform(rng, -bound, bound);
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = uniform(rng, -bound, bound);
    }
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

int Mlp::input_size() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int Mlp::output_size() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers_.empty()) return s;
  s.push_back(input_size());
  for (const auto& l : layers_) s.push_back(static_cast<int>(l.weight.rows()));
  return s;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weight.data(), l.weight.data() + l.weight.size());
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

void Mlp::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for (auto& l : layers_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.weight.size(), l.weight.data());
    k += static_cast<std::size_t>(l.weight.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
    k += static_cast<std::size_t>(l.bias.size());
  }
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

std::vector<double> MlpGrads::flat() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    out.insert(out.end(), weight[i].data(), weight[i].data() + weight[i].size());
    out.insert(out.end(), bias[i].data(), bias[i].data() + bias[i].size());
  }
  return out;
}

ForwardCache forward_batch(const Mlp& net, const Eigen::MatrixXd& x) {
  if (x.rows() != net.input_size()) {
    throw DimensionError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                         std::to_string(net.input_size()));
  }
  ForwardCache cache;
  cache.inputs.reserve(net.layers().size());
  cache.pre.reserve(net.layers().size());
  Eigen::MatrixXd h = x;
  for (const auto& l : net.layers()) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    h = activate(z, l.activation);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(h);
  return cache;
}

std::pair<Eigen::VectorXd, ForwardCache> mlp_forward(const Mlp& net, const Eigen::VectorXd& x) {
  ForwardCache cache = forward_batch(net, x);
  Eigen::VectorXd out = cache.output.col(0);
  return {std::move(out), std::move(cache)};
}

Eigen::MatrixXd predict(const Mlp& net, const Eigen::MatrixXd& x) {
  if (x.rows() != net.input_size()) {
    throw DimensionError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                         std::to_string(net.input_size()));
  }
  Eigen::MatrixXd h = x;
  for (const auto& l : net.layers()) {
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    h = activate(z, l.activation);
  }
  return h;
}

MlpGrads mlp_gradients(const Mlp& net, const ForwardCache& cache,
                       const Eigen::MatrixXd& upstream) {
  const auto& layers = net.layers();
  if (upstream.rows() != net.output_size() || upstream.cols() != cache.output.cols()) {
    throw DimensionError("upstream gradient shape does not match network output");
  }
  MlpGrads g;
  g.weight.resize(layers.size());
  g.bias.resize(layers.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Eigen::MatrixXd dz =
        delta.cwiseProduct(activation_slope(cache.pre[k], layers[k].activation));
    g.weight[k] = dz * cache.inputs[k].transpose();
    g.bias[k] = dz.rowwise().sum();
    delta = layers[k].weight.transpose() * dz;
  }
  g.input = std::move(delta);
  return g;
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& l : net.layers()) {
    m_w_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    v_w_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    m_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    v_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
}

void Adam::step(Mlp& net, const MlpGrads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    m_w_[k] = beta1_ * m_w_[k] + (1.0 - beta1_) * grads.weight[k];
    v_w_[k] = beta2_ * v_w_[k] + (1.0 - beta2_) * grads.weight[k].cwiseAbs2();
    m_b_[k] = beta1_ * m_b_[k] + (1.0 - beta1_) * grads.bias[k];
    v_b_[k] = beta2_ * v_b_[k] + (1.0 - beta2_) * grads.bias[k].cwiseAbs2();
    layers[k].weight.array() -=
        lr_ * (m_w_[k].array() / c1) / ((v_w_[k].array() / c2).sqrt() + eps_);
    layers[k].bias.array() -=
        lr_ * (m_b_[k].array() / c1) / ((v_b_[k].array() / c2).sqrt() + eps_);
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  auto& t = target.layers();
  const auto& o = online.layers();
  if (t.size() != o.size()) throw DimensionError("soft_update on mismatched networks");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (tau == 1.0) {
      t[k].weight = o[k].weight;
      t[k].bias = o[k].bias;
    } else {
      t[k].weight = tau * o[k].weight + (1.0 - tau) * t[k].weight;
      t[k].bias = tau * o[k].bias + (1.0 - tau) * t[k].bias;
    }
  }
}

}  // namespace spoofwatch::nn
