#include "spoofwatch/detectors.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace spoofwatch::detectors {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
const double kLogUnderflow = std::log(1e-300);

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

nlohmann::json mlp_json(const nn::Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"in", l.weight.cols()},
                      {"out", l.weight.rows()},
                      {"activation", nn::to_string(l.activation)},
                      {"weight", w},
                      {"bias", b}});
  }
  return layers;
}

nn::Activation activation_from(const std::string& s) {
  if (s == "identity") return nn::Activation::identity;
  if (s == "relu") return nn::Activation::relu;
  if (s == "tanh") return nn::Activation::tanh;
  throw CorruptFileError("unknown activation \"" + s + "\"");
}

nn::Mlp mlp_from(const nlohmann::json& j) {
  std::vector<nn::Layer> layers;
  for (const auto& lj : j) {
    const int in = lj.at("in").get<int>();
    const int out = lj.at("out").get<int>();
    const auto w = lj.at("weight").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (in < 1 || out < 1 || w.size() != static_cast<std::size_t>(in) * out ||
        b.size() != static_cast<std::size_t>(out)) {
      throw CorruptFileError("autoencoder layer shape does not match its parameter arrays");
    }
    nn::Layer l;
    l.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), out, in);
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    l.activation = activation_from(lj.at("activation").get<std::string>());
    layers.push_back(std::move(l));
  }
  try {
    return nn::Mlp(std::move(layers));
  } catch (const DimensionError& e) {
    throw CorruptFileError(std::string("autoencoder: ") + e.what());
  }
}

Eigen::MatrixXd windows_matrix(const std::vector<std::vector<double>>& windows,
                               const std::vector<std::size_t>& idx, std::size_t from,
                               std::size_t to, double mean, double scale) {
  const auto w = static_cast<Eigen::Index>(windows.front().size());
  Eigen::MatrixXd x(w, static_cast<Eigen::Index>(to - from));
  for (std::size_t k = from; k < to; ++k) {
    const auto& win = windows[idx[k]];
    for (Eigen::Index r = 0; r < w; ++r) {
      x(r, static_cast<Eigen::Index>(k - from)) = (win[static_cast<std::size_t>(r)] - mean) / scale;
    }
  }
  return x;
}

}  // namespace

// ---- profile ---------------------------------------------------------------

NominalProfile fit_nominal_profile(const std::vector<std::vector<double>>& streams,
                                   std::vector<std::uint64_t> source_episodes) {
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& s : streams) {
    for (double q : s) {
      if (!std::isfinite(q)) throw ConfigError("nominal stream contains a non-finite value");
      sum += q;
      ++n;
    }
  }
  if (n < kMinProfileSamples) {
    throw InsufficientDataError("nominal profile needs at least " +
                                std::to_string(kMinProfileSamples) + " samples, got " +
                                std::to_string(n));
  }
  NominalProfile p;
  p.n_samples = n;
  p.mu0 = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& s : streams) {
    for (double q : s) ss += (q - p.mu0) * (q - p.mu0);
  }
  p.sigma0_sq = std::max(ss / static_cast<double>(n), 1e-6 * (1.0 + p.mu0 * p.mu0));
  p.source_episodes = std::move(source_episodes);
  return p;
}

void to_json(nlohmann::json& j, const NominalProfile& p) {
  j = {{"mu0", p.mu0},
       {"sigma0_sq", p.sigma0_sq},
       {"n_samples", p.n_samples},
       {"source_episodes", p.source_episodes}};
}

void from_json(const nlohmann::json& j, NominalProfile& p) {
  p.mu0 = j.at("mu0").get<double>();
  p.sigma0_sq = j.at("sigma0_sq").get<double>();
  p.n_samples = j.at("n_samples").get<std::size_t>();
  detail::read_opt(j, "source_episodes", p.source_episodes);
  if (!(p.sigma0_sq > 0.0) || !std::isfinite(p.mu0)) {
    throw CorruptFileError("nominal profile must have finite mu0 and sigma0_sq > 0");
  }
}

// ---- BOCPD -----------------------------------------------------------------

void BocpdConfig::validate() const {
  if (!(hazard > 0.0 && hazard < 1.0)) throw ConfigError("bocpd hazard must be in (0, 1)");
  if (tau < 0) throw ConfigError("bocpd tau must be >= 0");
  if (warmup < 0) throw ConfigError("bocpd warmup must be >= 0");
  if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) {
    throw ConfigError("bocpd prune_threshold must be in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const BocpdConfig& c) {
  j = {{"hazard", c.hazard},
       {"tau", c.tau},
       {"warmup", c.warmup},
       {"prune_threshold", c.prune_threshold},
       {"max_run_length", c.max_run_length}};
}

void from_json(const nlohmann::json& j, BocpdConfig& c) {
  detail::read_opt(j, "hazard", c.hazard);
  detail::read_opt(j, "tau", c.tau);
  detail::read_opt(j, "warmup", c.warmup);
  detail::read_opt(j, "prune_threshold", c.prune_threshold);
  detail::read_opt(j, "max_run_length", c.max_run_length);
  c.validate();
}

Bocpd::Bocpd(const NominalProfile& profile, double hazard, double prune_threshold,
             std::size_t max_run_length)
    : mu0_(profile.mu0),
      sigma0_sq_(profile.sigma0_sq),
      hazard_(hazard),
      prune_(prune_threshold),
      cap_(max_run_length) {
  if (!(hazard > 0.0 && hazard < 1.0)) throw ConfigError("bocpd hazard must be in (0, 1)");
  if (!(profile.sigma0_sq > 0.0)) throw ConfigError("profile sigma0_sq must be > 0");
  run_lengths_ = {0};
  weights_ = {1.0};
  means_ = {mu0_};
  counts_ = {1.0};
}

std::size_t Bocpd::update(double q) {
  ++t_;
  const std::size_t n = weights_.size();
  const double log_h = std::log(hazard_);
  const double log_1mh = std::log1p(-hazard_);

  // joint[0] is the changepoint entry, joint[i + 1] the growth of entry i.
  std::vector<double> joint(n + 1);
  std::vector<double> cp_terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double var = sigma0_sq_ + sigma0_sq_ / counts_[i];
    const double lw = std::log(weights_[i]) + log_normal(q, means_[i], var);
    cp_terms[i] = lw;
    joint[i + 1] = lw + log_1mh;
  }
  joint[0] = log_h + log_sum_exp(cp_terms);

  const double peak = *std::max_element(joint.begin(), joint.end());
  if (!(peak >= kLogUnderflow)) {
    // Every hypothesis explains q with probability below 1e-300 (or q is not
    // finite): restart from a fresh segment.
    ++underflow_resets_;
    run_lengths_ = {0};
    weights_ = {1.0};
    means_ = {mu0_};
    counts_ = {1.0};
    return 0;
  }

  const double norm = log_sum_exp(joint);
  std::vector<std::size_t> rl;
  std::vector<double> w, m, c;
  rl.reserve(n + 1);
  w.reserve(n + 1);
  m.reserve(n + 1);
  c.reserve(n + 1);
  rl.push_back(0);
  w.push_back(std::exp(joint[0] - norm));
  m.push_back(mu0_);
  c.push_back(1.0);
  for (std::size_t i = 0; i < n; ++i) {
    rl.push_back(run_lengths_[i] + 1);
    w.push_back(std::exp(joint[i + 1] - norm));
    m.push_back((counts_[i] * means_[i] + q) / (counts_[i] + 1.0));
    c.push_back(counts_[i] + 1.0);
  }

  if (prune_ > 0.0 || cap_ > 0) {
    const std::size_t best = static_cast<std::size_t>(
        std::distance(w.begin(), std::max_element(w.begin(), w.end())));
    std::size_t out = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool keep = i == best || ((prune_ <= 0.0 || w[i] >= prune_) &&
                                      (cap_ == 0 || rl[i] <= cap_));
      if (!keep) continue;
      rl[out] = rl[i];
      w[out] = w[i];
      m[out] = m[i];
      c[out] = c[i];
      ++out;
    }
    rl.resize(out);
    w.resize(out);
    m.resize(out);
    c.resize(out);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;

  run_lengths_ = std::move(rl);
  weights_ = std::move(w);
  means_ = std::move(m);
  counts_ = std::move(c);
  return map_run_length();
}

std::size_t Bocpd::map_run_length() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < weights_.size(); ++i) {
    if (weights_[i] > weights_[best]) best = i;
  }
  return run_lengths_[best];
}

std::vector<double> Bocpd::posterior() const {
  std::vector<double> dense(run_lengths_.back() + 1, 0.0);
  for (std::size_t i = 0; i < run_lengths_.size(); ++i) dense[run_lengths_[i]] = weights_[i];
  return dense;
}

DetectorVerdict bocpd_flag(std::size_t l_hat, int t, int tau, int warmup) {
  DetectorVerdict v;
  v.detector = "bocpd";
  v.t = t;
  v.statistic = static_cast<double>(l_hat);
  v.flag = t > warmup && static_cast<long>(l_hat) <= tau;
  return v;
}

std::vector<std::vector<double>> bocpd_oracle(const std::vector<double>& stream,
                                              const NominalProfile& profile, double hazard) {
  if (stream.size() > kOracleMaxLength) {
    throw ConfigError("oracle stream length " + std::to_string(stream.size()) +
                      " exceeds the cap of " + std::to_string(kOracleMaxLength));
  }
  if (!(hazard > 0.0 && hazard < 1.0)) throw ConfigError("oracle hazard must be in (0, 1)");
  const std::size_t T = stream.size();
  const double s2 = profile.sigma0_sq;
  const double log_h = std::log(hazard);
  const double log_1mh = std::log(1.0 - hazard);
  const double ninf = -std::numeric_limits<double>::infinity();

  // seg[c][t]: log of prod_{j=c+1..t} p(q_j | segment that began after step c),
  // using batch sums over q_{c+1..j-1} with the prior mean as one pseudo-sample.
  std::vector<std::vector<double>> seg(T + 1, std::vector<double>(T + 1, ninf));
  for (std::size_t c = 0; c <= T; ++c) {
    double acc = 0.0;
    double sum = profile.mu0;
    double count = 1.0;
    seg[c][c] = 0.0;
    for (std::size_t j = c + 1; j <= T; ++j) {
      const double q = stream[j - 1];
      acc += log_normal(q, sum / count, s2 + s2 / count);
      seg[c][j] = acc;
      sum += q;
      count += 1.0;
    }
  }

  // a[s]: log joint of a changepoint right after step s and q_{1:s}.
  std::vector<double> a(T + 1, ninf);
  a[0] = 0.0;
  for (std::size_t s = 1; s <= T; ++s) {
    std::vector<double> terms;
    for (std::size_t c = 0; c < s; ++c) {
      terms.push_back(a[c] + static_cast<double>(s - 1 - c) * log_1mh + log_h + seg[c][s]);
    }
    a[s] = log_sum_exp(terms);
  }

  std::vector<std::vector<double>> out;
  for (std::size_t t = 1; t <= T; ++t) {
    std::vector<double> joint(t + 1);
    for (std::size_t c = 0; c < t; ++c) {
      joint[t - c] = a[c] + static_cast<double>(t - c) * log_1mh + seg[c][t];
    }
    joint[0] = a[t];
    const double norm = log_sum_exp(joint);
    for (double& x : joint) x = std::exp(x - norm);
    out.push_back(std::move(joint));
  }
  return out;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = std::max(p.size(), q.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

OracleCheck oracle_check(std::uint64_t seed, int n_streams, int length) {
  OracleCheck out;
  Rng rng(seed);
  for (int k = 0; k < n_streams; ++k) {
    NominalProfile p;
    p.mu0 = uniform(rng, -5.0, 5.0);
    const double sigma = uniform(rng, 0.5, 3.0);
    p.sigma0_sq = sigma * sigma;
    p.n_samples = kMinProfileSamples;
    const double hazard = uniform(rng, 0.005, 0.2);
    const bool change = k % 2 == 1;
    const int at = change ? static_cast<int>(uniform(rng, 5.0, length - 5.0)) : length;
    const double shift = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 2.0, 10.0) * sigma;
    std::vector<double> stream;
    for (int t = 0; t < length; ++t) {
      stream.push_back(p.mu0 + (t >= at ? shift : 0.0) + gaussian(rng, sigma));
    }
    const auto expected = bocpd_oracle(stream, p, hazard);
    Bocpd b(p, hazard, 0.0, 0);
    for (int t = 0; t < length; ++t) {
      b.update(stream[static_cast<std::size_t>(t)]);
      out.max_tv = std::max(out.max_tv, total_variation(b.posterior(), expected[static_cast<std::size_t>(t)]));
    }
    ++out.streams;
    if (change) ++out.with_change;
  }
  return out;
}

// ---- Page-Hinkley ----------------------------------------------------------

PageHinkley::PageHinkley(double delta, double lambda) : delta_(delta), lambda_(lambda) {
  if (!(delta >= 0.0) || !(lambda > 0.0)) {
    throw ConfigError("page-hinkley needs delta >= 0 and lambda > 0");
  }
}

DetectorVerdict PageHinkley::update(double x) {
  ++n_;
  mean_ += (x - mean_) / static_cast<double>(n_);
  m_ += mean_ - x - delta_;
  m_min_ = std::min(m_min_, m_);
  DetectorVerdict v;
  v.detector = "page_hinkley";
  v.t = static_cast<int>(n_);
  v.statistic = statistic();
  v.flag = v.statistic > lambda_;
  return v;
}

// ---- residual threshold ----------------------------------------------------

void ResidualConfig::validate() const {
  if (!(k_sigma > 0.0)) throw ConfigError("residual k_sigma must be > 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("residual noise_sigma must be >= 0");
  if (!(max_speed > 0.0) || !(dt > 0.0) || !(gate_margin > 0.0)) {
    throw ConfigError("residual gate parameters must be > 0");
  }
}

void to_json(nlohmann::json& j, const ResidualConfig& c) {
  j = {{"k_sigma", c.k_sigma},
       {"noise_sigma", c.noise_sigma},
       {"max_speed", c.max_speed},
       {"dt", c.dt},
       {"gate_margin", c.gate_margin}};
}

void from_json(const nlohmann::json& j, ResidualConfig& c) {
  detail::read_opt(j, "k_sigma", c.k_sigma);
  detail::read_opt(j, "noise_sigma", c.noise_sigma);
  detail::read_opt(j, "max_speed", c.max_speed);
  detail::read_opt(j, "dt", c.dt);
  detail::read_opt(j, "gate_margin", c.gate_margin);
  c.validate();
}

ResidualThreshold::ResidualThreshold(ResidualConfig cfg) : cfg_(cfg) { cfg_.validate(); }

DetectorVerdict ResidualThreshold::update(const gnss::PvtSolution& pvt, int t) {
  double ss = 0.0;
  for (double r : pvt.residuals) ss += r * r;
  DetectorVerdict v;
  v.detector = "residual";
  v.t = t;
  v.statistic = pvt.residuals.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(pvt.residuals.size()));
  const Vec3& p = pvt.estimate.position;
  last_jump_ = previous_ ? (p - *previous_).norm() : 0.0;
  previous_ = p;
  v.flag = v.statistic > cfg_.k_sigma * cfg_.noise_sigma || last_jump_ > cfg_.gate();
  return v;
}

// ---- window autoencoder ----------------------------------------------------

void AutoencoderConfig::validate() const {
  if (window < 2) throw ConfigError("autoencoder window must be >= 2");
  if (hidden < 1 || bottleneck < 1) throw ConfigError("autoencoder widths must be >= 1");
  if (epochs < 1) throw ConfigError("autoencoder epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("autoencoder batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("autoencoder learning_rate must be > 0");
  if (!(threshold_k >= 0.0)) throw ConfigError("autoencoder threshold_k must be >= 0");
}

void to_json(nlohmann::json& j, const AutoencoderConfig& c) {
  j = {{"window", c.window},
       {"hidden", c.hidden},
       {"bottleneck", c.bottleneck},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"threshold_k", c.threshold_k}};
}

void from_json(const nlohmann::json& j, AutoencoderConfig& c) {
  detail::read_opt(j, "window", c.window);
  detail::read_opt(j, "hidden", c.hidden);
  detail::read_opt(j, "bottleneck", c.bottleneck);
  detail::read_opt(j, "epochs", c.epochs);
  detail::read_opt(j, "batch_size", c.batch_size);
  detail::read_opt(j, "learning_rate", c.learning_rate);
  detail::read_opt(j, "threshold_k", c.threshold_k);
  c.validate();
}

std::vector<std::vector<double>> sliding_windows(const std::vector<std::vector<double>>& streams,
                                                 int window) {
  std::vector<std::vector<double>> out;
  const auto w = static_cast<std::size_t>(window);
  for (const auto& s : streams) {
    for (std::size_t i = 0; i + w <= s.size(); ++i) {
      out.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(i),
                       s.begin() + static_cast<std::ptrdiff_t>(i + w));
    }
  }
  return out;
}

double WindowAutoencoder::reconstruction_error(const std::vector<double>& window) const {
  if (static_cast<int>(window.size()) != cfg.window) {
    throw DimensionError("window has " + std::to_string(window.size()) + " values, model expects " +
                         std::to_string(cfg.window));
  }
  Eigen::VectorXd x(cfg.window);
  for (int i = 0; i < cfg.window; ++i) x(i) = (window[static_cast<std::size_t>(i)] - input_mean) / input_scale;
  const Eigen::MatrixXd y = nn::predict(net, x);
  return (y.col(0) - x).squaredNorm() / cfg.window;
}

WindowAutoencoder window_ae_train(const std::vector<std::vector<double>>& nominal_streams,
                                  const AutoencoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto windows = sliding_windows(nominal_streams, cfg.window);
  if (windows.size() < kMinAeWindows) {
    throw InsufficientDataError("autoencoder needs at least " + std::to_string(kMinAeWindows) +
                                " windows, got " + std::to_string(windows.size()));
  }

  WindowAutoencoder model;
  model.cfg = cfg;
  {
    double n = 0.0, sum = 0.0, ss = 0.0;
    for (const auto& s : nominal_streams) {
      for (double q : s) {
        sum += q;
        n += 1.0;
      }
    }
    model.input_mean = sum / n;
    for (const auto& s : nominal_streams) {
      for (double q : s) ss += (q - model.input_mean) * (q - model.input_mean);
    }
    model.input_scale = std::max(std::sqrt(ss / n), 1e-6 * (1.0 + std::abs(model.input_mean)));
  }

  Rng rng(seed);
  model.net = nn::Mlp::create({cfg.window, cfg.hidden, cfg.bottleneck, cfg.hidden, cfg.window},
                              nn::Activation::tanh, nn::Activation::identity,
                              nn::Init::fan_in_uniform, rng,
                              1.0 / std::sqrt(static_cast<double>(cfg.hidden)));
  nn::Adam opt(model.net, cfg.learning_rate);

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  const double elems = static_cast<double>(cfg.window);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t from = 0; from < order.size(); from += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t to = std::min(order.size(), from + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::MatrixXd x =
          windows_matrix(windows, order, from, to, model.input_mean, model.input_scale);
      const nn::ForwardCache cache = nn::forward_batch(model.net, x);
      const Eigen::MatrixXd diff = cache.output - x;
      const double b = static_cast<double>(x.cols());
      epoch_loss += diff.squaredNorm() / elems;
      opt.step(model.net, nn::mlp_gradients(model.net, cache, 2.0 / (b * elems) * diff));
    }
    model.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  std::vector<double> errors;
  errors.reserve(windows.size());
  for (const auto& w : windows) errors.push_back(model.reconstruction_error(w));
  const double n = static_cast<double>(errors.size());
  model.train_error_mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : errors) ss += (e - model.train_error_mean) * (e - model.train_error_mean);
  model.train_error_std = std::sqrt(ss / n);
  model.threshold = model.train_error_mean + cfg.threshold_k * model.train_error_std;
  return model;
}

DetectorVerdict window_ae_score(const WindowAutoencoder& model,
                                const std::vector<double>& recent_window, int t) {
  DetectorVerdict v;
  v.detector = "autoencoder";
  v.t = t;
  if (static_cast<int>(recent_window.size()) < model.cfg.window) {
    v.statistic = std::numeric_limits<double>::quiet_NaN();
    return v;
  }
  std::vector<double> tail(recent_window.end() - model.cfg.window, recent_window.end());
  v.statistic = model.reconstruction_error(tail);
  v.flag = v.statistic > model.threshold;
  return v;
}

DetectorVerdict WindowAeDetector::update(double q, int t) {
  buffer_.push_back(q);
  if (static_cast<int>(buffer_.size()) > model_->cfg.window) buffer_.pop_front();
  return window_ae_score(*model_, std::vector<double>(buffer_.begin(), buffer_.end()), t);
}

void to_json(nlohmann::json& j, const WindowAutoencoder& m) {
  j = {{"config", m.cfg},
       {"input_mean", m.input_mean},
       {"input_scale", m.input_scale},
       {"threshold", m.threshold},
       {"train_error_mean", m.train_error_mean},
       {"train_error_std", m.train_error_std},
       {"epoch_losses", m.epoch_losses},
       {"layers", mlp_json(m.net)}};
}

void from_json(const nlohmann::json& j, WindowAutoencoder& m) {
  m.cfg = j.at("config").get<AutoencoderConfig>();
  m.input_mean = j.at("input_mean").get<double>();
  m.input_scale = j.at("input_scale").get<double>();
  m.threshold = j.at("threshold").get<double>();
  detail::read_opt(j, "train_error_mean", m.train_error_mean);
  detail::read_opt(j, "train_error_std", m.train_error_std);
  detail::read_opt(j, "epoch_losses", m.epoch_losses);
  m.net = mlp_from(j.at("layers"));
  if (m.net.input_size() != m.cfg.window || m.net.output_size() != m.cfg.window) {
    throw CorruptFileError("autoencoder network does not match its window size");
  }
}

// ---- artifacts -------------------------------------------------------------

namespace {
constexpr const char* kArtifactFormat = "spoofwatch-detectors";
constexpr int kArtifactVersion = 1;
}  // namespace

void save_artifacts(const DetectorArtifacts& a, const std::filesystem::path& path) {
  const nlohmann::json j = {{"format", kArtifactFormat},
                            {"version", kArtifactVersion},
                            {"profile", a.profile},
                            {"bocpd", a.bocpd},
                            {"page_hinkley", {{"delta", a.ph_delta}, {"lambda", a.ph_lambda}}},
                            {"residual", a.residual},
                            {"autoencoder", a.autoencoder}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("failed writing: " + path.string());
}

DetectorArtifacts load_artifacts(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open detector artifacts: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != kArtifactFormat) {
    throw CorruptFileError(path.string() + ": not a detector artifact file");
  }
  if (j.value("version", 0) != kArtifactVersion) {
    throw CorruptFileError(path.string() + ": unsupported version");
  }
  DetectorArtifacts a;
  try {
    a.profile = j.at("profile").get<NominalProfile>();
    a.bocpd = j.at("bocpd").get<BocpdConfig>();
    a.ph_delta = j.at("page_hinkley").at("delta").get<double>();
    a.ph_lambda = j.at("page_hinkley").at("lambda").get<double>();
    a.residual = j.at("residual").get<ResidualConfig>();
    a.autoencoder = j.at("autoencoder").get<WindowAutoencoder>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  }
  return a;
}

}  // namespace spoofwatch::detectors
