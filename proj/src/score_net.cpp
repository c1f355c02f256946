#include "sbd/score_net.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

namespace sbd {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_deriv(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

Mat silu_mat(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) out(i, j) = silu(z(i, j));
  return out;
}

Mat silu_deriv_mat(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) out(i, j) = silu_deriv(z(i, j));
  return out;
}

}  // namespace

ScoreNet::ScoreNet(int signal_dim, const Config& config, std::uint64_t init_seed)
    : signal_dim_(signal_dim), emb_dim_(config.time_embed_dim), hidden_(config.hidden_widths) {
  if (signal_dim < 1) throw std::domain_error("ScoreNet: signal_dim must be positive");
  if (emb_dim_ < 2 || emb_dim_ % 2 != 0)
    throw std::domain_error("ScoreNet: time_embed_dim must be even and >= 2");
  for (int w : hidden_)
    if (w < 1) throw std::domain_error("ScoreNet: hidden widths must be positive");

  Rng rng = make_stream(init_seed, 0x5C03EC0DE);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> widths;
  widths.push_back(signal_dim_ + emb_dim_);
  for (int w : hidden_) widths.push_back(w);
  widths.push_back(signal_dim_);
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    Mat w(fan_out, fan_in);
    const double scale = std::sqrt(1.0 / fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Vec::Zero(fan_out));
  }
}

Vec ScoreNet::time_embedding(double tau) const {
  Vec e(emb_dim_);
  const int half = emb_dim_ / 2;
  // embed sqrt(tau): the noise scale grows like sqrt(tau) near zero, so this
  // linearizes the steep small-tau dependence the score has to resolve
  const double u = std::sqrt(std::max(tau, 0.0));
  const double lo = 1.0, hi = 100.0;
  for (int k = 0; k < half; ++k) {
    const double t = half > 1 ? static_cast<double>(k) / (half - 1) : 0.0;
    const double omega = lo * std::pow(hi / lo, t);
    e[2 * k] = std::sin(omega * u);
    e[2 * k + 1] = std::cos(omega * u);
  }
  return e;
}

Vec ScoreNet::forward(const Vec& x, double tau) const {
  if (x.size() != signal_dim_) throw std::domain_error("ScoreNet::forward: input width mismatch");
  Vec a(signal_dim_ + emb_dim_);
  a.head(signal_dim_) = x;
  a.tail(emb_dim_) = time_embedding(tau);
  const int layers = num_layers();
  for (int l = 0; l < layers; ++l) {
    Vec z = weights_[l] * a + biases_[l];
    if (l + 1 == layers) return z;
    a.resize(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) a[i] = silu(z[i]);
  }
  return a;  // unreachable
}

Vec ScoreNet::score(const Vec& x, double tau, const NoiseSchedule& schedule) const {
  const auto [a, sig] = schedule.rates(tau);
  if (sig <= 0.0)
    throw std::domain_error("ScoreNet::score: undefined at sigma_tau = 0 (tau = 0)");
  const double vbar = a * a + sig * sig;
  return forward(x, tau) / sig - x / vbar;
}

Vec ScoreNet::input_vjp(const Vec& x, double tau, const Vec& u) const {
  if (x.size() != signal_dim_ || u.size() != signal_dim_)
    throw std::domain_error("ScoreNet::input_vjp: width mismatch");
  // forward pass keeping pre-activations
  std::vector<Vec> zs;
  Vec a(signal_dim_ + emb_dim_);
  a.head(signal_dim_) = x;
  a.tail(emb_dim_) = time_embedding(tau);
  const int layers = num_layers();
  for (int l = 0; l + 1 < layers; ++l) {
    Vec z = weights_[l] * a + biases_[l];
    zs.push_back(z);
    a.resize(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) a[i] = silu(z[i]);
  }
  // backward
  Vec delta = weights_[layers - 1].transpose() * u;
  for (int l = layers - 2; l >= 0; --l) {
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] *= silu_deriv(zs[l][i]);
    delta = weights_[l].transpose() * delta;
  }
  return delta.head(signal_dim_);
}

int ScoreNet::num_params() const {
  int n = 0;
  for (int l = 0; l < num_layers(); ++l)
    n += static_cast<int>(weights_[l].size() + biases_[l].size());
  return n;
}

Vec ScoreNet::flatten_params() const {
  Vec theta(num_params());
  Eigen::Index at = 0;
  for (int l = 0; l < num_layers(); ++l) {
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) theta[at++] = weights_[l](i, j);
    theta.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return theta;
}

void ScoreNet::set_params(const Vec& theta) {
  if (theta.size() != num_params()) throw std::domain_error("ScoreNet::set_params: size mismatch");
  Eigen::Index at = 0;
  for (int l = 0; l < num_layers(); ++l) {
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = theta[at++];
    biases_[l] = theta.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

double ScoreNet::dsm_loss_and_grad(const std::vector<Vec>& x0, const std::vector<double>& taus,
                                   const std::vector<Vec>& noise, const NoiseSchedule& schedule,
                                   Vec* grad, const std::vector<double>& weights) const {
  const int batch = static_cast<int>(x0.size());
  if (batch == 0 || taus.size() != x0.size() || noise.size() != x0.size())
    throw std::domain_error("dsm_loss_and_grad: batch size mismatch");
  if (!weights.empty() && weights.size() != x0.size())
    throw std::domain_error("dsm_loss_and_grad: weight size mismatch");
  const int layers = num_layers();
  const int in_dim = signal_dim_ + emb_dim_;

  // assemble batch (columns); the raw target folds in the baseline so that
  // the effective output raw - sigma x / vbar predicts -z
  Mat a0(in_dim, batch);
  Mat target(signal_dim_, batch);
  for (int b = 0; b < batch; ++b) {
    const auto [al, sg] = schedule.rates(taus[b]);
    const double vbar = al * al + sg * sg;
    const Vec xt = al * x0[b] + sg * noise[b];
    a0.col(b).head(signal_dim_) = xt;
    a0.col(b).tail(emb_dim_) = time_embedding(taus[b]);
    target.col(b) = sg * xt / vbar - noise[b];
  }

  std::vector<Mat> acts;   // layer inputs
  std::vector<Mat> preds;  // pre-activations
  acts.push_back(a0);
  Mat a = a0;
  for (int l = 0; l < layers; ++l) {
    Mat z = (weights_[l] * a).colwise() + biases_[l];
    if (l + 1 == layers) {
      preds.push_back(z);
      break;
    }
    preds.push_back(z);
    a = silu_mat(z);
    acts.push_back(a);
  }

  const Mat& out = preds.back();
  Mat diff = out - target;
  // normalized per batch element and per coordinate so the loss scale (and
  // the clip threshold) is dimension independent
  const double norm = static_cast<double>(batch) * signal_dim_;
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double w = weights.empty() ? 1.0 : weights[b];
    loss += w * diff.col(b).squaredNorm();
  }
  loss /= norm;

  if (grad != nullptr) {
    grad->resize(num_params());
    std::vector<Mat> gw(layers);
    std::vector<Vec> gb(layers);
    Mat delta = (2.0 / norm) * diff;
    if (!weights.empty())
      for (int b = 0; b < batch; ++b) delta.col(b) *= weights[b];
    for (int l = layers - 1; l >= 0; --l) {
      gw[l] = delta * acts[l].transpose();
      gb[l] = delta.rowwise().sum();
      if (l > 0) {
        delta = weights_[l].transpose() * delta;
        delta.array() *= silu_deriv_mat(preds[l - 1]).array();
      }
    }
    Eigen::Index at = 0;
    for (int l = 0; l < layers; ++l) {
      for (Eigen::Index i = 0; i < gw[l].rows(); ++i)
        for (Eigen::Index j = 0; j < gw[l].cols(); ++j) (*grad)[at++] = gw[l](i, j);
      grad->segment(at, gb[l].size()) = gb[l];
      at += gb[l].size();
    }
  }
  return loss;
}

ScoreNet& dsm_train(ScoreNet& net, const std::vector<Vec>& dataset, const NoiseSchedule& schedule,
                    const ScoreNet::TrainConfig& config) {
  if (dataset.empty()) throw std::domain_error("dsm_train: dataset must be non-empty");
  for (const Vec& x : dataset)
    if (x.size() != net.signal_dim()) throw std::domain_error("dsm_train: signal length mismatch");
  if (config.steps == 0) return net;

  Rng rng = make_stream(config.seed, 0xD5A11);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(dataset.size()) - 1);
  std::uniform_real_distribution<double> unif(std::pow(config.tau_min_frac, 1.0 / config.tau_power),
                                              1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Vec> x0(config.batch_size);
  std::vector<double> taus(config.batch_size);
  std::vector<Vec> zs(config.batch_size);
  std::vector<double> tau_weights(config.batch_size);
  const bool weighted = config.tau_power != 1.0;
  Vec grad;
  Vec theta = net.flatten_params();
  Vec velocity = Vec::Zero(theta.size());
  Vec adam_m = Vec::Zero(theta.size());
  Vec adam_v = Vec::Zero(theta.size());
  Vec theta_avg = Vec::Zero(theta.size());
  const int avg_from =
      config.steps - static_cast<int>(config.average_tail_fraction * config.steps);
  long long avg_count = 0;

  for (int step = 0; step < config.steps; ++step) {
    for (int b = 0; b < config.batch_size; ++b) {
      x0[b] = dataset[pick(rng)];
      const double u = unif(rng);
      taus[b] = std::pow(u, config.tau_power) * schedule.horizon();
      // importance weight p u^{p-1} keeps the uniform-tau objective
      tau_weights[b] = config.tau_power * std::pow(u, config.tau_power - 1.0);
      Vec z(net.signal_dim());
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
      zs[b] = std::move(z);
    }
    const double loss = net.dsm_loss_and_grad(x0, taus, zs, schedule, &grad,
                                              weighted ? tau_weights : std::vector<double>{});
    if (!std::isfinite(loss))
      throw NumericError("dsm_train: non-finite loss at step " + std::to_string(step));
    const double gnorm = grad.norm();
    if (gnorm > config.clip_norm) grad *= config.clip_norm / gnorm;
    if (config.adam) {
      adam_m = config.adam_beta1 * adam_m + (1.0 - config.adam_beta1) * grad;
      adam_v = config.adam_beta2 * adam_v.eval() +
               (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(config.adam_beta1, step + 1);
      const double bc2 = 1.0 - std::pow(config.adam_beta2, step + 1);
      theta -= (config.learning_rate / bc1) *
               (adam_m.array() / ((adam_v.array() / bc2).sqrt() + config.adam_eps)).matrix();
    } else if (config.momentum > 0.0) {
      velocity = config.momentum * velocity + grad;
      theta -= config.learning_rate * velocity;
    } else {
      theta -= config.learning_rate * grad;
    }
    net.set_params(theta);
    net.train_steps_ += 1;
    net.loss_history_.push_back(loss);
    if (step >= avg_from) {
      theta_avg += theta;
      ++avg_count;
    }
  }
  if (avg_count > 0) net.set_params(theta_avg / static_cast<double>(avg_count));
  return net;
}

// ---------------------------------------------------------------------------
// serialization: magic "SBSN", u32 version, u32 signal_dim, u32 emb_dim,
// u32 hidden count, u32 widths..., then per layer W (row-major) and b as
// little-endian f64 in declared order.

namespace {
void write_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  f.write(reinterpret_cast<const char*>(b), 4);
}
std::uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw FormatError("ScoreNet::load: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
void write_f64(std::ofstream& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  f.write(reinterpret_cast<const char*>(b), 8);
}
double read_f64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  if (!f) throw FormatError("ScoreNet::load: truncated body");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace

void ScoreNet::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("ScoreNet::save: cannot open " + path);
  f.write("SBSN", 4);
  write_u32(f, 1u);
  write_u32(f, static_cast<std::uint32_t>(signal_dim_));
  write_u32(f, static_cast<std::uint32_t>(emb_dim_));
  write_u32(f, static_cast<std::uint32_t>(hidden_.size()));
  for (int w : hidden_) write_u32(f, static_cast<std::uint32_t>(w));
  const Vec theta = flatten_params();
  for (Eigen::Index i = 0; i < theta.size(); ++i) write_f64(f, theta[i]);
  if (!f) throw IoError("ScoreNet::save: write failed for " + path);
}

ScoreNet ScoreNet::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("ScoreNet::load: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SBSN", 4) != 0)
    throw FormatError("ScoreNet::load: bad magic");
  const std::uint32_t version = read_u32(f);
  if (version != 1u) throw FormatError("ScoreNet::load: unsupported version");
  Config cfg;
  const int signal_dim = static_cast<int>(read_u32(f));
  cfg.time_embed_dim = static_cast<int>(read_u32(f));
  const int n_hidden = static_cast<int>(read_u32(f));
  cfg.hidden_widths.clear();
  for (int i = 0; i < n_hidden; ++i) cfg.hidden_widths.push_back(static_cast<int>(read_u32(f)));
  ScoreNet net(signal_dim, cfg, 0);
  Vec theta(net.num_params());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = read_f64(f);
  net.set_params(theta);
  return net;
}

// ---------------------------------------------------------------------------

Vec ScoreNetPrior::score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  return net_.score(x_tau, tau, schedule);
}

Vec ScoreNetPrior::denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                               const Vec& u) const {
  if (mode_ == JacobianMode::kIdentity) return u;
  const auto [a, s] = schedule.rates(tau);
  if (a <= 0.0 || s <= 0.0)
    throw std::domain_error("ScoreNetPrior::denoise_vjp: needs alpha > 0 and sigma > 0");
  // score = raw/sigma - x/vbar, so
  // d denoise / d x = (I (1 - sigma^2/vbar) + sigma d raw/dx)/alpha.
  const double vbar = a * a + s * s;
  return ((1.0 - s * s / vbar) * u + s * net_.input_vjp(x_tau, tau, u)) / a;
}

}  // namespace sbd
