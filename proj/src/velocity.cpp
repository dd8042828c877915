// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/velocity.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ngrpo {

namespace {

void matvec(const Matrix& w, const Vec& x, const Vec& b, Vec& out) {
  out.assign(static_cast<std::size_t>(w.rows), 0.0);
  for (int r = 0; r < w.rows; ++r) {
    double s = b[static_cast<std::size_t>(r)];
    const double* row = &w.data[static_cast<std::size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = s;
  }
}

// out = W^T g
void matvec_t(const Matrix& w, const Vec& g, Vec& out) {
  out.assign(static_cast<std::size_t>(w.cols), 0.0);
  for (int r = 0; r < w.rows; ++r) {
    const double gr = g[static_cast<std::size_t>(r)];
    const double* row = &w.data[static_cast<std::size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) out[static_cast<std::size_t>(c)] += row[c] * gr;
  }
}

}  // namespace

void ParamGrad::add_scaled(const ParamGrad& other, double alpha) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].data.size(); ++i)
      weights[l].data[i] += alpha * other.weights[l].data[i];
    for (std::size_t i = 0; i < biases[l].size(); ++i)
      biases[l][i] += alpha * other.biases[l][i];
  }
}

void ParamGrad::scale(double alpha) {
  for (auto& w : weights)
    for (auto& v : w.data) v *= alpha;
  for (auto& b : biases)
    for (auto& v : b) v *= alpha;
}

void ParamGrad::set_zero() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

bool ParamGrad::all_finite() const {
  for (const auto& w : weights)
    if (!ngrpo::all_finite(w.data)) return false;
  for (const auto& b : biases)
    if (!ngrpo::all_finite(b)) return false;
  return true;
}

double ParamGrad::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights)
    for (double v : w.data) m = std::max(m, std::abs(v));
  for (const auto& b : biases)
    for (double v : b) m = std::max(m, std::abs(v));
  return m;
}

double ParamGrad::norm() const {
  double s = 0.0;
  for (const auto& w : weights)
    for (double v : w.data) s += v * v;
  for (const auto& b : biases)
    for (double v : b) s += v * v;
  return std::sqrt(s);
}

void ParamGrad::clip_norm(double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = norm();
  if (n > max_norm) scale(max_norm / n);
}

VelocityModel::VelocityModel(int data_dim, int cond_dim, std::vector<int> hidden)
    : data_dim_(data_dim), cond_dim_(cond_dim) {
  if (data_dim < 1) throw std::invalid_argument("VelocityModel: data_dim < 1");
  if (cond_dim < 0) throw std::invalid_argument("VelocityModel: cond_dim < 0");
  layer_dims_.push_back(data_dim + 1 + cond_dim);
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("VelocityModel: hidden size < 1");
    layer_dims_.push_back(h);
  }
  layer_dims_.push_back(data_dim);
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    weights_.emplace_back(layer_dims_[l + 1], layer_dims_[l]);
    biases_.emplace_back(static_cast<std::size_t>(layer_dims_[l + 1]), 0.0);
  }
}

VelocityModel VelocityModel::random_init(int data_dim, int cond_dim,
                                         std::vector<int> hidden, RngStream& rng) {
  VelocityModel m(data_dim, cond_dim, std::move(hidden));
  for (auto& w : m.weights_) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols));
    for (auto& v : w.data) v = scale * rng.gaussian();
  }
  return m;
}

Vec VelocityModel::assemble_input(const Vec& x, double t, const Vec& cond) const {
  if (static_cast<int>(x.size()) != data_dim_)
    throw std::invalid_argument("VelocityModel: x dimension mismatch");
  if (static_cast<int>(cond.size()) != cond_dim_)
    throw std::invalid_argument("VelocityModel: cond dimension mismatch");
  Vec in;
  in.reserve(x.size() + 1 + cond.size());
  in.insert(in.end(), x.begin(), x.end());
  in.push_back(t);
  in.insert(in.end(), cond.begin(), cond.end());
  return in;
}

Vec VelocityModel::eval(const Vec& x, double t, const Vec& cond) const {
  Vec a = assemble_input(x, t, cond);
  Vec z;
  const std::size_t n_layers = weights_.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    matvec(weights_[l], a, biases_[l], z);
    if (l + 1 < n_layers) {
      for (auto& v : z) v = std::tanh(v);
    }
    a.swap(z);
  }
  return a;
}

std::int64_t VelocityModel::param_count() const {
  std::int64_t n = 0;
  for (const auto& w : weights_) n += static_cast<std::int64_t>(w.rows) * w.cols;
  for (const auto& b : biases_) n += static_cast<std::int64_t>(b.size());
  return n;
}

ParamGrad VelocityModel::zero_grad() const {
  ParamGrad g;
  for (const auto& w : weights_) g.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : biases_) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

VelocityModel::BackwardResult VelocityModel::backward(const Vec& x, double t,
                                                      const Vec& cond,
                                                      const Vec& upstream) const {
  if (static_cast<int>(upstream.size()) != data_dim_)
    throw std::invalid_argument("VelocityModel::backward: upstream dimension mismatch");

  // Forward, keeping post-activation values of every layer.
  const std::size_t n_layers = weights_.size();
  std::vector<Vec> acts(n_layers + 1);
  acts[0] = assemble_input(x, t, cond);
  Vec z;
  for (std::size_t l = 0; l < n_layers; ++l) {
    matvec(weights_[l], acts[l], biases_[l], z);
    if (l + 1 < n_layers)
      for (auto& v : z) v = std::tanh(v);
    acts[l + 1] = z;
  }

  // Reverse pass for the scalar <upstream, v>.
  BackwardResult res;
  res.param_grad = zero_grad();
  Vec g = upstream;  // gradient wrt pre-activation of the output layer
  for (std::size_t l = n_layers; l-- > 0;) {
    Matrix& gw = res.param_grad.weights[l];
    Vec& gb = res.param_grad.biases[l];
    const Vec& a_in = acts[l];
    for (int r = 0; r < gw.rows; ++r) {
      const double gr = g[static_cast<std::size_t>(r)];
      gb[static_cast<std::size_t>(r)] = gr;
      double* row = &gw.data[static_cast<std::size_t>(r) * gw.cols];
      for (int c = 0; c < gw.cols; ++c) row[c] = gr * a_in[static_cast<std::size_t>(c)];
    }
    if (l > 0) {
      Vec g_prev;
      matvec_t(weights_[l], g, g_prev);
      // tanh'(z) = 1 - a^2 with a the stored post-activation.
      for (std::size_t i = 0; i < g_prev.size(); ++i) {
        const double a = acts[l][i];
        g_prev[i] *= (1.0 - a * a);
      }
      g.swap(g_prev);
    } else {
      matvec_t(weights_[0], g, res.input_grad);
      res.input_grad.resize(static_cast<std::size_t>(data_dim_));
    }
  }
  return res;
}

bool VelocityModel::same_shape(const VelocityModel& other) const {
  return layer_dims_ == other.layer_dims_ && cond_dim_ == other.cond_dim_;
}

void VelocityModel::save_checkpoint(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["activation"] = "tanh";
  j["data_dim"] = data_dim_;
  j["cond_dim"] = cond_dim_;
  j["layer_dims"] = layer_dims_;
  std::vector<Vec> w;
  for (const auto& m : weights_) w.push_back(m.data);
  j["weights"] = w;
  j["biases"] = biases_;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump();
  out << "\n";
}

VelocityModel VelocityModel::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("load_checkpoint: unsupported format version");
  if (j.at("activation").get<std::string>() != "tanh")
    throw std::runtime_error("load_checkpoint: unsupported activation");
  const auto layer_dims = j.at("layer_dims").get<std::vector<int>>();
  const int data_dim = j.at("data_dim").get<int>();
  const int cond_dim = j.at("cond_dim").get<int>();
  std::vector<int> hidden(layer_dims.begin() + 1, layer_dims.end() - 1);
  VelocityModel m(data_dim, cond_dim, hidden);
  const auto w = j.at("weights").get<std::vector<Vec>>();
  const auto b = j.at("biases").get<std::vector<Vec>>();
  if (w.size() != m.weights_.size() || b.size() != m.biases_.size())
    throw std::runtime_error("load_checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l].size() != m.weights_[l].data.size() || b[l].size() != m.biases_[l].size())
      throw std::runtime_error("load_checkpoint: layer shape mismatch");
    m.weights_[l].data = w[l];
    m.biases_[l] = b[l];
  }
  return m;
}

void AdamOptimizer::descend(VelocityModel& model, const ParamGrad& grad) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  auto& ws = model.weights();
  auto& bs = model.biases();
  if (!initialized_) {
    for (const auto& w : ws) {
      m_w_.emplace_back(w.rows, w.cols);
      v_w_.emplace_back(w.rows, w.cols);
    }
    for (const auto& b : bs) {
      m_b_.emplace_back(b.size(), 0.0);
      v_b_.emplace_back(b.size(), 0.0);
    }
    initialized_ = true;
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));

  auto update = [&](double& p, double g, double& m, double& v) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    p -= lr_ * mhat / (std::sqrt(vhat) + eps);
  };

  for (std::size_t l = 0; l < ws.size(); ++l) {
    for (std::size_t i = 0; i < ws[l].data.size(); ++i)
      update(ws[l].data[i], grad.weights[l].data[i], m_w_[l].data[i], v_w_[l].data[i]);
    for (std::size_t i = 0; i < bs[l].size(); ++i)
      update(bs[l][i], grad.biases[l][i], m_b_[l][i], v_b_[l][i]);
  }
}

PretrainResult fm_pretrain(VelocityModel& model, const std::vector<Vec>& dataset,
                           const std::vector<Vec>& conds, RngStream& rng,
                           const PretrainOptions& opts) {
  if (dataset.empty()) throw std::invalid_argument("fm_pretrain: empty dataset");
  if (opts.steps < 1) throw std::invalid_argument("fm_pretrain: steps must be >= 1");
  if (!conds.empty() && conds.size() != dataset.size())
    throw std::invalid_argument("fm_pretrain: conds/dataset size mismatch");

  const int d = model.data_dim();
  const Vec no_cond;
  AdamOptimizer opt(opts.lr);
  PretrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(opts.steps));

  ParamGrad grad = model.zero_grad();
  for (int step = 0; step < opts.steps; ++step) {
    grad.set_zero();
    double loss = 0.0;
    for (int b = 0; b < opts.batch_size; ++b) {
      const std::size_t idx =
          static_cast<std::size_t>(rng.uniform01() * static_cast<double>(dataset.size()));
      const Vec& x0 = dataset[idx];
      const Vec& c = conds.empty() ? no_cond : conds[idx];
      const double t = rng.uniform01();
      Vec eps = gaussian_sample(rng, d);
      Vec xt(static_cast<std::size_t>(d));
      Vec target(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) {
        xt[static_cast<std::size_t>(i)] =
            (1.0 - t) * x0[static_cast<std::size_t>(i)] + t * eps[static_cast<std::size_t>(i)];
        target[static_cast<std::size_t>(i)] =
            eps[static_cast<std::size_t>(i)] - x0[static_cast<std::size_t>(i)];
      }
      const Vec v = model.eval(xt, t, c);
      Vec residual(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i)
        residual[static_cast<std::size_t>(i)] =
            v[static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)];
      loss += dot(residual, residual);
      // d/dtheta ||v - target||^2 = backward with upstream 2*(v - target).
      auto bw = model.backward(xt, t, c, scaled(residual, 2.0));
      grad.add_scaled(bw.param_grad, 1.0);
    }
    const double inv_b = 1.0 / static_cast<double>(opts.batch_size);
    loss *= inv_b;
    grad.scale(inv_b);
    if (opts.lr != 0.0) opt.descend(model, grad);
    result.loss_curve.push_back(loss);
  }

  // 100-step moving average of the minibatch loss.
  double window_sum = 0.0;
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
    window_sum += result.loss_curve[i];
    if (i >= 100) window_sum -= result.loss_curve[i - 100];
    const double n = static_cast<double>(std::min<std::size_t>(i + 1, 100));
    result.loss_moving_avg.push_back(window_sum / n);
  }
  return result;
}

GaussianFlowOracle::GaussianFlowOracle(Vec data_mean, double data_std)
    : mean_(std::move(data_mean)), s_(data_std) {
  if (!(s_ > 0.0)) throw std::invalid_argument("GaussianFlowOracle: data_std must be > 0");
}

double GaussianFlowOracle::marginal_var(double t) const {
  return (1.0 - t) * (1.0 - t) * s_ * s_ + t * t;
}

Vec GaussianFlowOracle::eval(const Vec& x, double t, const Vec&) const {
  if (!(t > 0.0)) throw std::invalid_argument("GaussianFlowOracle: t must be > 0");
  if (x.size() != mean_.size())
    throw std::invalid_argument("GaussianFlowOracle: x dimension mismatch");
  const double var = marginal_var(t);
  const double a = (t - (1.0 - t) * s_ * s_) / var;
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = a * (x[i] - (1.0 - t) * mean_[i]) - mean_[i];
  return out;
}

Vec GaussianFlowOracle::exact_terminal(const Vec& x1) const {
  Vec out(mean_.size());
  for (std::size_t i = 0; i < mean_.size(); ++i) out[i] = mean_[i] + s_ * x1[i];
  return out;
}

}  // namespace ngrpo
