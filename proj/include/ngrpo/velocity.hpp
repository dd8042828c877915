// SPDX-License-Identifier: Apache-2.0
//
// The learnable velocity field v(x, t, c): a small tanh MLP with
// hand-derived forward and backward passes, an Adam optimizer used by
// both pretraining and policy updates, and a closed-form Gaussian-flow
// field used as the ground-truth oracle in the verification suite.

#ifndef NGRPO_VELOCITY_HPP_
#define NGRPO_VELOCITY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ngrpo/mathcore.hpp"

namespace ngrpo {

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Generic velocity field interface. Both the learned model and the
// analytic oracle implement it, so the solvers can run either.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  // v(x, t, cond). cond may be empty for unconditional fields.
  virtual Vec eval(const Vec& x, double t, const Vec& cond) const = 0;
  virtual int data_dim() const = 0;
};

// Gradients in the same shape as the model parameters.
struct ParamGrad {
  std::vector<Matrix> weights;
  std::vector<Vec> biases;

  void add_scaled(const ParamGrad& other, double alpha);
  void scale(double alpha);
  void set_zero();
  bool all_finite() const;
  double max_abs() const;
  double norm() const;
  // Rescales in place so the global norm is at most max_norm (no-op when
  // max_norm <= 0 or the gradient is already inside the ball).
  void clip_norm(double max_norm);
};

// A tanh MLP v(x, t, c) -> R^data_dim. Input layout is
// [x (data_dim), t (1 scalar), c (cond_dim)]. The time coordinate enters
// as the raw scalar; no Fourier features.
class VelocityModel : public VelocityField {
 public:
  VelocityModel() = default;
  // hidden: sizes of the hidden layers, e.g. {64, 64, 64}.
  VelocityModel(int data_dim, int cond_dim, std::vector<int> hidden);

  static VelocityModel random_init(int data_dim, int cond_dim,
                                   std::vector<int> hidden, RngStream& rng);

  Vec eval(const Vec& x, double t, const Vec& cond) const override;
  int data_dim() const override { return data_dim_; }
  int cond_dim() const { return cond_dim_; }
  const std::vector<int>& layer_dims() const { return layer_dims_; }
  std::int64_t param_count() const;

  // backward: gradient of <upstream, v(x,t,c)> with respect to the
  // parameters and with respect to x. One forward pass is recomputed
  // internally.
  struct BackwardResult {
    ParamGrad param_grad;
    Vec input_grad;  // data_dim entries (the x slice only)
  };
  BackwardResult backward(const Vec& x, double t, const Vec& cond,
                          const Vec& upstream) const;

  ParamGrad zero_grad() const;

  // Parameter access for the optimizer and checkpoints.
  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vec>& biases() { return biases_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vec>& biases() const { return biases_; }

  bool same_shape(const VelocityModel& other) const;

  // JSON checkpoint with a format-version field; parameters dumped
  // row-major, exact double round-trip.
  void save_checkpoint(const std::string& path) const;
  static VelocityModel load_checkpoint(const std::string& path);

 private:
  Vec assemble_input(const Vec& x, double t, const Vec& cond) const;

  int data_dim_ = 0;
  int cond_dim_ = 0;
  std::vector<int> layer_dims_;  // full chain: in, hidden..., out
  std::vector<Matrix> weights_;
  std::vector<Vec> biases_;
};

// Adam with fixed (0.9, 0.999, 1e-8) and no weight decay. `descend`
// subtracts the step (gradient descent); pass the gradient of the loss.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr) : lr_(lr) {}

  void descend(VelocityModel& model, const ParamGrad& grad);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_;
  long step_ = 0;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vec> m_b_, v_b_;
  bool initialized_ = false;
};

// Rectified-flow pretraining: regress v(x_t, t, c) onto eps - x0 with
// x_t = (1-t) x0 + t eps, t ~ U(0,1). Conditions are optional and must
// be index-aligned with the dataset when present.
struct PretrainOptions {
  int steps = 5000;
  double lr = 1e-3;
  int batch_size = 32;
};

struct PretrainResult {
  std::vector<double> loss_curve;        // per-step minibatch loss
  std::vector<double> loss_moving_avg;   // 100-step moving average
};

PretrainResult fm_pretrain(VelocityModel& model, const std::vector<Vec>& dataset,
                           const std::vector<Vec>& conds, RngStream& rng,
                           const PretrainOptions& opts);

// ---------------------------------------------------------------------------
// Closed-form optimal field for isotropic Gaussian data x0 ~ N(mean, s^2 I):
//   v*(x, t) = E[eps - x0 | x_t = x]
// with x_t = (1-t) x0 + t eps. The marginal of x_t is
// N((1-t) mean, ((1-t)^2 s^2 + t^2) I) and the conditional expectation is
// linear in x:
//   v*(x, t) = a(t) (x - (1-t) mean) - mean,
//   a(t) = (t - (1-t) s^2) / ((1-t)^2 s^2 + t^2).
// ---------------------------------------------------------------------------
class GaussianFlowOracle : public VelocityField {
 public:
  GaussianFlowOracle(Vec data_mean, double data_std);

  Vec eval(const Vec& x, double t, const Vec& cond) const override;
  int data_dim() const override { return static_cast<int>(mean_.size()); }

  const Vec& mean() const { return mean_; }
  double data_std() const { return s_; }

  // Marginal of x_t per coordinate: mean (1-t)*mu_i, variance (1-t)^2 s^2 + t^2.
  double marginal_var(double t) const;

  // Exact reverse-flow map from t=1 to t=0: x0 = mean + s * x1.
  Vec exact_terminal(const Vec& x1) const;

 private:
  Vec mean_;
  double s_;
};

}  // namespace ngrpo

#endif  // NGRPO_VELOCITY_HPP_
