#pragma once

#include <span>

#include "bgcn/common.hpp"

namespace bgcn {

// Numerically safe softplus: positive for every finite input, no overflow.
double softplus(double x);
double sigmoid(double x);

// Mean-field Gaussian posterior over a dense layer's weights and bias.
// sigma = softplus(rho); the prior is N(0, prior_var) per coordinate.
struct VariationalParams {
  Matrix mu_w, rho_w;  // in x out
  Matrix mu_b, rho_b;  // 1 x out
  double prior_var = 0.1;

  static VariationalParams init(Eigen::Index in, Eigen::Index out, RngStream& rng,
                                double rho_init = -3.0, double prior_var = 0.1);
  Eigen::Index in() const { return mu_w.rows(); }
  Eigen::Index out() const { return mu_w.cols(); }
};

// One reparameterized draw w = mu + softplus(rho) .* eps, with the posterior
// and prior log-densities of the drawn weights (bias included in both).
struct VariationalSample {
  Matrix w, b;
  Matrix eps_w, eps_b;
  double log_q = 0.0;
  double log_p = 0.0;
};

// Deterministic core: builds the sample from given noise (tests feed fixed
// eps; sample_weights draws it).
VariationalSample make_sample(const VariationalParams& vp, const Matrix& eps_w,
                              const Matrix& eps_b);
VariationalSample sample_weights(const VariationalParams& vp, RngStream& rng);
// eps = 0: w = mu exactly; used by the deterministic variant and degenerate
// configurations.
VariationalSample frozen_sample(const VariationalParams& vp);

// out = input * w + b (bias broadcast over rows).
Matrix vi_forward(const Matrix& input, const VariationalSample& s);

// Monte-Carlo KL(q || prior): mean of log_q - log_p over draws.
double kl_loss_mc(std::span<const VariationalSample> samples);

double combined_loss(double kl, double nll, double kl_weight);

// Pathwise gradients for loss = kl_weight * (log_q - log_p) + downstream,
// with the noise eps held fixed (reparameterization trick):
//   d/d_mu  = dW + kl_weight * w / prior_var
//   d/d_rho = (dW + kl_weight * w / prior_var) .* eps .* sigmoid(rho)
//             - kl_weight * sigmoid(rho) / sigma
// where dW = input^T * grad_output is the downstream weight gradient.
struct ViGrad {
  Matrix g_mu_w, g_rho_w;
  Matrix g_mu_b, g_rho_b;
  Matrix grad_input;
};
ViGrad vi_backward(const VariationalParams& vp, const VariationalSample& s, const Matrix& input,
                   const Matrix& grad_output, double kl_weight);

}  // namespace bgcn
