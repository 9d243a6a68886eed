#include "bgcn/variational.hpp"

#include <cmath>
#include <limits>

namespace bgcn {

double softplus(double x) {
  double r = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  // exp underflows around -745; keep the result strictly positive anyway.
  return r > 0.0 ? r : std::numeric_limits<double>::min();
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

// log N(w; mu, sigma^2) evaluated via z = (w - mu) / sigma to stay finite for
// extremely small sigma.
double gaussian_log_density(double w, double mu, double sigma) {
  const double z = (w - mu) / sigma;
  return -0.5 * kLogTwoPi - std::log(sigma) - 0.5 * z * z;
}

}  // namespace

VariationalParams VariationalParams::init(Eigen::Index in, Eigen::Index out, RngStream& rng,
                                          double rho_init, double prior_var) {
  if (in <= 0 || out <= 0) throw Error("VariationalParams: dimensions must be positive");
  if (!(prior_var > 0.0)) throw Error("VariationalParams: prior variance must be positive");
  VariationalParams vp;
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  vp.mu_w.resize(in, out);
  for (Eigen::Index i = 0; i < in; ++i)
    for (Eigen::Index j = 0; j < out; ++j)
      vp.mu_w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  vp.rho_w = Matrix::Constant(in, out, rho_init);
  vp.mu_b = Matrix::Zero(1, out);
  vp.rho_b = Matrix::Constant(1, out, rho_init);
  vp.prior_var = prior_var;
  return vp;
}

namespace {

void accumulate_sample(const Matrix& mu, const Matrix& rho, const Matrix& eps, double prior_var,
                       Matrix& w_out, double& log_q, double& log_p) {
  const double prior_sigma = std::sqrt(prior_var);
  w_out.resize(mu.rows(), mu.cols());
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    for (Eigen::Index j = 0; j < mu.cols(); ++j) {
      const double sigma = softplus(rho(i, j));
      const double w = mu(i, j) + sigma * eps(i, j);
      w_out(i, j) = w;
      log_q += gaussian_log_density(w, mu(i, j), sigma);
      log_p += gaussian_log_density(w, 0.0, prior_sigma);
    }
  }
}

}  // namespace

VariationalSample make_sample(const VariationalParams& vp, const Matrix& eps_w,
                              const Matrix& eps_b) {
  if (eps_w.rows() != vp.mu_w.rows() || eps_w.cols() != vp.mu_w.cols() ||
      eps_b.rows() != vp.mu_b.rows() || eps_b.cols() != vp.mu_b.cols())
    throw Error("make_sample: noise shape mismatch");
  VariationalSample s;
  s.eps_w = eps_w;
  s.eps_b = eps_b;
  accumulate_sample(vp.mu_w, vp.rho_w, eps_w, vp.prior_var, s.w, s.log_q, s.log_p);
  accumulate_sample(vp.mu_b, vp.rho_b, eps_b, vp.prior_var, s.b, s.log_q, s.log_p);
  return s;
}

VariationalSample sample_weights(const VariationalParams& vp, RngStream& rng) {
  Matrix eps_w(vp.mu_w.rows(), vp.mu_w.cols());
  for (Eigen::Index i = 0; i < eps_w.rows(); ++i)
    for (Eigen::Index j = 0; j < eps_w.cols(); ++j) eps_w(i, j) = rng.normal();
  Matrix eps_b(1, vp.mu_b.cols());
  for (Eigen::Index j = 0; j < eps_b.cols(); ++j) eps_b(0, j) = rng.normal();
  return make_sample(vp, eps_w, eps_b);
}

VariationalSample frozen_sample(const VariationalParams& vp) {
  return make_sample(vp, Matrix::Zero(vp.mu_w.rows(), vp.mu_w.cols()),
                     Matrix::Zero(1, vp.mu_b.cols()));
}

Matrix vi_forward(const Matrix& input, const VariationalSample& s) {
  if (input.cols() != s.w.rows()) throw Error("vi_forward: shape mismatch");
  Matrix out = input * s.w;
  out.rowwise() += s.b.row(0);
  return out;
}

double kl_loss_mc(std::span<const VariationalSample> samples) {
  if (samples.empty()) throw Error("kl_loss_mc: no samples");
  double acc = 0.0;
  for (const auto& s : samples) acc += s.log_q - s.log_p;
  return acc / static_cast<double>(samples.size());
}

double combined_loss(double kl, double nll, double kl_weight) {
  return kl_weight * kl + nll;
}

namespace {

void backward_block(const Matrix& rho, const Matrix& eps, const Matrix& w, double prior_var,
                    double kl_weight, const Matrix& dw, Matrix& g_mu, Matrix& g_rho) {
  g_mu.resize(rho.rows(), rho.cols());
  g_rho.resize(rho.rows(), rho.cols());
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      const double sig = sigmoid(rho(i, j));
      const double sigma = softplus(rho(i, j));
      // d(loss)/d(w) combines the downstream gradient with the prior term
      // from -kl_weight * log_p; the posterior entropy term reaches rho only.
      const double dloss_dw = dw(i, j) + kl_weight * w(i, j) / prior_var;
      g_mu(i, j) = dloss_dw;
      g_rho(i, j) = dloss_dw * eps(i, j) * sig - kl_weight * sig / sigma;
    }
  }
}

}  // namespace

ViGrad vi_backward(const VariationalParams& vp, const VariationalSample& s, const Matrix& input,
                   const Matrix& grad_output, double kl_weight) {
  if (grad_output.rows() != input.rows() || grad_output.cols() != vp.out())
    throw Error("vi_backward: shape mismatch");
  ViGrad g;
  Matrix dw = input.transpose() * grad_output;
  Matrix db = grad_output.colwise().sum();
  backward_block(vp.rho_w, s.eps_w, s.w, vp.prior_var, kl_weight, dw, g.g_mu_w, g.g_rho_w);
  backward_block(vp.rho_b, s.eps_b, s.b, vp.prior_var, kl_weight, db, g.g_mu_b, g.g_rho_b);
  g.grad_input = grad_output * s.w.transpose();
  return g;
}

}  // namespace bgcn
