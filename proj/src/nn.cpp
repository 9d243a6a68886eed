#include "bgcn/nn.hpp"

#include <cmath>

namespace bgcn {

Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  if (rows <= 0 || cols <= 0) throw Error("xavier_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  return w;
}

Matrix apply_activation(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::kNone:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
  }
  throw Error("apply_activation: unknown activation");
}

Matrix activation_grad(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::kNone:
      return Matrix::Ones(z.rows(), z.cols());
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix();
  }
  throw Error("activation_grad: unknown activation");
}

Matrix gcn_layer_forward(const NormalizedAdjacency& a, const Matrix& h, const Matrix& w,
                         Activation act, GcnLayerCache* cache) {
  if (h.cols() != w.rows()) throw Error("gcn_layer_forward: feature/weight shape mismatch");
  Matrix propagated = spmm(a, h);
  Matrix z = propagated * w;
  Matrix out = apply_activation(z, act);
  if (cache) {
    cache->propagated = std::move(propagated);
    cache->pre_activation = std::move(z);
  }
  return out;
}

GcnLayerGrad gcn_layer_backward(const NormalizedAdjacency& a, const Matrix& w, Activation act,
                                const GcnLayerCache& cache, const Matrix& grad_output) {
  if (grad_output.rows() != cache.pre_activation.rows() ||
      grad_output.cols() != cache.pre_activation.cols())
    throw Error("gcn_layer_backward: gradient shape mismatch");
  Matrix dz = grad_output.cwiseProduct(activation_grad(cache.pre_activation, act));
  GcnLayerGrad g;
  g.grad_w = cache.propagated.transpose() * dz;
  g.grad_input = spmm(a, dz * w.transpose());
  return g;
}

Matrix make_dropout_mask(Eigen::Index rows, Eigen::Index cols, double keep_prob,
                         RngStream& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw Error("dropout: keep_prob must be in (0, 1]");
  if (keep_prob == 1.0) return Matrix::Ones(rows, cols);
  const double scale = 1.0 / keep_prob;
  Matrix mask(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      mask(i, j) = rng.uniform() < keep_prob ? scale : 0.0;
  return mask;
}

DropoutResult dropout(const Matrix& h, double keep_prob, bool training, RngStream& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw Error("dropout: keep_prob must be in (0, 1]");
  DropoutResult r;
  if (!training || keep_prob == 1.0) {
    r.output = h;
    r.mask = Matrix::Ones(h.rows(), h.cols());
    return r;
  }
  r.mask = make_dropout_mask(h.rows(), h.cols(), keep_prob, rng);
  r.output = h.cwiseProduct(r.mask);
  return r;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - mx);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

SoftmaxCrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                          std::span<const int> mask) {
  if (labels.size() != static_cast<std::size_t>(logits.rows()))
    throw Error("softmax_cross_entropy: one label per row required");
  if (mask.empty()) throw Error("softmax_cross_entropy: empty mask");
  SoftmaxCrossEntropy r;
  r.grad_logits = Matrix::Zero(logits.rows(), logits.cols());
  const double inv_count = 1.0 / static_cast<double>(mask.size());
  for (int row : mask) {
    if (row < 0 || row >= logits.rows())
      throw Error("softmax_cross_entropy: mask row out of range");
    const int y = labels[static_cast<std::size_t>(row)];
    if (y < 0 || y >= logits.cols()) throw Error("softmax_cross_entropy: label out of range");
    const double mx = logits.row(row).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(logits(row, j) - mx);
    const double log_sum = std::log(sum);
    r.loss += (log_sum - (logits(row, y) - mx)) * inv_count;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      double p = std::exp(logits(row, j) - mx - log_sum);
      if (j == y) p -= 1.0;
      r.grad_logits(row, j) = p * inv_count;
    }
  }
  return r;
}

double CompressedMatrix::density() const {
  if (rows == 0 || cols == 0) return 0.0;
  const auto total = static_cast<double>(rows) * static_cast<double>(cols);
  return is_sparse ? static_cast<double>(values.size()) / total
                   : static_cast<double>((dense.array() != 0.0).count()) / total;
}

CompressedMatrix compress_rows(const Matrix& m, double max_density) {
  CompressedMatrix c;
  c.rows = m.rows();
  c.cols = m.cols();
  const auto total = static_cast<double>(m.rows()) * static_cast<double>(m.cols());
  const auto nnz = static_cast<double>((m.array() != 0.0).count());
  if (total == 0.0 || nnz > max_density * total) {
    c.dense = m;
    return c;
  }
  c.is_sparse = true;
  c.row_offsets.assign(1, 0);
  c.row_offsets.reserve(static_cast<std::size_t>(m.rows()) + 1);
  c.col_indices.reserve(static_cast<std::size_t>(nnz));
  c.values.reserve(static_cast<std::size_t>(nnz));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) {
        c.col_indices.push_back(static_cast<std::int32_t>(j));
        c.values.push_back(m(i, j));
      }
    }
    c.row_offsets.push_back(static_cast<std::int64_t>(c.values.size()));
  }
  return c;
}

Matrix cm_matmul(const CompressedMatrix& p, const Matrix& w) {
  if (w.rows() != p.cols) throw Error("cm_matmul: shape mismatch");
  if (!p.is_sparse) return p.dense * w;
  Matrix out = Matrix::Zero(p.rows, w.cols());
  for (Eigen::Index i = 0; i < p.rows; ++i) {
    auto out_row = out.row(i);
    for (std::int64_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k)
      out_row += p.values[k] * w.row(p.col_indices[k]);
  }
  return out;
}

Matrix cm_matmul_t(const CompressedMatrix& p, const Matrix& g) {
  if (g.rows() != p.rows) throw Error("cm_matmul_t: shape mismatch");
  if (!p.is_sparse) return p.dense.transpose() * g;
  Matrix out = Matrix::Zero(p.cols, g.cols());
  for (Eigen::Index i = 0; i < p.rows; ++i) {
    auto g_row = g.row(i);
    for (std::int64_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k)
      out.row(p.col_indices[k]) += p.values[k] * g_row;
  }
  return out;
}

AdamState AdamState::init(std::span<const Matrix* const> params, double beta1, double beta2,
                          double epsilon) {
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw Error("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != state.m[i].rows() ||
        p.cols() != state.m[i].cols())
      throw Error("adam_step: shape mismatch");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (state.m[i].array() / bc1) /
                 ((state.v[i].array() / bc2).sqrt() + state.epsilon);
  }
}

}  // namespace bgcn
