#pragma once

#include <span>
#include <vector>

#include "bgcn/common.hpp"
#include "bgcn/graph.hpp"

namespace bgcn {

// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)); draws row-major.
Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, RngStream& rng);

enum class Activation { kNone, kRelu };

Matrix apply_activation(const Matrix& z, Activation act);
// Element-wise derivative evaluated at pre-activation z.
Matrix activation_grad(const Matrix& z, Activation act);

// Graph convolution  out = act(a * h * w).
// The cache stores what backward needs: propagated = a * h and the
// pre-activation.
struct GcnLayerCache {
  Matrix propagated;
  Matrix pre_activation;
};
Matrix gcn_layer_forward(const NormalizedAdjacency& a, const Matrix& h, const Matrix& w,
                         Activation act, GcnLayerCache* cache = nullptr);

// Gradients for the layer above; `a` is symmetric so propagating the
// upstream gradient back through the adjacency is another spmm.
struct GcnLayerGrad {
  Matrix grad_w;
  Matrix grad_input;
};
GcnLayerGrad gcn_layer_backward(const NormalizedAdjacency& a, const Matrix& w, Activation act,
                                const GcnLayerCache& cache, const Matrix& grad_output);

// Inverted dropout: in training mode each entry is kept with probability
// keep_prob and scaled by 1/keep_prob; mask holds the applied scale factors
// (0 or 1/keep_prob) so backward is grad_output.cwiseProduct(mask).
// keep_prob == 1 or training == false returns the input unchanged (and an
// all-ones mask) without consuming randomness.
struct DropoutResult {
  Matrix output;
  Matrix mask;
};
DropoutResult dropout(const Matrix& h, double keep_prob, bool training, RngStream& rng);
// The mask alone (entries 0 or 1/keep_prob), for callers that apply it
// themselves; keep_prob == 1 yields all ones without consuming randomness.
Matrix make_dropout_mask(Eigen::Index rows, Eigen::Index cols, double keep_prob, RngStream& rng);

// Dense matrix with an optional CSR form picked at build time when the
// content is mostly zeros; the products then skip zero entries. Values are
// copied exactly, so the sparse products equal the dense ones up to
// floating-point summation order.
struct CompressedMatrix {
  Eigen::Index rows = 0, cols = 0;
  bool is_sparse = false;
  Matrix dense;  // empty when is_sparse
  std::vector<std::int64_t> row_offsets;
  std::vector<std::int32_t> col_indices;
  std::vector<double> values;

  double density() const;
};
CompressedMatrix compress_rows(const Matrix& m, double max_density = 0.25);
Matrix cm_matmul(const CompressedMatrix& p, const Matrix& w);    // p * w
Matrix cm_matmul_t(const CompressedMatrix& p, const Matrix& g);  // p^T * g

// Numerically stable row-wise softmax (max-shifted).
Matrix softmax_rows(const Matrix& logits);

// Mean cross-entropy over the rows listed in `mask`; grad_logits is dense
// (n x k) with zero rows outside the mask, already divided by mask.size().
struct SoftmaxCrossEntropy {
  double loss = 0.0;
  Matrix grad_logits;
};
SoftmaxCrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                          std::span<const int> mask);

// Adam with bias correction. One slot per parameter matrix; slot shapes are
// fixed at init and checked on every step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState init(std::span<const Matrix* const> params, double beta1 = 0.9,
                        double beta2 = 0.999, double epsilon = 1e-8);
};

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr);

}  // namespace bgcn
