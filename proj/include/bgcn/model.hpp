#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bgcn/common.hpp"
#include "bgcn/dataset.hpp"
#include "bgcn/graph.hpp"
#include "bgcn/nn.hpp"
#include "bgcn/sampler.hpp"
#include "bgcn/variational.hpp"

namespace bgcn {

// kGcn: deterministic baseline — the same architecture with the variational
// layer frozen at its mean, trained on the observed graph only, single
// deterministic prediction pass.
// kBgcnNrws: full pipeline — observed-graph phase, then per outer iteration a
// fresh copy vector and num_graphs sampled graphs, finishing with
// Monte-Carlo prediction averaged over snapshots, weight draws and dropout.
enum class Variant { kGcn, kBgcnNrws };
Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  int hidden1 = 32;
  int hidden2 = 16;
  double dropout_keep = 0.5;
  double lr = 0.01;
  int total_epochs = 300;
  int pretrain_epochs = 200;  // epochs on the observed graph before sampling
  int mc_v = 2;               // outer iterations (one copy vector each)
  int num_graphs = 5;         // sampled graphs per outer iteration
  int mc_s = 5;               // weight/dropout draws per snapshot at prediction
  int walk_steps = 10;
  double weight_decay = 5e-4;  // L2 on the first convolution's weights; 0 disables
  double kl_weight = -1.0;     // negative => 1 / |nodes| (see README)
  double prior_var = 0.1;
  double rho_init = -3.0;
  bool vi_frozen = false;            // weights pinned to mu, no KL term
  bool row_normalize_features = true;
  bool mc_dropout = true;            // dropout stays on during MC prediction
  bool predict_on_sampled_graphs = false;  // average over re-sampled graphs too
  std::uint64_t seed = 0;

  void validate() const;  // throws Error on inconsistent settings
  double effective_kl_weight(std::size_t num_nodes) const;
};

struct ModelWeights {
  Matrix w0;  // first convolution, d x hidden1
  VariationalParams vi;
  Matrix w2;  // output convolution, hidden2 x num_classes
};

struct Snapshot {
  int outer = 0;
  int graph_index = 0;
  ModelWeights weights;
};

struct TrainedModel {
  Variant variant = Variant::kBgcnNrws;
  ModelConfig config;  // effective configuration after variant coercions
  ModelWeights weights;
  std::vector<Snapshot> snapshots;
  std::vector<CopyVector> xi_draws;       // one per outer iteration
  std::vector<int> observed_phase_labels; // argmax after the observed-graph phase
  std::vector<double> epoch_loss;
  std::vector<double> val_accuracy;       // logged per epoch, never used for updates
};

// Loss of one forward pass with injected stochasticity (noise and dropout are
// arguments so gradients can be checked against finite differences of this
// same function). dropout_mask entries are the applied scales (0 or 1/keep).
// When grads is non-null the full backward pass fills it.
struct TrainingOptions {
  double kl_weight = 0.0;
  double weight_decay = 0.0;
  bool vi_frozen = false;
};
struct ModelGrads {
  Matrix w0;
  Matrix mu_w, rho_w, mu_b, rho_b;
  Matrix w2;
};
struct LossReport {
  double total = 0.0;
  double nll = 0.0;
  double kl = 0.0;
};
LossReport model_loss(const ModelWeights& w, const NormalizedAdjacency& a,
                      const CompressedMatrix& propagated_features,
                      std::span<const int> labels, std::span<const int> train_idx,
                      const TrainingOptions& opt, const Matrix& eps_w, const Matrix& eps_b,
                      const Matrix& dropout_mask, ModelGrads* grads);

// Deterministic class probabilities for fixed weights (frozen variational
// layer, no dropout).
Matrix forward_probabilities(const ModelWeights& w, const NormalizedAdjacency& a,
                             const Matrix& features);

TrainedModel train_model(const Dataset& ds, const Split& split, const ModelConfig& cfg,
                         Variant variant, const XiSampler& sampler);

// Posterior-averaged class probabilities (n x num_classes, rows sum to 1).
// Prediction-time randomness (weight draws, dropout masks, optional graph
// re-sampling) is derived from prediction_seed; the one-argument form uses
// the training seed, so repeated calls are bitwise identical.
Matrix predict_mc(const TrainedModel& model, const Dataset& ds, std::uint64_t prediction_seed);
Matrix predict_mc(const TrainedModel& model, const Dataset& ds);

double accuracy(const Matrix& probs, std::span<const int> labels, std::span<const int> idx);

// Binary checkpoint with trailing checksum; round-trips bit-exactly.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace bgcn
