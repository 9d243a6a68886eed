#include "bgcn/model.hpp"

#include <algorithm>
#include <cmath>

#include "bgcn/binary_io.hpp"

namespace bgcn {

Variant variant_from_string(const std::string& s) {
  if (s == "gcn") return Variant::kGcn;
  if (s == "bgcn-nrws") return Variant::kBgcnNrws;
  throw Error("unknown variant '" + s + "' (expected gcn or bgcn-nrws)");
}

std::string to_string(Variant v) {
  return v == Variant::kGcn ? "gcn" : "bgcn-nrws";
}

void ModelConfig::validate() const {
  if (hidden1 <= 0 || hidden2 <= 0) throw Error("config: hidden sizes must be positive");
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0))
    throw Error("config: dropout_keep must be in (0, 1]");
  if (!(lr > 0.0)) throw Error("config: lr must be positive");
  if (total_epochs < 0 || pretrain_epochs < 0) throw Error("config: negative epoch count");
  if (pretrain_epochs >= total_epochs)
    throw Error("config: pretrain_epochs must be less than total_epochs");
  if (mc_v <= 0) throw Error("config: mc_v must be positive");
  if (num_graphs <= 0) throw Error("config: num_graphs must be positive");
  if (mc_s <= 0) throw Error("config: mc_s must be positive");
  if (walk_steps < 1) throw Error("config: walk_steps must be at least 1");
  if (weight_decay < 0.0) throw Error("config: weight_decay must be non-negative");
  if (!(prior_var > 0.0)) throw Error("config: prior_var must be positive");
}

double ModelConfig::effective_kl_weight(std::size_t num_nodes) const {
  if (kl_weight >= 0.0) return kl_weight;
  if (num_nodes == 0) throw Error("config: empty graph");
  return 1.0 / static_cast<double>(num_nodes);
}

LossReport model_loss(const ModelWeights& w, const NormalizedAdjacency& a,
                      const CompressedMatrix& propagated_features,
                      std::span<const int> labels, std::span<const int> train_idx,
                      const TrainingOptions& opt, const Matrix& eps_w, const Matrix& eps_b,
                      const Matrix& dropout_mask, ModelGrads* grads) {
  const Matrix z1 = cm_matmul(propagated_features, w.w0);
  const Matrix h1 = apply_activation(z1, Activation::kRelu);
  const VariationalSample s = make_sample(w.vi, eps_w, eps_b);
  const Matrix z2 = vi_forward(h1, s);
  const Matrix h2 = apply_activation(z2, Activation::kRelu);
  const Matrix h2d = h2.cwiseProduct(dropout_mask);
  const Matrix prop3 = spmm(a, h2d);
  const Matrix logits = prop3 * w.w2;
  const SoftmaxCrossEntropy ce = softmax_cross_entropy(logits, labels, train_idx);

  LossReport report;
  report.nll = ce.loss;
  report.kl = opt.vi_frozen ? 0.0 : s.log_q - s.log_p;
  report.total = combined_loss(report.kl, report.nll, opt.vi_frozen ? 0.0 : opt.kl_weight);
  if (opt.weight_decay != 0.0) report.total += 0.5 * opt.weight_decay * w.w0.squaredNorm();

  if (grads) {
    const Matrix& dlogits = ce.grad_logits;
    grads->w2 = prop3.transpose() * dlogits;
    const Matrix dh2d = spmm(a, dlogits * w.w2.transpose());
    const Matrix dh2 = dh2d.cwiseProduct(dropout_mask);
    const Matrix dz2 = dh2.cwiseProduct(activation_grad(z2, Activation::kRelu));
    const ViGrad vig =
        vi_backward(w.vi, s, h1, dz2, opt.vi_frozen ? 0.0 : opt.kl_weight);
    grads->mu_w = vig.g_mu_w;
    grads->rho_w = vig.g_rho_w;
    grads->mu_b = vig.g_mu_b;
    grads->rho_b = vig.g_rho_b;
    const Matrix dz1 = vig.grad_input.cwiseProduct(activation_grad(z1, Activation::kRelu));
    grads->w0 = cm_matmul_t(propagated_features, dz1);
    if (opt.weight_decay != 0.0) grads->w0 += opt.weight_decay * w.w0;
  }
  return report;
}

namespace {

// One stochastic forward pass to class probabilities, shared by training-time
// validation, deterministic prediction and Monte-Carlo prediction so that all
// of them are bitwise consistent with each other.
Matrix pass_probabilities(const ModelWeights& w, const NormalizedAdjacency& a,
                          const CompressedMatrix& p1, const VariationalSample& s,
                          const Matrix* dropout_mask) {
  const Matrix h1 = apply_activation(cm_matmul(p1, w.w0), Activation::kRelu);
  Matrix h2 = apply_activation(vi_forward(h1, s), Activation::kRelu);
  if (dropout_mask) h2 = h2.cwiseProduct(*dropout_mask);
  const Matrix logits = spmm(a, h2) * w.w2;
  return softmax_rows(logits);
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

class Trainer {
 public:
  Trainer(const Matrix& features, std::span<const int> labels, std::span<const int> train_idx,
          const ModelConfig& cfg, double kl_weight, ModelWeights& weights)
      : x_(features),
        labels_(labels),
        train_idx_(train_idx),
        cfg_(cfg),
        weights_(weights),
        dropout_rng_(derive_seed(cfg.seed, Stream::kDropout)),
        vi_rng_(derive_seed(cfg.seed, Stream::kVi)) {
    opt_.kl_weight = kl_weight;
    opt_.weight_decay = cfg.weight_decay;
    opt_.vi_frozen = cfg.vi_frozen;
    const Matrix* params[] = {&weights_.w0,      &weights_.vi.mu_w, &weights_.vi.rho_w,
                              &weights_.vi.mu_b, &weights_.vi.rho_b, &weights_.w2};
    adam_ = AdamState::init(params);
  }

  void set_graph(const SparseGraph& g) {
    a_ = normalize_with_self_loops(g);
    p1_ = compress_rows(spmm(a_, x_));
  }

  const NormalizedAdjacency& adjacency() const { return a_; }
  const CompressedMatrix& propagated() const { return p1_; }

  double run_epoch() {
    Matrix eps_w = Matrix::Zero(weights_.vi.in(), weights_.vi.out());
    Matrix eps_b = Matrix::Zero(1, weights_.vi.out());
    if (!cfg_.vi_frozen) {
      for (Eigen::Index i = 0; i < eps_w.rows(); ++i)
        for (Eigen::Index j = 0; j < eps_w.cols(); ++j) eps_w(i, j) = vi_rng_.normal();
      for (Eigen::Index j = 0; j < eps_b.cols(); ++j) eps_b(0, j) = vi_rng_.normal();
    }
    const Matrix mask =
        make_dropout_mask(x_.rows(), cfg_.hidden2, cfg_.dropout_keep, dropout_rng_);
    ModelGrads grads;
    const LossReport report = model_loss(weights_, a_, p1_, labels_, train_idx_, opt_, eps_w,
                                         eps_b, mask, &grads);
    Matrix* params[] = {&weights_.w0,      &weights_.vi.mu_w, &weights_.vi.rho_w,
                        &weights_.vi.mu_b, &weights_.vi.rho_b, &weights_.w2};
    const Matrix* gptrs[] = {&grads.w0,   &grads.mu_w, &grads.rho_w,
                             &grads.mu_b, &grads.rho_b, &grads.w2};
    adam_step(params, gptrs, adam_, cfg_.lr);
    return report.total;
  }

  Matrix deterministic_probs() const {
    return pass_probabilities(weights_, a_, p1_, frozen_sample(weights_.vi), nullptr);
  }

 private:
  const Matrix& x_;
  std::span<const int> labels_;
  std::span<const int> train_idx_;
  const ModelConfig& cfg_;
  ModelWeights& weights_;
  TrainingOptions opt_;
  AdamState adam_;
  RngStream dropout_rng_;
  RngStream vi_rng_;
  NormalizedAdjacency a_;
  CompressedMatrix p1_;
};

}  // namespace

Matrix forward_probabilities(const ModelWeights& w, const NormalizedAdjacency& a,
                             const Matrix& features) {
  const CompressedMatrix p1 = compress_rows(spmm(a, features));
  return pass_probabilities(w, a, p1, frozen_sample(w.vi), nullptr);
}

TrainedModel train_model(const Dataset& ds, const Split& split, const ModelConfig& cfg,
                         Variant variant, const XiSampler& sampler) {
  cfg.validate();
  if (split.train_idx.empty()) throw Error("train_model: empty training set");
  ModelConfig eff = cfg;
  if (variant == Variant::kGcn) {
    // Deterministic baseline: every epoch on the observed graph, weights
    // pinned to the posterior mean, single prediction pass.
    eff.vi_frozen = true;
    eff.pretrain_epochs = eff.total_epochs;
    eff.mc_v = 0;
    eff.mc_s = 1;
    eff.mc_dropout = false;
    eff.predict_on_sampled_graphs = false;
  }

  const Matrix x = eff.row_normalize_features ? row_normalize(ds.features) : ds.features;
  RngStream init_rng(derive_seed(eff.seed, Stream::kInit));
  TrainedModel out;
  out.variant = variant;
  out.config = eff;
  out.weights.w0 = xavier_init(x.cols(), eff.hidden1, init_rng);
  out.weights.vi = VariationalParams::init(eff.hidden1, eff.hidden2, init_rng, eff.rho_init,
                                           eff.prior_var);
  out.weights.w2 = xavier_init(eff.hidden2, ds.num_classes, init_rng);

  const double klw = eff.effective_kl_weight(static_cast<std::size_t>(ds.num_nodes()));
  Trainer trainer(x, ds.labels, split.train_idx, eff, klw, out.weights);
  trainer.set_graph(ds.graph);

  auto log_epoch = [&](double loss) {
    if (!std::isfinite(loss))
      throw Error("train_model: non-finite loss at epoch " +
                  std::to_string(out.epoch_loss.size() + 1) + " (try a smaller lr)");
    out.epoch_loss.push_back(loss);
    const std::size_t e = out.epoch_loss.size();
    if (!split.val_idx.empty() &&
        (e % 10 == 0 || e == static_cast<std::size_t>(eff.total_epochs)))
      out.val_accuracy.push_back(
          accuracy(trainer.deterministic_probs(), ds.labels, split.val_idx));
  };

  for (int e = 0; e < eff.pretrain_epochs; ++e) log_epoch(trainer.run_epoch());
  out.observed_phase_labels = argmax_rows(trainer.deterministic_probs());

  const int sampled_epochs = eff.total_epochs - eff.pretrain_epochs;
  const int segments = eff.mc_v * eff.num_graphs;
  if (segments > 0) {
    const int base = sampled_epochs / segments;
    const int extra = sampled_epochs % segments;
    for (int v = 0; v < eff.mc_v; ++v) {
      const CopyVector xi = sampler.sample(
          ds.graph, derive_seed(eff.seed, Stream::kXi, {static_cast<std::uint64_t>(v)}));
      out.xi_draws.push_back(xi);
      for (int g = 0; g < eff.num_graphs; ++g) {
        RngStream graph_rng(derive_seed(
            eff.seed, Stream::kGraph,
            {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(g)}));
        const SparseGraph sampled = sample_graph(ds.graph, xi, graph_rng);
        trainer.set_graph(sampled);
        const int index = v * eff.num_graphs + g;
        const int epochs = base + (index < extra ? 1 : 0);
        for (int e = 0; e < epochs; ++e) log_epoch(trainer.run_epoch());
        out.snapshots.push_back({v, g, out.weights});
      }
    }
  }
  if (out.snapshots.empty()) out.snapshots.push_back({0, 0, out.weights});
  return out;
}

Matrix predict_mc(const TrainedModel& model, const Dataset& ds,
                  std::uint64_t prediction_seed) {
  const ModelConfig& eff = model.config;
  if (model.snapshots.empty()) throw Error("predict_mc: model has no snapshots");
  const Matrix x = eff.row_normalize_features ? row_normalize(ds.features) : ds.features;
  const NormalizedAdjacency a_obs = normalize_with_self_loops(ds.graph);
  const CompressedMatrix p1_obs = compress_rows(spmm(a_obs, x));

  Matrix acc = Matrix::Zero(x.rows(), model.snapshots[0].weights.w2.cols());
  std::int64_t passes = 0;
  for (std::size_t si = 0; si < model.snapshots.size(); ++si) {
    const Snapshot& snap = model.snapshots[si];
    const NormalizedAdjacency* a = &a_obs;
    const CompressedMatrix* p1 = &p1_obs;
    NormalizedAdjacency a_local;
    CompressedMatrix p1_local;
    if (eff.predict_on_sampled_graphs && !model.xi_draws.empty()) {
      RngStream graph_rng(derive_seed(prediction_seed, Stream::kPredict,
                                      {static_cast<std::uint64_t>(si), 0xF00D}));
      const SparseGraph sampled = sample_graph(
          ds.graph, model.xi_draws[static_cast<std::size_t>(snap.outer)], graph_rng);
      a_local = normalize_with_self_loops(sampled);
      p1_local = compress_rows(spmm(a_local, x));
      a = &a_local;
      p1 = &p1_local;
    }
    for (int s = 0; s < eff.mc_s; ++s) {
      RngStream vi_rng(derive_seed(
          prediction_seed, Stream::kPredict,
          {static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(s), 1}));
      RngStream drop_rng(derive_seed(
          prediction_seed, Stream::kPredict,
          {static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(s), 2}));
      const VariationalSample sample = eff.vi_frozen
                                           ? frozen_sample(snap.weights.vi)
                                           : sample_weights(snap.weights.vi, vi_rng);
      if (eff.mc_dropout && eff.dropout_keep < 1.0) {
        const Matrix mask =
            make_dropout_mask(x.rows(), eff.hidden2, eff.dropout_keep, drop_rng);
        acc += pass_probabilities(snap.weights, *a, *p1, sample, &mask);
      } else {
        acc += pass_probabilities(snap.weights, *a, *p1, sample, nullptr);
      }
      ++passes;
    }
  }
  return acc / static_cast<double>(passes);
}

Matrix predict_mc(const TrainedModel& model, const Dataset& ds) {
  return predict_mc(model, ds, model.config.seed);
}

double accuracy(const Matrix& probs, std::span<const int> labels, std::span<const int> idx) {
  if (idx.empty()) throw Error("accuracy: empty index set");
  if (labels.size() != static_cast<std::size_t>(probs.rows()))
    throw Error("accuracy: one label per row required");
  std::int64_t hits = 0;
  for (int row : idx) {
    if (row < 0 || row >= probs.rows()) throw Error("accuracy: index out of range");
    Eigen::Index best = 0;
    probs.row(row).maxCoeff(&best);
    if (static_cast<int>(best) == labels[static_cast<std::size_t>(row)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

namespace {

constexpr char kCheckpointMagic[5] = "BGCP";
constexpr std::uint32_t kCheckpointVersion = 1;

void write_matrix(io::BinaryWriter& w, const Matrix& m) {
  w.i64(m.rows());
  w.i64(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

Matrix read_matrix(io::BinaryReader& r) {
  const std::int64_t rows = r.i64();
  const std::int64_t cols = r.i64();
  if (rows < 0 || cols < 0) throw IoError("checkpoint: negative matrix shape");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.f64();
  return m;
}

void write_weights(io::BinaryWriter& w, const ModelWeights& mw) {
  write_matrix(w, mw.w0);
  write_matrix(w, mw.vi.mu_w);
  write_matrix(w, mw.vi.rho_w);
  write_matrix(w, mw.vi.mu_b);
  write_matrix(w, mw.vi.rho_b);
  w.f64(mw.vi.prior_var);
  write_matrix(w, mw.w2);
}

ModelWeights read_weights(io::BinaryReader& r) {
  ModelWeights mw;
  mw.w0 = read_matrix(r);
  mw.vi.mu_w = read_matrix(r);
  mw.vi.rho_w = read_matrix(r);
  mw.vi.mu_b = read_matrix(r);
  mw.vi.rho_b = read_matrix(r);
  mw.vi.prior_var = r.f64();
  mw.w2 = read_matrix(r);
  return mw;
}

void write_config(io::BinaryWriter& w, const ModelConfig& c) {
  w.i32(c.hidden1);
  w.i32(c.hidden2);
  w.f64(c.dropout_keep);
  w.f64(c.lr);
  w.i32(c.total_epochs);
  w.i32(c.pretrain_epochs);
  w.i32(c.mc_v);
  w.i32(c.num_graphs);
  w.i32(c.mc_s);
  w.i32(c.walk_steps);
  w.f64(c.weight_decay);
  w.f64(c.kl_weight);
  w.f64(c.prior_var);
  w.f64(c.rho_init);
  w.u8(c.vi_frozen ? 1 : 0);
  w.u8(c.row_normalize_features ? 1 : 0);
  w.u8(c.mc_dropout ? 1 : 0);
  w.u8(c.predict_on_sampled_graphs ? 1 : 0);
  w.u64(c.seed);
}

ModelConfig read_config(io::BinaryReader& r) {
  ModelConfig c;
  c.hidden1 = r.i32();
  c.hidden2 = r.i32();
  c.dropout_keep = r.f64();
  c.lr = r.f64();
  c.total_epochs = r.i32();
  c.pretrain_epochs = r.i32();
  c.mc_v = r.i32();
  c.num_graphs = r.i32();
  c.mc_s = r.i32();
  c.walk_steps = r.i32();
  c.weight_decay = r.f64();
  c.kl_weight = r.f64();
  c.prior_var = r.f64();
  c.rho_init = r.f64();
  c.vi_frozen = r.u8() != 0;
  c.row_normalize_features = r.u8() != 0;
  c.mc_dropout = r.u8() != 0;
  c.predict_on_sampled_graphs = r.u8() != 0;
  c.seed = r.u64();
  return c;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  io::BinaryWriter w;
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u8(model.variant == Variant::kGcn ? 0 : 1);
  write_config(w, model.config);
  write_weights(w, model.weights);
  w.u32(static_cast<std::uint32_t>(model.snapshots.size()));
  for (const Snapshot& s : model.snapshots) {
    w.i32(s.outer);
    w.i32(s.graph_index);
    write_weights(w, s.weights);
  }
  w.u32(static_cast<std::uint32_t>(model.xi_draws.size()));
  for (const CopyVector& cv : model.xi_draws) {
    w.u32(static_cast<std::uint32_t>(cv.xi.size()));
    for (NodeId id : cv.xi) w.i32(id);
  }
  w.u32(static_cast<std::uint32_t>(model.observed_phase_labels.size()));
  for (int y : model.observed_phase_labels) w.i32(y);
  w.u32(static_cast<std::uint32_t>(model.epoch_loss.size()));
  for (double v : model.epoch_loss) w.f64(v);
  w.u32(static_cast<std::uint32_t>(model.val_accuracy.size()));
  for (double v : model.val_accuracy) w.f64(v);
  w.save(path);
}

TrainedModel load_checkpoint(const std::string& path) {
  auto r = io::BinaryReader::from_file(path);
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  TrainedModel m;
  m.variant = r.u8() == 0 ? Variant::kGcn : Variant::kBgcnNrws;
  m.config = read_config(r);
  m.weights = read_weights(r);
  const std::uint32_t snaps = r.u32();
  m.snapshots.reserve(snaps);
  for (std::uint32_t i = 0; i < snaps; ++i) {
    Snapshot s;
    s.outer = r.i32();
    s.graph_index = r.i32();
    s.weights = read_weights(r);
    m.snapshots.push_back(std::move(s));
  }
  const std::uint32_t draws = r.u32();
  m.xi_draws.resize(draws);
  for (auto& cv : m.xi_draws) {
    cv.xi.resize(r.u32());
    for (auto& id : cv.xi) id = r.i32();
  }
  m.observed_phase_labels.resize(r.u32());
  for (auto& y : m.observed_phase_labels) y = r.i32();
  m.epoch_loss.resize(r.u32());
  for (auto& v : m.epoch_loss) v = r.f64();
  m.val_accuracy.resize(r.u32());
  for (auto& v : m.val_accuracy) v = r.f64();
  if (!r.at_end()) throw IoError(path + ": trailing bytes");
  return m;
}

}  // namespace bgcn
