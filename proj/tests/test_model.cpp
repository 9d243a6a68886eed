#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bgcn/model.hpp"
#include "oracles.hpp"

using namespace bgcn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Two path components with disjoint one-hot features: separable by features
// and by structure at once.
Dataset separable_dataset() {
  Dataset ds;
  ds.name = "separable";
  const NodeId n = 12;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i + 1 < 6; ++i) edges.emplace_back(i, i + 1);
  for (NodeId i = 6; i + 1 < 12; ++i) edges.emplace_back(i, i + 1);
  ds.graph = build_graph(edges, n);
  ds.features = Matrix::Zero(n, 2);
  ds.labels.resize(n);
  ds.node_ids.resize(n);
  for (NodeId i = 0; i < n; ++i) {
    const int cls = i < 6 ? 0 : 1;
    ds.labels[static_cast<std::size_t>(i)] = cls;
    ds.features(i, cls) = 1.0;
    ds.node_ids[static_cast<std::size_t>(i)] = "n" + std::to_string(i);
  }
  ds.num_classes = 2;
  return ds;
}

const Dataset& bench_dataset() {
  static const Dataset ds = make_synthetic_citation(60, 3, 8, 0.08, 0.01, 5);  // n=180
  return ds;
}

const Split& bench_split() {
  static const Split split = make_random_split(bench_dataset(), 5, 42, 30, 60);
  return split;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.hidden1 = 16;
  cfg.hidden2 = 8;
  cfg.total_epochs = 40;
  cfg.pretrain_epochs = 24;
  cfg.mc_v = 2;
  cfg.num_graphs = 2;
  cfg.mc_s = 3;
  cfg.walk_steps = 5;
  cfg.seed = 9;
  return cfg;
}

const TrainedModel& trained_bgcn() {
  static const TrainedModel model = train_model(bench_dataset(), bench_split(), small_config(),
                                                Variant::kBgcnNrws,
                                                NeighborhoodRandomWalkSampler(5));
  return model;
}

}  // namespace

TEST_CASE("config validation rejects each inconsistent setting") {
  ModelConfig cfg = small_config();
  cfg.validate();  // baseline is fine

  auto expect_reject = [](ModelConfig bad) { CHECK_THROWS_AS(bad.validate(), Error); };
  ModelConfig c = cfg;
  c.pretrain_epochs = c.total_epochs;
  expect_reject(c);
  c = cfg;
  c.mc_v = 0;
  expect_reject(c);
  c = cfg;
  c.num_graphs = 0;
  expect_reject(c);
  c = cfg;
  c.mc_s = 0;
  expect_reject(c);
  c = cfg;
  c.walk_steps = 0;
  expect_reject(c);
  c = cfg;
  c.dropout_keep = 0.0;
  expect_reject(c);
  c = cfg;
  c.lr = 0.0;
  expect_reject(c);
  c = cfg;
  c.hidden2 = 0;
  expect_reject(c);
  c = cfg;
  c.weight_decay = -1.0;
  expect_reject(c);
  c = cfg;
  c.prior_var = 0.0;
  expect_reject(c);
}

TEST_CASE("effective kl weight defaults to one over the node count") {
  ModelConfig cfg;
  CHECK(cfg.effective_kl_weight(2708) == doctest::Approx(1.0 / 2708).epsilon(1e-15));
  cfg.kl_weight = 0.25;
  CHECK(cfg.effective_kl_weight(2708) == 0.25);
  cfg.kl_weight = 0.0;
  CHECK(cfg.effective_kl_weight(10) == 0.0);
}

TEST_CASE("variant names round-trip") {
  CHECK(variant_from_string("gcn") == Variant::kGcn);
  CHECK(variant_from_string("bgcn-nrws") == Variant::kBgcnNrws);
  CHECK(to_string(Variant::kBgcnNrws) == "bgcn-nrws");
  CHECK_THROWS_AS(variant_from_string("mlp"), Error);
}

TEST_CASE("zero weights produce uniform class probabilities") {
  const Dataset ds = separable_dataset();
  ModelWeights w;
  w.w0 = Matrix::Zero(2, 4);
  w.vi.mu_w = Matrix::Zero(4, 3);
  w.vi.rho_w = Matrix::Constant(4, 3, -3.0);
  w.vi.mu_b = Matrix::Zero(1, 3);
  w.vi.rho_b = Matrix::Constant(1, 3, -3.0);
  w.w2 = Matrix::Zero(3, 2);
  const auto a = normalize_with_self_loops(ds.graph);
  const Matrix probs = forward_probabilities(w, a, ds.features);
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    for (Eigen::Index j = 0; j < probs.cols(); ++j)
      CHECK(probs(i, j) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("deterministic forward is bitwise repeatable") {
  const Dataset& ds = bench_dataset();
  const auto a = normalize_with_self_loops(ds.graph);
  RngStream rng(15);
  ModelWeights w;
  w.w0 = random_matrix(ds.num_features(), 6, rng);
  w.vi = VariationalParams::init(6, 4, rng);
  w.w2 = random_matrix(4, ds.num_classes, rng);
  const Matrix p1 = forward_probabilities(w, a, ds.features);
  const Matrix p2 = forward_probabilities(w, a, ds.features);
  CHECK(p1 == p2);
}

TEST_CASE("single-node forward reduces to a dense MLP") {
  const auto a = normalize_with_self_loops(build_graph({}, 1));
  RngStream rng(21);
  ModelWeights w;
  w.w0 = random_matrix(5, 6, rng);
  w.vi = VariationalParams::init(6, 4, rng);
  w.vi.mu_b = random_matrix(1, 4, rng);
  w.w2 = random_matrix(4, 3, rng);
  const Matrix x = random_matrix(1, 5, rng);

  const Matrix h1 = (x * w.w0).cwiseMax(0.0);
  Matrix z2 = h1 * w.vi.mu_w;
  z2.rowwise() += w.vi.mu_b.row(0);
  const Matrix logits = z2.cwiseMax(0.0) * w.w2;
  const Matrix expect = softmax_rows(logits);

  const Matrix probs = forward_probabilities(w, a, x);
  CHECK((probs - expect).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("model_loss gradients match finite differences for every parameter") {
  RngStream rng(23);
  const SparseGraph g = oracle::random_connected_graph(6, 0.4, rng);
  const auto a = normalize_with_self_loops(g);
  const Matrix x = random_matrix(6, 4, rng);
  const CompressedMatrix p1 = compress_rows(spmm(a, x));
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  const std::vector<int> train = {0, 2, 3, 5};

  for (int trial = 0; trial < 10; ++trial) {
    ModelWeights w;
    w.w0 = random_matrix(4, 5, rng);
    w.vi = VariationalParams::init(5, 3, rng);
    w.vi.rho_w = random_matrix(5, 3, rng) * 0.3 - Matrix::Constant(5, 3, 1.5);
    w.vi.rho_b = random_matrix(1, 3, rng) * 0.3 - Matrix::Constant(1, 3, 1.5);
    w.w2 = random_matrix(3, 3, rng);
    const Matrix eps_w = random_matrix(5, 3, rng);
    const Matrix eps_b = random_matrix(1, 3, rng);
    RngStream mask_rng(static_cast<std::uint64_t>(100 + trial));
    const Matrix mask = make_dropout_mask(6, 3, 0.7, mask_rng);

    TrainingOptions opt;
    opt.kl_weight = trial % 2 == 0 ? 0.3 : 0.0;
    opt.weight_decay = 2e-3;
    opt.vi_frozen = trial % 3 == 0;

    const Matrix ew = opt.vi_frozen ? Matrix::Zero(5, 3) : eps_w;
    const Matrix eb = opt.vi_frozen ? Matrix::Zero(1, 3) : eps_b;

    ModelGrads grads;
    model_loss(w, a, p1, labels, train, opt, ew, eb, mask, &grads);
    auto loss = [&] {
      return model_loss(w, a, p1, labels, train, opt, ew, eb, mask, nullptr).total;
    };
    CHECK(oracle::rel_error(grads.w0, oracle::numeric_gradient(loss, w.w0)) < 1e-5);
    CHECK(oracle::rel_error(grads.mu_w, oracle::numeric_gradient(loss, w.vi.mu_w)) < 1e-5);
    CHECK(oracle::rel_error(grads.mu_b, oracle::numeric_gradient(loss, w.vi.mu_b)) < 1e-5);
    CHECK(oracle::rel_error(grads.w2, oracle::numeric_gradient(loss, w.w2)) < 1e-5);
    if (!opt.vi_frozen) {
      CHECK(oracle::rel_error(grads.rho_w, oracle::numeric_gradient(loss, w.vi.rho_w)) < 1e-5);
      CHECK(oracle::rel_error(grads.rho_b, oracle::numeric_gradient(loss, w.vi.rho_b)) < 1e-5);
    }
  }
}

TEST_CASE("model_loss reports the pieces it combines") {
  RngStream rng(27);
  const auto a = normalize_with_self_loops(oracle::path_graph(3));
  const Matrix x = random_matrix(3, 2, rng);
  const CompressedMatrix p1 = compress_rows(spmm(a, x));
  const std::vector<int> labels = {0, 1, 0};
  const std::vector<int> train = {0, 1, 2};
  ModelWeights w;
  w.w0 = random_matrix(2, 4, rng);
  w.vi = VariationalParams::init(4, 3, rng);
  w.w2 = random_matrix(3, 2, rng);
  const Matrix eps_w = random_matrix(4, 3, rng);
  const Matrix eps_b = random_matrix(1, 3, rng);
  const Matrix mask = Matrix::Ones(3, 3);

  TrainingOptions opt;
  opt.kl_weight = 0.5;
  const LossReport r = model_loss(w, a, p1, labels, train, opt, eps_w, eps_b, mask, nullptr);
  CHECK(r.total == doctest::Approx(0.5 * r.kl + r.nll).epsilon(1e-14));
  CHECK(r.nll > 0.0);

  TrainingOptions frozen;
  frozen.vi_frozen = true;
  const LossReport rf = model_loss(w, a, p1, labels, train, frozen, Matrix::Zero(4, 3),
                                   Matrix::Zero(1, 3), mask, nullptr);
  CHECK(rf.kl == 0.0);
  CHECK(rf.total == rf.nll);
}

TEST_CASE("training is deterministic per seed") {
  const Dataset& ds = bench_dataset();
  const Split& split = bench_split();
  ModelConfig cfg = small_config();
  cfg.total_epochs = 12;
  cfg.pretrain_epochs = 8;
  const TrainedModel a =
      train_model(ds, split, cfg, Variant::kBgcnNrws, NeighborhoodRandomWalkSampler(5));
  const TrainedModel b =
      train_model(ds, split, cfg, Variant::kBgcnNrws, NeighborhoodRandomWalkSampler(5));
  CHECK(a.weights.w0 == b.weights.w0);
  CHECK(a.weights.vi.mu_w == b.weights.vi.mu_w);
  CHECK(a.weights.vi.rho_w == b.weights.vi.rho_w);
  CHECK(a.weights.w2 == b.weights.w2);
  CHECK(a.epoch_loss == b.epoch_loss);
  REQUIRE(a.xi_draws.size() == b.xi_draws.size());
  for (std::size_t i = 0; i < a.xi_draws.size(); ++i) CHECK(a.xi_draws[i].xi == b.xi_draws[i].xi);
  CHECK(predict_mc(a, ds) == predict_mc(b, ds));

  ModelConfig other = cfg;
  other.seed = 10;
  const TrainedModel c =
      train_model(ds, split, other, Variant::kBgcnNrws, NeighborhoodRandomWalkSampler(5));
  CHECK(a.weights.w0 != c.weights.w0);
}

TEST_CASE("a separable corpus is learned perfectly") {
  const Dataset ds = separable_dataset();
  Split split;
  split.train_idx = {0, 1, 6, 7};
  split.val_idx = {2, 8};
  split.test_idx = {3, 4, 5, 9, 10, 11};
  split.labels_per_class = 2;
  ModelConfig cfg;
  cfg.hidden1 = 8;
  cfg.hidden2 = 4;
  cfg.total_epochs = 80;
  cfg.pretrain_epochs = 60;
  cfg.seed = 1;
  const TrainedModel model = train_model(ds, split, cfg, Variant::kGcn, IdentitySampler());
  const Matrix probs = predict_mc(model, ds);
  CHECK(accuracy(probs, ds.labels, split.train_idx) == 1.0);
  CHECK(accuracy(probs, ds.labels, split.test_idx) == 1.0);
  REQUIRE(model.observed_phase_labels.size() == 12);
  for (int y : model.observed_phase_labels) {
    CHECK(y >= 0);
    CHECK(y < 2);
  }
}

TEST_CASE("training loss trends downward (10-epoch smoothed)") {
  const TrainedModel& model = trained_bgcn();
  REQUIRE(model.epoch_loss.size() == 40);
  const auto mean10 = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 10; ++i) s += model.epoch_loss[i];
    return s / 10.0;
  };
  CHECK(mean10(model.epoch_loss.size() - 10) < mean10(0));
  // validation accuracy was logged but computed on held-out rows only
  CHECK(!model.val_accuracy.empty());
  for (double v : model.val_accuracy) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ensemble bookkeeping matches the configuration") {
  const TrainedModel& model = trained_bgcn();
  CHECK(model.snapshots.size() == 4);  // mc_v * num_graphs
  CHECK(model.xi_draws.size() == 2);
  CHECK(model.snapshots[0].outer == 0);
  CHECK(model.snapshots[3].outer == 1);
  CHECK(model.snapshots[3].graph_index == 1);
  for (const auto& cv : model.xi_draws) {
    REQUIRE(cv.xi.size() == 180);
    for (NodeId v : cv.xi) {
      CHECK(v >= 0);
      CHECK(v < 180);
    }
  }
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const Dataset& ds = bench_dataset();
  ModelConfig cfg = small_config();
  cfg.lr = 1e200;  // guaranteed overflow within a few steps
  cfg.total_epochs = 6;
  cfg.pretrain_epochs = 5;
  CHECK_THROWS_WITH_AS(
      train_model(ds, bench_split(), cfg, Variant::kGcn, IdentitySampler()),
      doctest::Contains("non-finite"), Error);
}

TEST_CASE("predictions are row-stochastic") {
  const Matrix probs = predict_mc(trained_bgcn(), bench_dataset());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    CHECK(std::abs(probs.row(i).sum() - 1.0) <= 1e-9);
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      CHECK(probs(i, j) >= 0.0);
      CHECK(probs(i, j) <= 1.0);
    }
  }
}

TEST_CASE("prediction is repeatable and seed-sensitive") {
  const TrainedModel& model = trained_bgcn();
  const Dataset& ds = bench_dataset();
  CHECK(predict_mc(model, ds) == predict_mc(model, ds));
  CHECK(predict_mc(model, ds, 1) == predict_mc(model, ds, 1));
  CHECK(predict_mc(model, ds, 1) != predict_mc(model, ds, 2));
}

TEST_CASE("degenerate monte carlo equals one deterministic pass") {
  const Dataset& ds = bench_dataset();
  ModelConfig cfg = small_config();
  cfg.vi_frozen = true;
  cfg.mc_dropout = false;
  cfg.mc_v = 1;
  cfg.num_graphs = 1;
  cfg.mc_s = 1;
  const TrainedModel model =
      train_model(ds, bench_split(), cfg, Variant::kBgcnNrws, IdentitySampler());
  const Matrix mc = predict_mc(model, ds);
  const auto a = normalize_with_self_loops(ds.graph);
  const Matrix x = row_normalize(ds.features);
  const Matrix direct = forward_probabilities(model.weights, a, x);
  CHECK(mc == direct);  // bitwise: same pass, no averaging
}

TEST_CASE("identity-sampled training with aligned streams equals the plain baseline bitwise") {
  const Dataset& ds = bench_dataset();
  const Split& split = bench_split();
  ModelConfig cfg = small_config();
  cfg.vi_frozen = true;  // aligns the noise streams across variants
  cfg.mc_dropout = false;
  cfg.mc_v = 1;
  cfg.num_graphs = 1;
  cfg.mc_s = 1;
  cfg.total_epochs = 30;
  cfg.pretrain_epochs = 20;

  const TrainedModel continued =
      train_model(ds, split, cfg, Variant::kBgcnNrws, IdentitySampler());
  const TrainedModel plain = train_model(ds, split, cfg, Variant::kGcn, IdentitySampler());
  CHECK(continued.weights.w0 == plain.weights.w0);
  CHECK(continued.weights.vi.mu_w == plain.weights.vi.mu_w);
  CHECK(continued.weights.w2 == plain.weights.w2);
  CHECK(predict_mc(continued, ds) == predict_mc(plain, ds));

  // The all-isolated observed graph forces the walk sampler itself to the
  // identity assignment, giving the same reduction without IdentitySampler.
  Dataset isolated = ds;
  isolated.graph = build_graph({}, ds.num_nodes());
  const TrainedModel walkers = train_model(isolated, split, cfg, Variant::kBgcnNrws,
                                           NeighborhoodRandomWalkSampler(cfg.walk_steps));
  const TrainedModel walkers_plain =
      train_model(isolated, split, cfg, Variant::kGcn, IdentitySampler());
  REQUIRE(walkers.xi_draws.size() == 1);
  for (NodeId j = 0; j < isolated.num_nodes(); ++j)
    CHECK(walkers.xi_draws[0].xi[static_cast<std::size_t>(j)] == j);
  CHECK(predict_mc(walkers, isolated) == predict_mc(walkers_plain, isolated));
}

TEST_CASE("prediction variance shrinks as weight draws increase") {
  const TrainedModel& base = trained_bgcn();
  const Dataset& ds = bench_dataset();
  const int runs = 25;
  const Eigen::Index nodes = 100;

  auto mean_variance = [&](int mc_s) {
    TrainedModel m = base;
    m.config.mc_s = mc_s;
    std::vector<Matrix> outs;
    outs.reserve(runs);
    for (int r = 0; r < runs; ++r)
      outs.push_back(predict_mc(m, ds, 1000 + static_cast<std::uint64_t>(r)));
    double acc = 0.0;
    std::int64_t cells = 0;
    for (Eigen::Index i = 0; i < nodes; ++i) {
      for (Eigen::Index j = 0; j < outs[0].cols(); ++j) {
        double mean = 0.0;
        for (const Matrix& o : outs) mean += o(i, j);
        mean /= runs;
        double var = 0.0;
        for (const Matrix& o : outs) var += (o(i, j) - mean) * (o(i, j) - mean);
        acc += var / (runs - 1);
        ++cells;
      }
    }
    return acc / static_cast<double>(cells);
  };

  const double var_1 = mean_variance(1);
  const double var_32 = mean_variance(32);
  CHECK(var_32 < var_1);
  CHECK(var_32 < 0.5 * var_1);  // ~32x fewer-sample noise, far below half
}

TEST_CASE("accuracy scoring and tie-breaking") {
  Matrix probs(4, 3);
  probs << 0.7, 0.2, 0.1,
           0.1, 0.8, 0.1,
           1.0 / 3, 1.0 / 3, 1.0 / 3,
           0.2, 0.3, 0.5;
  const std::vector<int> labels = {0, 1, 0, 1};
  const std::vector<int> all = {0, 1, 2, 3};
  // rows 0,1 correct; row 2 ties -> class 0 (lowest index) -> correct;
  // row 3 argmax 2 != 1 -> wrong.
  CHECK(accuracy(probs, labels, all) == 0.75);
  CHECK(accuracy(probs, labels, std::vector<int>{0, 1}) == 1.0);
  CHECK(accuracy(probs, labels, std::vector<int>{3}) == 0.0);
  const std::vector<int> tie_labels = {0, 0, 0, 0};
  CHECK(accuracy(Matrix::Constant(4, 3, 1.0 / 3), tie_labels, all) == 1.0);
  CHECK_THROWS_AS(accuracy(probs, labels, std::vector<int>{}), Error);
  CHECK_THROWS_AS(accuracy(probs, labels, std::vector<int>{9}), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const TrainedModel& model = trained_bgcn();
  const std::string path =
      (std::filesystem::temp_directory_path() / "bgcn_ckpt_test.bin").string();
  save_checkpoint(model, path);
  const TrainedModel back = load_checkpoint(path);
  CHECK(back.variant == model.variant);
  CHECK(back.config.seed == model.config.seed);
  CHECK(back.config.mc_s == model.config.mc_s);
  CHECK(back.config.kl_weight == model.config.kl_weight);
  CHECK(back.weights.w0 == model.weights.w0);
  CHECK(back.weights.vi.mu_w == model.weights.vi.mu_w);
  CHECK(back.weights.vi.rho_w == model.weights.vi.rho_w);
  CHECK(back.weights.vi.prior_var == model.weights.vi.prior_var);
  CHECK(back.weights.w2 == model.weights.w2);
  REQUIRE(back.snapshots.size() == model.snapshots.size());
  for (std::size_t i = 0; i < back.snapshots.size(); ++i) {
    CHECK(back.snapshots[i].outer == model.snapshots[i].outer);
    CHECK(back.snapshots[i].weights.w0 == model.snapshots[i].weights.w0);
  }
  REQUIRE(back.xi_draws.size() == model.xi_draws.size());
  for (std::size_t i = 0; i < back.xi_draws.size(); ++i)
    CHECK(back.xi_draws[i].xi == model.xi_draws[i].xi);
  CHECK(back.observed_phase_labels == model.observed_phase_labels);
  CHECK(back.epoch_loss == model.epoch_loss);
  CHECK(back.val_accuracy == model.val_accuracy);
  // The restored model predicts identically.
  CHECK(predict_mc(back, bench_dataset()) == predict_mc(model, bench_dataset()));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects damage") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "bgcn_ckpt_damage.bin").string();
  save_checkpoint(trained_bgcn(), path);
  const std::string original = oracle::read_file(path);

  SUBCASE("payload corruption") {
    std::string bad = original;
    bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x77);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("truncation") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(original.data(), static_cast<std::streamsize>(original.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("wrong magic") {
    std::string bad = original;
    bad[0] = 'X';
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(path + ".gone"), IoError);
  }
  std::remove(path.c_str());
}
