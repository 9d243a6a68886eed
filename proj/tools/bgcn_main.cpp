#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bgcn/bench.hpp"
#include "bgcn/dataset.hpp"
#include "bgcn/model.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void add_model_flags(CLI::App* cmd, bgcn::ModelConfig& cfg) {
  cmd->add_option("--epochs", cfg.total_epochs, "total training epochs");
  cmd->add_option("--pretrain-epochs", cfg.pretrain_epochs,
                  "epochs on the observed graph before graph sampling");
  cmd->add_option("--lr", cfg.lr, "Adam learning rate");
  cmd->add_option("--dropout-keep", cfg.dropout_keep, "dropout keep probability");
  cmd->add_option("--hidden1", cfg.hidden1, "first hidden layer width");
  cmd->add_option("--hidden2", cfg.hidden2, "second hidden layer width");
  cmd->add_option("--walk-steps", cfg.walk_steps, "random-walk steps per copy draw");
  cmd->add_option("--mc-v", cfg.mc_v, "outer iterations (copy vectors)");
  cmd->add_option("--mc-graphs", cfg.num_graphs, "sampled graphs per outer iteration");
  cmd->add_option("--mc-s", cfg.mc_s, "prediction samples per snapshot");
  cmd->add_option("--kl-weight", cfg.kl_weight,
                  "KL term weight; negative = 1/|nodes| (default)");
  cmd->add_option("--weight-decay", cfg.weight_decay, "L2 penalty on the first layer");
  cmd->add_flag("--vi-frozen", cfg.vi_frozen, "pin variational weights to their means");
  cmd->add_flag("--row-normalize,!--no-row-normalize", cfg.row_normalize_features,
                "feature row normalization (default on)");
  cmd->add_flag("--predict-on-sampled-graphs", cfg.predict_on_sampled_graphs,
                "average predictions over re-sampled graphs instead of the observed one");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw bgcn::IoError("cannot open for writing: " + path);
  return out;
}

int cmd_convert(const std::string& format, const std::string& content,
                const std::string& nodes, const std::string& cites, std::string name,
                const std::string& out_path) {
  bgcn::LoadStats stats;
  bgcn::Dataset ds;
  if (format == "content") {
    if (content.empty() || cites.empty())
      throw CLI::ValidationError("--content and --cites are required for --format content");
    if (name.empty()) name = "dataset";
    ds = bgcn::load_content_cites(content, cites, name, &stats);
  } else if (format == "tab") {
    if (nodes.empty() || cites.empty())
      throw CLI::ValidationError("--nodes and --cites are required for --format tab");
    if (name.empty()) name = "dataset";
    ds = bgcn::load_tab_attributes(nodes, cites, name, &stats);
  } else {
    throw CLI::ValidationError("--format must be content or tab");
  }
  bgcn::save_canonical(ds, out_path);
  nlohmann::json j;
  j["name"] = ds.name;
  j["nodes"] = ds.num_nodes();
  j["features"] = ds.num_features();
  j["classes"] = ds.num_classes;
  j["undirected_edges"] = ds.graph.num_undirected_edges();
  j["skipped_edges"] = stats.skipped_edges;
  j["duplicate_edges"] = stats.duplicate_edges;
  j["out"] = out_path;
  std::cout << j.dump() << '\n';
  return kExitOk;
}

int cmd_train(const std::string& dataset, const std::string& variant_name, int labels_per_class,
              std::uint64_t seed, bgcn::ModelConfig cfg, const std::string& out_path,
              const std::string& checkpoint_path) {
  const bgcn::Dataset ds = bgcn::open_dataset(dataset);
  const bgcn::Variant variant = bgcn::variant_from_string(variant_name);
  const bgcn::TrialResult r = bgcn::run_trial(ds, variant, labels_per_class, 0, seed, cfg);
  if (!r.ok) throw bgcn::Error("trial failed: " + r.error);
  if (!checkpoint_path.empty()) {
    // Re-train to capture the model itself; run_trial reports metrics only.
    cfg.seed = seed;
    const auto split = bgcn::trial_split(ds, labels_per_class, seed);
    bgcn::NeighborhoodRandomWalkSampler sampler(cfg.walk_steps);
    const auto model = bgcn::train_model(ds, split, cfg, variant, sampler);
    bgcn::save_checkpoint(model, checkpoint_path);
  }
  const std::string line = bgcn::to_json_line(r);
  if (out_path.empty()) {
    std::cout << line << '\n';
  } else {
    auto out = open_out(out_path);
    out << line << '\n';
  }
  return kExitOk;
}

int cmd_bench(const std::string& dataset, std::vector<std::string> variant_names,
              std::vector<int> labels_per_class, int trials, std::uint64_t seed, int jobs,
              bool strict, const bgcn::ModelConfig& cfg, const std::string& out_path,
              const std::string& trial_log_path) {
  const bgcn::Dataset ds = bgcn::open_dataset(dataset);
  if (variant_names.empty()) variant_names = {"gcn", "bgcn-nrws"};
  if (labels_per_class.empty()) labels_per_class = {20};
  std::vector<bgcn::Variant> variants;
  for (const auto& v : variant_names) variants.push_back(bgcn::variant_from_string(v));
  if (strict) jobs = 1;

  std::ofstream trial_log;
  std::ostream* progress = nullptr;
  if (!trial_log_path.empty()) {
    trial_log = open_out(trial_log_path);
    progress = &trial_log;
  }
  const bgcn::BenchmarkSummary summary =
      bgcn::run_bench(ds, variants, labels_per_class, trials, seed, jobs, cfg, progress);
  std::cerr << bgcn::emit_table(summary);
  std::size_t failed = 0;
  for (const auto& r : summary.trial_results)
    if (!r.ok) {
      ++failed;
      std::cerr << "trial failed: " << bgcn::to_json_line(r) << '\n';
    }
  if (out_path.empty()) {
    std::cout << bgcn::to_json(summary) << '\n';
  } else {
    auto out = open_out(out_path);
    out << bgcn::to_json(summary) << '\n';
  }
  // Failed trials are excluded from the cell statistics; too many of them
  // make the summary meaningless, so flag the run as a failure.
  if (failed * 10 > summary.trial_results.size()) {
    std::cerr << failed << " of " << summary.trial_results.size()
              << " trials failed (more than 10%)\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolutional node classification with Bayesian graph inference"};
  app.require_subcommand(1);

  // convert
  auto* convert = app.add_subcommand("convert", "convert raw corpus files to the binary format");
  std::string cv_format = "content", cv_content, cv_nodes, cv_cites, cv_name, cv_out;
  convert->add_option("--format", cv_format, "content | tab")->capture_default_str();
  convert->add_option("--content", cv_content, "<id> <features...> <class> file");
  convert->add_option("--nodes", cv_nodes, "tab-attribute node file");
  convert->add_option("--cites", cv_cites, "citation file");
  convert->add_option("--name", cv_name, "dataset name to store");
  convert->add_option("--out", cv_out, "output file")->required();

  // train
  auto* train = app.add_subcommand("train", "train one model and report its accuracy");
  std::string tr_dataset, tr_variant = "bgcn-nrws", tr_out, tr_checkpoint;
  int tr_lpc = 20;
  std::uint64_t tr_seed = 42;
  bgcn::ModelConfig tr_cfg;
  train->add_option("--dataset", tr_dataset, "dataset name or path to a converted file")
      ->required();
  train->add_option("--variant", tr_variant, "gcn | bgcn-nrws")->capture_default_str();
  train->add_option("--labels-per-class", tr_lpc, "training labels per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--seed", tr_seed, "seed for split and training")->capture_default_str();
  train->add_option("--out", tr_out, "write the result JSON here instead of stdout");
  train->add_option("--checkpoint", tr_checkpoint, "save the trained model here");
  add_model_flags(train, tr_cfg);

  // bench
  auto* bench = app.add_subcommand("bench", "run repeated trials and summarize accuracies");
  std::string be_dataset, be_out, be_trial_log;
  std::vector<std::string> be_variants;
  std::vector<int> be_lpc;
  int be_trials = 10, be_jobs = 1;
  std::uint64_t be_seed = 42;
  bool be_strict = false;
  bgcn::ModelConfig be_cfg;
  bench->add_option("--dataset", be_dataset, "dataset name or path to a converted file")
      ->required();
  bench->add_option("--variant", be_variants, "variant(s) to run (default: gcn bgcn-nrws)");
  bench->add_option("--labels-per-class", be_lpc, "labels-per-class cell(s) (default: 20)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--trials", be_trials, "trials per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--seed", be_seed, "base seed")->capture_default_str();
  bench->add_option("--jobs", be_jobs, "worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_flag("--strict-determinism", be_strict,
                  "force single-threaded execution (results are seed-stable either way)");
  bench->add_option("--out", be_out, "write the summary JSON here instead of stdout");
  bench->add_option("--trial-log", be_trial_log, "append one JSON line per finished trial");
  add_model_flags(bench, be_cfg);

  try {
    app.parse(argc, argv);
    if (convert->parsed())
      return cmd_convert(cv_format, cv_content, cv_nodes, cv_cites, cv_name, cv_out);
    if (train->parsed())
      return cmd_train(tr_dataset, tr_variant, tr_lpc, tr_seed, tr_cfg, tr_out, tr_checkpoint);
    if (bench->parsed())
      return cmd_bench(be_dataset, be_variants, be_lpc, be_trials, be_seed, be_jobs, be_strict,
                       be_cfg, be_out, be_trial_log);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const bgcn::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
