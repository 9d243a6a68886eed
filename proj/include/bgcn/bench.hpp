#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bgcn/dataset.hpp"
#include "bgcn/model.hpp"

namespace bgcn {

// One end-to-end training + evaluation run.
struct TrialResult {
  std::string dataset;
  std::string variant;
  int labels_per_class = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  double wall_time_s = 0.0;
  bool ok = true;
  std::string error;
};

struct CellSummary {
  std::string variant;
  int labels_per_class = 0;
  int trials = 0;
  double mean_accuracy = 0.0;
  double stddev_accuracy = 0.0;  // sample standard deviation (n - 1)
  std::vector<double> accuracies;  // per trial, in trial order
};

struct BenchmarkSummary {
  std::string dataset;
  int trials = 0;
  std::uint64_t base_seed = 0;
  int jobs = 1;
  std::vector<CellSummary> cells;
  std::vector<TrialResult> trial_results;  // all trials, deterministic order
};

double mean_of(std::span<const double> xs);
double sample_stddev_of(std::span<const double> xs);

// Trial t runs with seed base_seed + t, independent of variant and
// labels-per-class, so variants are compared on identical splits.
std::uint64_t trial_seed(std::uint64_t base_seed, int trial);

// Split used by trials: 500 validation / 1000 test nodes when the corpus is
// large enough, otherwise the remaining pool is divided one third / two
// thirds so the bench also runs on toy corpora.
Split trial_split(const Dataset& ds, int labels_per_class, std::uint64_t seed);

TrialResult run_trial(const Dataset& ds, Variant variant, int labels_per_class, int trial,
                      std::uint64_t seed, const ModelConfig& base_cfg);

// Runs trials for every (variant, labels_per_class) cell. jobs > 1 runs
// trials on a thread pool; results are identical to jobs == 1 except for
// wall_time_s, because every trial's randomness is derived from its own seed.
BenchmarkSummary run_bench(const Dataset& ds, std::span<const Variant> variants,
                           std::span<const int> labels_per_class, int trials,
                           std::uint64_t base_seed, int jobs, const ModelConfig& base_cfg,
                           std::ostream* progress = nullptr);

// "79.6 ± 1.8": accuracies scaled by 100, one decimal, ties away from zero.
std::string format_mean_std(double mean, double stddev);
std::string format_percent(double value);

// Human-readable table, one row per variant, one column per labels-per-class
// count; cells are "mean ± std" percentages, "—" where a cell has no
// completed trials.
std::string emit_table(const BenchmarkSummary& summary);

std::string to_json_line(const TrialResult& r);
std::string to_json(const BenchmarkSummary& s, bool pretty = true);

}  // namespace bgcn
