#include "bgcn/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace bgcn {

double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw Error("mean_of: empty sample");
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_stddev_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return base_seed + static_cast<std::uint64_t>(trial);
}

Split trial_split(const Dataset& ds, int labels_per_class, std::uint64_t seed) {
  const NodeId n = ds.num_nodes();
  const int reserve = labels_per_class * ds.num_classes;
  int val_size = 500, test_size = 1000;
  if (n - reserve < val_size + test_size) {
    const int pool = std::max(2, static_cast<int>(n) - reserve);
    val_size = pool / 3;
    test_size = pool - val_size;
  }
  return make_random_split(ds, labels_per_class, seed, val_size, test_size);
}

TrialResult run_trial(const Dataset& ds, Variant variant, int labels_per_class, int trial,
                      std::uint64_t seed, const ModelConfig& base_cfg) {
  TrialResult r;
  r.dataset = ds.name;
  r.variant = to_string(variant);
  r.labels_per_class = labels_per_class;
  r.trial = trial;
  r.seed = seed;
  const auto started = std::chrono::steady_clock::now();
  try {
    const Split split = trial_split(ds, labels_per_class, seed);
    ModelConfig cfg = base_cfg;
    cfg.seed = seed;
    NeighborhoodRandomWalkSampler sampler(cfg.walk_steps);
    const TrainedModel model = train_model(ds, split, cfg, variant, sampler);
    const Matrix probs = predict_mc(model, ds);
    r.test_accuracy = accuracy(probs, ds.labels, split.test_idx);
    r.val_accuracy = accuracy(probs, ds.labels, split.val_idx);
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

BenchmarkSummary run_bench(const Dataset& ds, std::span<const Variant> variants,
                           std::span<const int> labels_per_class, int trials,
                           std::uint64_t base_seed, int jobs, const ModelConfig& base_cfg,
                           std::ostream* progress) {
  if (trials <= 0) throw Error("run_bench: trials must be positive");
  if (variants.empty() || labels_per_class.empty())
    throw Error("run_bench: need at least one variant and one labels_per_class");
  if (jobs <= 0) throw Error("run_bench: jobs must be positive");

  struct Task {
    Variant variant;
    int lpc;
    int trial;
  };
  std::vector<Task> tasks;
  for (int lpc : labels_per_class)
    for (Variant v : variants)
      for (int t = 0; t < trials; ++t) tasks.push_back({v, lpc, t});

  std::vector<TrialResult> results(tasks.size());
  std::mutex progress_mutex;
  auto run_task = [&](std::size_t i) {
    const Task& task = tasks[i];
    results[i] = run_trial(ds, task.variant, task.lpc, task.trial,
                           trial_seed(base_seed, task.trial), base_cfg);
    if (progress) {
      std::lock_guard lock(progress_mutex);
      *progress << to_json_line(results[i]) << '\n' << std::flush;
    }
  };

  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
          run_task(i);
      });
    for (auto& th : pool) th.join();
  }

  BenchmarkSummary summary;
  summary.dataset = ds.name;
  summary.trials = trials;
  summary.base_seed = base_seed;
  summary.jobs = jobs;
  summary.trial_results = results;
  for (int lpc : labels_per_class) {
    for (Variant v : variants) {
      CellSummary cell;
      cell.variant = to_string(v);
      cell.labels_per_class = lpc;
      for (const TrialResult& r : results)
        if (r.labels_per_class == lpc && r.variant == cell.variant && r.ok)
          cell.accuracies.push_back(r.test_accuracy);
      cell.trials = static_cast<int>(cell.accuracies.size());
      if (!cell.accuracies.empty()) {
        cell.mean_accuracy = mean_of(cell.accuracies);
        cell.stddev_accuracy = sample_stddev_of(cell.accuracies);
      }
      summary.cells.push_back(std::move(cell));
    }
  }
  return summary;
}

std::string format_percent(double value) {
  // One decimal of the value scaled by 100, ties rounded away from zero; the
  // small nudge keeps values like 0.7955 (stored as 0.79549999...) on the
  // intended side.
  const double scaled = value * 1000.0;
  const double rounded = std::floor(std::abs(scaled) + 0.5 + 1e-9) / 10.0;
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << (scaled < 0 ? -rounded : rounded);
  return out.str();
}

std::string format_mean_std(double mean, double stddev) {
  return format_percent(mean) + " ± " + format_percent(stddev);
}

std::string emit_table(const BenchmarkSummary& summary) {
  std::vector<std::string> variants;
  std::vector<int> lpcs;
  for (const CellSummary& c : summary.cells) {
    if (std::find(variants.begin(), variants.end(), c.variant) == variants.end())
      variants.push_back(c.variant);
    if (std::find(lpcs.begin(), lpcs.end(), c.labels_per_class) == lpcs.end())
      lpcs.push_back(c.labels_per_class);
  }
  auto cell_text = [&](int lpc, const std::string& variant) -> std::string {
    for (const CellSummary& c : summary.cells)
      if (c.labels_per_class == lpc && c.variant == variant)
        return c.trials == 0 ? "—" : format_mean_std(c.mean_accuracy, c.stddev_accuracy);
    return "—";
  };
  // setw counts bytes, so multibyte cells (±, —) need explicit padding.
  auto pad = [](const std::string& s, std::size_t width, std::size_t glyphs) {
    return s + std::string(glyphs < width ? width - glyphs : 1, ' ');
  };
  auto glyph_count = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s)
      if ((c & 0xC0) != 0x80) ++n;
    return n;
  };
  constexpr std::size_t kCol = 14;
  std::ostringstream out;
  out << "dataset: " << summary.dataset << "  (trials per cell: " << summary.trials
      << ", seed: " << summary.base_seed << ")\n";
  out << pad("variant", kCol, 7);
  for (int lpc : lpcs) {
    const std::string head = std::to_string(lpc) + " labels";
    out << pad(head, kCol, head.size());
  }
  out << '\n';
  for (const auto& v : variants) {
    out << pad(v, kCol, v.size());
    for (int lpc : lpcs) {
      const std::string cell = cell_text(lpc, v);
      out << pad(cell, kCol, glyph_count(cell));
    }
    out << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json trial_json(const TrialResult& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["variant"] = r.variant;
  j["labels_per_class"] = r.labels_per_class;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["test_accuracy"] = r.test_accuracy;
  j["val_accuracy"] = r.val_accuracy;
  j["wall_time_s"] = r.wall_time_s;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  return j;
}

}  // namespace

std::string to_json_line(const TrialResult& r) { return trial_json(r).dump(); }

std::string to_json(const BenchmarkSummary& s, bool pretty) {
  nlohmann::json j;
  j["dataset"] = s.dataset;
  j["trials"] = s.trials;
  j["seed"] = s.base_seed;
  j["jobs"] = s.jobs;
  j["cells"] = nlohmann::json::array();
  for (const CellSummary& c : s.cells) {
    nlohmann::json jc;
    jc["variant"] = c.variant;
    jc["labels_per_class"] = c.labels_per_class;
    jc["trials"] = c.trials;
    jc["mean_accuracy"] = c.mean_accuracy;
    jc["stddev_accuracy"] = c.stddev_accuracy;
    jc["display"] = format_mean_std(c.mean_accuracy, c.stddev_accuracy);
    jc["accuracies"] = c.accuracies;
    j["cells"].push_back(std::move(jc));
  }
  j["trial_results"] = nlohmann::json::array();
  for (const TrialResult& r : s.trial_results) j["trial_results"].push_back(trial_json(r));
  return pretty ? j.dump(2) : j.dump();
}

}  // namespace bgcn
