#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bgcn/common.hpp"
#include "bgcn/graph.hpp"

namespace bgcn {

// A node-classification corpus: undirected citation graph, dense feature
// matrix (n x d), one class label per node.
struct Dataset {
  std::string name;
  SparseGraph graph;
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> node_ids;  // original string ids, row order

  NodeId num_nodes() const { return graph.num_nodes(); }
  Eigen::Index num_features() const { return features.cols(); }
};

struct LoadStats {
  std::int64_t skipped_edges = 0;  // lines citing unknown ids or self-citations
  std::int64_t duplicate_edges = 0;
};

// Loader for the <id> <f_1 ... f_d> <class> + <cited> <citing> text pair.
// Feature width is inferred from the first record; class names map to label
// ids in order of first appearance; node rows keep file order.
Dataset load_content_cites(const std::string& content_path, const std::string& cites_path,
                           const std::string& name, LoadStats* stats = nullptr);

// Loader for the tab-separated attribute schema: a count line, a header line
// declaring "numeric:<word>:<default>" columns (which fixes the feature
// order), then "<id> label=<k> <word>=<value> ..." records; the cites file
// has two header lines and "<no> paper:<id> | paper:<id>" records.
Dataset load_tab_attributes(const std::string& nodes_path, const std::string& cites_path,
                            const std::string& name, LoadStats* stats = nullptr);

// Binary canonical form with a trailing checksum; round-trips bit-exactly.
void save_canonical(const Dataset& ds, const std::string& path);
Dataset load_canonical(const std::string& path);

// Divides each feature row by its sum; all-zero rows stay zero.
Matrix row_normalize(const Matrix& features);

// Index sets for one trial. Sizes: labels_per_class training rows per class,
// then val_size validation and test_size test rows drawn from the remaining
// pool, all without replacement.
struct Split {
  std::vector<int> train_idx, val_idx, test_idx;
  int labels_per_class = 0;
  std::uint64_t seed = 0;
};
Split make_random_split(const Dataset& ds, int labels_per_class, std::uint64_t seed,
                        int val_size = 500, int test_size = 1000);

// $BGCN_DATA_DIR, or "data" when unset.
std::string default_data_dir();

// Accepts a path to a canonical file, or a dataset name resolved against the
// data directory: <dir>/<name>.bgcn first, then the known raw layouts
// (<dir>/<name>/<name>.content + .cites, or the tab-attribute pair for
// pubmed). Throws IoError listing every attempted path.
Dataset open_dataset(const std::string& name_or_path);

// Stochastic block-model citation stand-in: `num_classes` blocks of
// `nodes_per_class` nodes, intra/inter edge probabilities p_in/p_out, and a
// sparse bag-of-words feature matrix whose vocabulary is class-aligned
// (vocab_per_class words per class; own-class words fire at 30%, others at
// 2%). Used by tests and benchmarks when no real corpus is on disk.
Dataset make_synthetic_citation(int nodes_per_class, int num_classes, int vocab_per_class,
                                double p_in, double p_out, std::uint64_t seed);

}  // namespace bgcn
