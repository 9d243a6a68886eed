#include "bgcn/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "bgcn/binary_io.hpp"

namespace bgcn {

namespace io {

namespace {
std::uint32_t checksum(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}
}  // namespace

void BinaryWriter::save(const std::string& path) {
  const std::uint32_t crc = checksum(buf_.data(), buf_.size());
  u32(crc);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

BinaryReader BinaryReader::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 4) throw IoError("file too short: " + path);
  const std::size_t payload = data.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[payload + i])) << (8 * i);
  if (stored != checksum(data.data(), payload))
    throw IoError("checksum mismatch (corrupt or truncated file): " + path);
  data.resize(payload);
  return BinaryReader(std::move(data));
}

void BinaryReader::need(std::size_t n) const {
  if (pos_ + n > buf_.size()) throw IoError("unexpected end of file");
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(static_cast<unsigned char>(buf_[pos_++]));
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(buf_.data() + pos_, n);
  pos_ += n;
  return s;
}

void BinaryReader::expect_magic(const char (&m)[5]) {
  need(4);
  if (!std::equal(m, m + 4, buf_.data() + pos_))
    throw IoError(std::string("bad magic, expected ") + m);
  pos_ += 4;
}

}  // namespace io

namespace {

constexpr char kDatasetMagic[5] = "BGCN";
constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find('\t', start);
    if (end == std::string::npos) end = line.size();
    out.push_back(line.substr(start, end - start));
    if (end == line.size()) break;
    start = end + 1;
  }
  return out;
}

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  return in;
}

void validate_dataset(const Dataset& ds) {
  if (ds.num_classes <= 0) throw IoError(ds.name + ": no classes");
  if (ds.labels.size() != static_cast<std::size_t>(ds.num_nodes()))
    throw IoError(ds.name + ": one label per node required");
  for (int y : ds.labels)
    if (y < 0 || y >= ds.num_classes) throw IoError(ds.name + ": label out of range");
  if (ds.features.rows() != ds.num_nodes()) throw IoError(ds.name + ": feature row mismatch");
  validate_graph(ds.graph);
}

SparseGraph graph_from_pairs(std::vector<std::pair<NodeId, NodeId>>& edges, NodeId n,
                             LoadStats* stats) {
  std::sort(edges.begin(), edges.end());
  const auto before = edges.size();
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (stats) stats->duplicate_edges += static_cast<std::int64_t>(before - edges.size());
  return build_graph(edges, n);
}

}  // namespace

Dataset load_content_cites(const std::string& content_path, const std::string& cites_path,
                           const std::string& name, LoadStats* stats) {
  auto content = open_text(content_path);
  Dataset ds;
  ds.name = name;
  std::unordered_map<std::string, NodeId> id_of;
  std::unordered_map<std::string, int> class_of;  // index = first-appearance order
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::string line;
  std::size_t width = 0;
  std::int64_t line_no = 0;
  auto here = [&] { return content_path + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(content, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw IoError(here() + "record needs id, features, class");
    if (width == 0) width = tok.size();
    if (tok.size() != width) throw IoError(here() + "inconsistent column count");
    const std::string& id = tok.front();
    if (id_of.count(id)) throw IoError(here() + "duplicate node id " + id);
    id_of.emplace(id, static_cast<NodeId>(rows.size()));
    ds.node_ids.push_back(id);
    std::vector<double> feats(width - 2);
    for (std::size_t j = 1; j + 1 < tok.size(); ++j) {
      try {
        feats[j - 1] = std::stod(tok[j]);
      } catch (const std::exception&) {
        throw IoError(here() + "bad feature value '" + tok[j] + "'");
      }
    }
    rows.push_back(std::move(feats));
    raw_labels.push_back(tok.back());
    class_of.emplace(tok.back(), static_cast<int>(class_of.size()));
  }
  if (rows.empty()) throw IoError(content_path + ": no records");
  ds.num_classes = static_cast<int>(class_of.size());
  ds.labels.reserve(rows.size());
  for (const auto& cls : raw_labels) ds.labels.push_back(class_of.at(cls));
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(width - 2));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j + 2 <= width; ++j)
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

  auto cites = open_text(cites_path);
  std::vector<std::pair<NodeId, NodeId>> edges;
  line_no = 0;
  auto cite_here = [&] { return cites_path + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(cites, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw IoError(cite_here() + "citation line needs two ids");
    auto a = id_of.find(tok[0]);
    auto b = id_of.find(tok[1]);
    if (a == id_of.end() || b == id_of.end() || a->second == b->second) {
      if (stats) ++stats->skipped_edges;
      continue;
    }
    NodeId u = a->second, v = b->second;
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  ds.graph = graph_from_pairs(edges, static_cast<NodeId>(rows.size()), stats);
  validate_dataset(ds);
  return ds;
}

Dataset load_tab_attributes(const std::string& nodes_path, const std::string& cites_path,
                            const std::string& name, LoadStats* stats) {
  auto nodes = open_text(nodes_path);
  std::string line;
  if (!std::getline(nodes, line)) throw IoError(nodes_path + ": empty file");
  // First line is a record count; second declares the columns.
  if (!std::getline(nodes, line)) throw IoError(nodes_path + ": missing schema header");
  std::unordered_map<std::string, Eigen::Index> feat_index;
  std::vector<std::string> vocab;
  for (const auto& col : split_tabs(line)) {
    if (col.rfind("numeric:", 0) == 0) {
      const std::size_t name_end = col.find(':', 8);
      const std::string word =
          name_end == std::string::npos ? col.substr(8) : col.substr(8, name_end - 8);
      if (word.empty()) throw IoError(nodes_path + ": empty feature name in header");
      if (!feat_index.emplace(word, static_cast<Eigen::Index>(vocab.size())).second)
        throw IoError(nodes_path + ": duplicate feature " + word);
      vocab.push_back(word);
    }
  }
  if (vocab.empty()) throw IoError(nodes_path + ": header declares no numeric features");

  Dataset ds;
  ds.name = name;
  std::unordered_map<std::string, NodeId> id_of;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> sparse_rows;
  int max_label = -1;
  std::int64_t line_no = 2;  // count line + schema header already consumed
  auto here = [&] { return nodes_path + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(nodes, line)) {
    ++line_no;
    auto tok = split_tabs(line);
    if (tok.size() == 1 && tok[0].empty()) continue;
    if (tok.size() < 2) throw IoError(here() + "record needs id and label");
    const std::string& id = tok.front();
    if (id_of.count(id)) throw IoError(here() + "duplicate node id " + id);
    id_of.emplace(id, static_cast<NodeId>(sparse_rows.size()));
    ds.node_ids.push_back(id);
    int label = -1;
    std::vector<std::pair<Eigen::Index, double>> row;
    for (std::size_t j = 1; j < tok.size(); ++j) {
      const std::string& kv = tok[j];
      if (kv.empty()) continue;
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) throw IoError(here() + "expected key=value, got " + kv);
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      try {
        if (key == "label") {
          label = std::stoi(value) - 1;  // labels are 1-based in this schema
        } else if (key == "summary") {
          // free-text column, not a feature
        } else {
          auto it = feat_index.find(key);
          if (it == feat_index.end())
            throw IoError(here() + "undeclared feature " + key);
          row.emplace_back(it->second, std::stod(value));
        }
      } catch (const IoError&) {
        throw;
      } catch (const std::exception&) {
        throw IoError(here() + "bad numeric value '" + value + "'");
      }
    }
    if (label < 0) throw IoError(here() + "record without label: " + id);
    max_label = std::max(max_label, label);
    ds.labels.push_back(label);
    sparse_rows.push_back(std::move(row));
  }
  if (sparse_rows.empty()) throw IoError(nodes_path + ": no records");
  ds.num_classes = max_label + 1;
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(sparse_rows.size()),
                             static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t i = 0; i < sparse_rows.size(); ++i)
    for (auto [j, v] : sparse_rows[i]) ds.features(static_cast<Eigen::Index>(i), j) = v;

  auto cites = open_text(cites_path);
  if (!std::getline(cites, line)) throw IoError(cites_path + ": empty file");
  if (!std::getline(cites, line)) throw IoError(cites_path + ": missing schema header");
  std::vector<std::pair<NodeId, NodeId>> edges;
  auto strip_prefix = [&](const std::string& s) -> std::string {
    const std::size_t colon = s.find(':');
    return colon == std::string::npos ? s : s.substr(colon + 1);
  };
  line_no = 2;
  auto cite_here = [&] { return cites_path + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(cites, line)) {
    ++line_no;
    auto tok = split_tabs(line);
    if (tok.size() == 1 && tok[0].empty()) continue;
    // <no> <paper:id> | <paper:id>
    if (tok.size() < 4) throw IoError(cite_here() + "citation line needs four columns");
    auto a = id_of.find(strip_prefix(tok[1]));
    auto b = id_of.find(strip_prefix(tok[3]));
    if (a == id_of.end() || b == id_of.end() || a->second == b->second) {
      if (stats) ++stats->skipped_edges;
      continue;
    }
    NodeId u = a->second, v = b->second;
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  ds.graph = graph_from_pairs(edges, static_cast<NodeId>(sparse_rows.size()), stats);
  validate_dataset(ds);
  return ds;
}

void save_canonical(const Dataset& ds, const std::string& path) {
  validate_dataset(ds);
  io::BinaryWriter w;
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.i64(ds.num_nodes());
  w.i64(ds.features.cols());
  w.i64(ds.num_classes);
  w.str(ds.name);
  for (int y : ds.labels) w.i32(y);
  for (std::int64_t o : ds.graph.row_offsets()) w.i64(o);
  for (NodeId c : ds.graph.col_indices()) w.i32(c);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) w.f64(ds.features(i, j));
  if (ds.node_ids.size() != static_cast<std::size_t>(ds.num_nodes()))
    throw IoError("save_canonical: node id count mismatch");
  for (const auto& id : ds.node_ids) w.str(id);
  w.save(path);
}

Dataset load_canonical(const std::string& path) {
  auto r = io::BinaryReader::from_file(path);
  r.expect_magic(kDatasetMagic);
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw IoError(path + ": unsupported format version " + std::to_string(version));
  const std::int64_t n = r.i64();
  const std::int64_t d = r.i64();
  const std::int64_t k = r.i64();
  if (n < 0 || d < 0 || k <= 0) throw IoError(path + ": invalid dimensions");
  Dataset ds;
  ds.name = r.str();
  ds.num_classes = static_cast<int>(k);
  ds.labels.resize(static_cast<std::size_t>(n));
  for (auto& y : ds.labels) y = r.i32();
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n) + 1);
  for (auto& o : offsets) o = r.i64();
  if (offsets.front() != 0 || offsets.back() < 0) throw IoError(path + ": bad row offsets");
  std::vector<NodeId> cols(static_cast<std::size_t>(offsets.back()));
  for (auto& c : cols) c = r.i32();
  ds.graph = SparseGraph(static_cast<NodeId>(n), std::move(offsets), std::move(cols));
  ds.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) ds.features(i, j) = r.f64();
  ds.node_ids.resize(static_cast<std::size_t>(n));
  for (auto& id : ds.node_ids) id = r.str();
  if (!r.at_end()) throw IoError(path + ": trailing bytes");
  validate_dataset(ds);
  return ds;
}

Matrix row_normalize(const Matrix& features) {
  Matrix out = features;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double sum = out.row(i).sum();
    if (sum != 0.0) out.row(i) /= sum;
  }
  return out;
}

Split make_random_split(const Dataset& ds, int labels_per_class, std::uint64_t seed,
                        int val_size, int test_size) {
  if (labels_per_class <= 0) throw Error("make_random_split: labels_per_class must be positive");
  if (val_size < 0 || test_size < 0) throw Error("make_random_split: negative split size");
  const NodeId n = ds.num_nodes();
  std::vector<int> order(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  RngStream rng(derive_seed(seed, Stream::kSplit));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i)));
    std::swap(order[i - 1], order[j]);
  }
  Split split;
  split.labels_per_class = labels_per_class;
  split.seed = seed;
  std::vector<int> taken_per_class(static_cast<std::size_t>(ds.num_classes), 0);
  std::vector<char> in_train(static_cast<std::size_t>(n), 0);
  for (int node : order) {
    auto& count = taken_per_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(node)])];
    if (count < labels_per_class) {
      ++count;
      in_train[static_cast<std::size_t>(node)] = 1;
      split.train_idx.push_back(node);
    }
  }
  for (int c = 0; c < ds.num_classes; ++c)
    if (taken_per_class[static_cast<std::size_t>(c)] < labels_per_class)
      throw Error("make_random_split: class " + std::to_string(c) + " has fewer than " +
                  std::to_string(labels_per_class) + " nodes");
  std::vector<int> pool;
  pool.reserve(order.size());
  for (int node : order)
    if (!in_train[static_cast<std::size_t>(node)]) pool.push_back(node);
  if (pool.size() < static_cast<std::size_t>(val_size) + static_cast<std::size_t>(test_size))
    throw Error("make_random_split: not enough nodes for validation/test pools");
  split.val_idx.assign(pool.begin(), pool.begin() + val_size);
  split.test_idx.assign(pool.begin() + val_size, pool.begin() + val_size + test_size);
  std::sort(split.train_idx.begin(), split.train_idx.end());
  std::sort(split.val_idx.begin(), split.val_idx.end());
  std::sort(split.test_idx.begin(), split.test_idx.end());
  return split;
}

std::string default_data_dir() {
  const char* env = std::getenv("BGCN_DATA_DIR");
  return env && *env ? std::string(env) : std::string("data");
}

Dataset open_dataset(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  // Built-in generated corpus for smoke tests and machines without data.
  if (name_or_path == "synthetic")
    return make_synthetic_citation(400, 5, 12, 0.015, 0.0015, 7);
  std::vector<std::string> attempted;
  if (fs::exists(name_or_path) && fs::is_regular_file(name_or_path))
    return load_canonical(name_or_path);
  attempted.push_back(name_or_path);

  const std::string dir = default_data_dir();
  const std::string canonical = dir + "/" + name_or_path + ".bgcn";
  if (fs::exists(canonical)) return load_canonical(canonical);
  attempted.push_back(canonical);

  const std::string base = dir + "/" + name_or_path + "/" + name_or_path;
  if (fs::exists(base + ".content") && fs::exists(base + ".cites"))
    return load_content_cites(base + ".content", base + ".cites", name_or_path);
  attempted.push_back(base + ".content (+ .cites)");

  if (name_or_path == "pubmed") {
    const std::string nodes = dir + "/pubmed/Pubmed-Diabetes.NODE.paper.tab";
    const std::string cites = dir + "/pubmed/Pubmed-Diabetes.DIRECTED.cites.tab";
    if (fs::exists(nodes) && fs::exists(cites))
      return load_tab_attributes(nodes, cites, "pubmed");
    attempted.push_back(nodes);
  }

  std::string msg = "dataset '" + name_or_path + "' not found; tried:";
  for (const auto& p : attempted) msg += "\n  " + p;
  msg += "\nset BGCN_DATA_DIR or pass a path to a converted file (see 'bgcn convert')";
  throw IoError(msg);
}

Dataset make_synthetic_citation(int nodes_per_class, int num_classes, int vocab_per_class,
                                double p_in, double p_out, std::uint64_t seed) {
  if (nodes_per_class <= 0 || num_classes <= 1 || vocab_per_class <= 0)
    throw Error("make_synthetic_citation: bad shape parameters");
  const NodeId n = static_cast<NodeId>(nodes_per_class) * static_cast<NodeId>(num_classes);
  Dataset ds;
  ds.name = "synthetic";
  ds.num_classes = num_classes;
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.node_ids.resize(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) {
    ds.labels[static_cast<std::size_t>(i)] = i / nodes_per_class;
    ds.node_ids[static_cast<std::size_t>(i)] = "s" + std::to_string(i);
  }
  RngStream edge_rng(derive_seed(seed, {0x5bde}));
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      const bool same = ds.labels[static_cast<std::size_t>(u)] ==
                        ds.labels[static_cast<std::size_t>(v)];
      if (edge_rng.uniform() < (same ? p_in : p_out)) edges.emplace_back(u, v);
    }
  ds.graph = build_graph(edges, n);

  const Eigen::Index d = static_cast<Eigen::Index>(vocab_per_class) * num_classes;
  ds.features = Matrix::Zero(n, d);
  RngStream feat_rng(derive_seed(seed, {0x5bdf}));
  for (NodeId i = 0; i < n; ++i) {
    const int c = ds.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      const bool own = j / vocab_per_class == c;
      if (feat_rng.uniform() < (own ? 0.3 : 0.02)) ds.features(i, j) = 1.0;
    }
    if (ds.features.row(i).sum() == 0.0)
      ds.features(i, static_cast<Eigen::Index>(c) * vocab_per_class) = 1.0;
  }
  return ds;
}

}  // namespace bgcn
