#include "gcaps/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace gcaps {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

long parse_long(std::string_view field, const fs::path& file, std::size_t line) {
  field = trim(field);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DatasetError(file.filename().string() + ":" + std::to_string(line) +
                       ": expected an integer, got '" + std::string(field) + "'");
  }
  return value;
}

// One vector of comma-separated integers per non-empty line.
std::vector<std::pair<std::size_t, std::vector<long>>> read_rows(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DatasetError("cannot open " + file.string());
  std::vector<std::pair<std::size_t, std::vector<long>>> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::string_view view = trim(text);
    if (view.empty()) continue;
    std::vector<long> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = view.find(',', start);
      fields.push_back(parse_long(view.substr(start, comma - start), file, line));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.emplace_back(line, std::move(fields));
  }
  return rows;
}

fs::path require_file(const fs::path& directory, const std::string& name, const char* suffix) {
  fs::path file = directory / (name + suffix);
  if (!fs::exists(file)) throw DatasetError("missing dataset file " + file.string());
  return file;
}

Tensor one_hot(const std::vector<long>& labels, const std::vector<long>& alphabet) {
  Tensor out({labels.size(), alphabet.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), labels[i]);
    out(i, static_cast<std::size_t>(it - alphabet.begin())) = 1.0;
  }
  return out;
}

std::vector<long> label_alphabet(const GraphDataset& dataset) {
  std::set<long> seen;
  for (const Graph& g : dataset.graphs) {
    if (!g.node_labels()) continue;
    seen.insert(g.node_labels()->begin(), g.node_labels()->end());
  }
  return {seen.begin(), seen.end()};
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows();
  Tensor out({n, a.cols() + b.cols()});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

}  // namespace

GraphDataset load_tu_dataset(const fs::path& directory, const std::string& name) {
  const fs::path edges_file = require_file(directory, name, "_A.txt");
  const fs::path indicator_file = require_file(directory, name, "_graph_indicator.txt");
  const fs::path labels_file = require_file(directory, name, "_graph_labels.txt");
  const fs::path node_labels_file = directory / (name + "_node_labels.txt");

  const auto indicator = read_rows(indicator_file);
  const std::size_t total_nodes = indicator.size();
  std::vector<std::size_t> graph_of(total_nodes);
  std::vector<std::size_t> local_index(total_nodes);
  std::vector<std::size_t> graph_sizes;
  for (std::size_t v = 0; v < total_nodes; ++v) {
    const auto& [line, fields] = indicator[v];
    if (fields.size() != 1 || fields[0] < 1) {
      throw DatasetError(indicator_file.filename().string() + ":" + std::to_string(line) +
                         ": expected one positive graph id");
    }
    const auto gid = static_cast<std::size_t>(fields[0] - 1);
    if (gid >= graph_sizes.size()) graph_sizes.resize(gid + 1, 0);
    graph_of[v] = gid;
    local_index[v] = graph_sizes[gid]++;
  }
  const std::size_t num_graphs = graph_sizes.size();
  for (std::size_t gid = 0; gid < num_graphs; ++gid) {
    if (graph_sizes[gid] == 0) {
      throw DatasetError(indicator_file.filename().string() + ": graph id " +
                         std::to_string(gid + 1) + " has no nodes");
    }
  }

  const auto label_rows = read_rows(labels_file);
  if (label_rows.size() != num_graphs) {
    throw DatasetError(labels_file.filename().string() + ": " + std::to_string(label_rows.size()) +
                       " labels for " + std::to_string(num_graphs) + " graphs");
  }
  std::vector<long> raw_labels;
  for (const auto& [line, fields] : label_rows) {
    if (fields.size() != 1) {
      throw DatasetError(labels_file.filename().string() + ":" + std::to_string(line) +
                         ": expected one label");
    }
    raw_labels.push_back(fields[0]);
  }
  std::vector<long> classes(raw_labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<Tensor> adjacency;
  adjacency.reserve(num_graphs);
  for (std::size_t size : graph_sizes) adjacency.emplace_back(Shape{size, size});
  for (const auto& [line, fields] : read_rows(edges_file)) {
    if (fields.size() != 2) {
      throw DatasetError(edges_file.filename().string() + ":" + std::to_string(line) +
                         ": expected two node ids");
    }
    for (long id : fields) {
      if (id < 1 || static_cast<std::size_t>(id) > total_nodes) {
        throw DatasetError(edges_file.filename().string() + ":" + std::to_string(line) +
                           ": node id " + std::to_string(id) + " does not exist");
      }
    }
    const auto u = static_cast<std::size_t>(fields[0] - 1);
    const auto v = static_cast<std::size_t>(fields[1] - 1);
    if (graph_of[u] != graph_of[v]) {
      throw DatasetError(edges_file.filename().string() + ":" + std::to_string(line) +
                         ": edge joins graphs " + std::to_string(graph_of[u] + 1) + " and " +
                         std::to_string(graph_of[v] + 1));
    }
    if (u == v) continue;  // self-loops are dropped
    Tensor& a = adjacency[graph_of[u]];
    a(local_index[u], local_index[v]) = 1.0;
    a(local_index[v], local_index[u]) = 1.0;
  }

  std::vector<std::vector<long>> node_labels;
  const bool has_node_labels = fs::exists(node_labels_file);
  if (has_node_labels) {
    const auto rows = read_rows(node_labels_file);
    if (rows.size() != total_nodes) {
      throw DatasetError(node_labels_file.filename().string() + ": " +
                         std::to_string(rows.size()) + " labels for " +
                         std::to_string(total_nodes) + " nodes");
    }
    node_labels.resize(num_graphs);
    for (std::size_t gid = 0; gid < num_graphs; ++gid) node_labels[gid].resize(graph_sizes[gid]);
    for (std::size_t v = 0; v < total_nodes; ++v) {
      node_labels[graph_of[v]][local_index[v]] = rows[v].second.front();
    }
  }

  GraphDataset dataset;
  dataset.num_classes = classes.size();
  dataset.class_values = classes;
  for (std::size_t gid = 0; gid < num_graphs; ++gid) {
    const auto cls = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), raw_labels[gid]) - classes.begin());
    Graph g(std::move(adjacency[gid]), Tensor({graph_sizes[gid], 0}), cls);
    if (has_node_labels) g.set_node_labels(std::move(node_labels[gid]));
    dataset.graphs.push_back(std::move(g));
  }
  if (has_node_labels) {
    const auto alphabet = label_alphabet(dataset);
    for (Graph& g : dataset.graphs) g.set_node_features(one_hot(*g.node_labels(), alphabet));
    dataset.feature_dim = alphabet.size();
  }
  dataset.validate();
  return dataset;
}

void write_tu_dataset(const GraphDataset& dataset, const fs::path& directory,
                      const std::string& name) {
  fs::create_directories(directory);
  auto open = [&](const char* suffix) {
    std::ofstream out(directory / (name + suffix));
    if (!out) throw DatasetError("cannot write " + (directory / (name + suffix)).string());
    return out;
  };
  std::ofstream edges = open("_A.txt");
  std::ofstream indicator = open("_graph_indicator.txt");
  std::ofstream labels = open("_graph_labels.txt");
  const bool has_node_labels =
      !dataset.graphs.empty() &&
      std::all_of(dataset.graphs.begin(), dataset.graphs.end(),
                  [](const Graph& g) { return g.node_labels().has_value(); });
  std::ofstream node_labels;
  if (has_node_labels) node_labels = open("_node_labels.txt");

  std::size_t offset = 0;
  for (std::size_t gid = 0; gid < dataset.size(); ++gid) {
    const Graph& g = dataset.graphs[gid];
    const std::size_t n = g.num_nodes();
    for (std::size_t i = 0; i < n; ++i) {
      indicator << gid + 1 << '\n';
      if (has_node_labels) node_labels << (*g.node_labels())[i] << '\n';
      for (std::size_t j = 0; j < n; ++j) {
        if (g.adjacency()(i, j) != 0.0) edges << offset + i + 1 << ", " << offset + j + 1 << '\n';
      }
    }
    const std::size_t cls = g.label().value_or(0);
    const long value = cls < dataset.class_values.size() ? dataset.class_values[cls]
                                                         : static_cast<long>(cls);
    labels << value << '\n';
    offset += n;
  }
}

FeaturePolicy parse_feature_policy(const std::string& text) {
  static const std::map<std::string, FeaturePolicy> names = {
      {"one_hot_labels", FeaturePolicy::one_hot_labels},
      {"degree", FeaturePolicy::degree},
      {"fgsd", FeaturePolicy::fgsd},
      {"degree_plus_fgsd", FeaturePolicy::degree_plus_fgsd},
      {"labels_plus_fgsd", FeaturePolicy::labels_plus_fgsd},
  };
  const auto it = names.find(text);
  if (it == names.end()) throw ConfigError("unknown feature policy '" + text + "'");
  return it->second;
}

std::string to_string(FeaturePolicy policy) {
  switch (policy) {
    case FeaturePolicy::one_hot_labels: return "one_hot_labels";
    case FeaturePolicy::degree: return "degree";
    case FeaturePolicy::fgsd: return "fgsd";
    case FeaturePolicy::degree_plus_fgsd: return "degree_plus_fgsd";
    case FeaturePolicy::labels_plus_fgsd: return "labels_plus_fgsd";
  }
  return "unknown";
}

std::vector<Tensor> harmonic_distances(const GraphDataset& dataset, double zero_tolerance) {
  std::vector<Tensor> out;
  out.reserve(dataset.size());
  for (const Graph& g : dataset.graphs) {
    out.push_back(harmonic_distance_matrix(build_laplacian(g), zero_tolerance));
  }
  return out;
}

double fit_fgsd_range(std::span<const Tensor> distances, std::span<const std::size_t> fit_indices) {
  double range = 0.0;
  if (fit_indices.empty()) {
    for (const Tensor& s : distances) range = std::max(range, max_finite_distance(s));
  } else {
    for (std::size_t i : fit_indices) range = std::max(range, max_finite_distance(distances[i]));
  }
  return range > 0.0 ? range : 1.0;
}

GraphDataset assemble_node_features(const GraphDataset& dataset, FeaturePolicy policy,
                                    const FgsdConfig& fgsd,
                                    std::span<const std::size_t> fit_indices,
                                    std::span<const Tensor> distances) {
  const bool wants_labels =
      policy == FeaturePolicy::one_hot_labels || policy == FeaturePolicy::labels_plus_fgsd;
  const bool wants_degree =
      policy == FeaturePolicy::degree || policy == FeaturePolicy::degree_plus_fgsd;
  const bool wants_fgsd = policy == FeaturePolicy::fgsd ||
                          policy == FeaturePolicy::degree_plus_fgsd ||
                          policy == FeaturePolicy::labels_plus_fgsd;

  if (wants_labels) {
    for (const Graph& g : dataset.graphs) {
      if (!g.node_labels()) {
        throw ConfigError("feature policy " + to_string(policy) +
                          " needs node labels, but the dataset has none");
      }
    }
  }

  std::vector<Tensor> own_distances;
  if (wants_fgsd && distances.empty()) {
    own_distances = harmonic_distances(dataset, fgsd.zero_eigen_tolerance);
    distances = own_distances;
  }
  if (wants_fgsd && distances.size() != dataset.size()) {
    throw ConfigError("assemble_node_features: " + std::to_string(distances.size()) +
                      " distance matrices for " + std::to_string(dataset.size()) + " graphs");
  }
  FgsdConfig hist_cfg = fgsd;
  if (wants_fgsd && !hist_cfg.range_max) hist_cfg.range_max = fit_fgsd_range(distances, fit_indices);

  const std::vector<long> alphabet = wants_labels ? label_alphabet(dataset) : std::vector<long>{};

  GraphDataset out = dataset;
  for (std::size_t k = 0; k < out.size(); ++k) {
    Graph& g = out.graphs[k];
    Tensor features({g.num_nodes(), 0});
    if (wants_labels) features = one_hot(*g.node_labels(), alphabet);
    if (wants_degree) {
      const auto deg = g.degrees();
      features = concat_features(features, Tensor({g.num_nodes(), 1}, deg));
    }
    if (wants_fgsd) features = concat_features(features, fgsd_node_features(distances[k], hist_cfg));
    g.set_node_features(std::move(features));
  }
  out.feature_dim = out.graphs.empty() ? 0 : out.graphs.front().feature_dim();
  out.validate();
  return out;
}

SyntheticTask parse_synthetic_task(const std::string& text) {
  if (text == "cycle_vs_union") return SyntheticTask::cycle_vs_union;
  if (text == "cycle_parity") return SyntheticTask::cycle_parity;
  throw ConfigError("unknown synthetic task '" + text + "'");
}

Graph cycle_graph(std::size_t n) {
  if (n < 3) throw ConfigError("cycle_graph: a cycle needs at least 3 nodes");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return Graph::from_edges(n, edges);
}

Graph disjoint_union(const Graph& a, const Graph& b) {
  const std::size_t na = a.num_nodes();
  const std::size_t n = na + b.num_nodes();
  Tensor adj({n, n});
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) adj(i, j) = a.adjacency()(i, j);
  for (std::size_t i = 0; i < b.num_nodes(); ++i)
    for (std::size_t j = 0; j < b.num_nodes(); ++j) adj(na + i, na + j) = b.adjacency()(i, j);
  return Graph(std::move(adj), Tensor({n, 0}), a.label());
}

GraphDataset generate_synthetic(SyntheticTask task, std::size_t count, std::size_t min_nodes,
                                std::size_t max_nodes, unsigned long long seed) {
  if (count < 2) throw ConfigError("generate_synthetic: count must be at least 2");
  if (min_nodes > max_nodes) throw ConfigError("generate_synthetic: empty size range");

  // Candidate sizes per class.
  std::vector<std::size_t> sizes[2];
  for (std::size_t n = min_nodes; n <= max_nodes; ++n) {
    if (task == SyntheticTask::cycle_vs_union) {
      if (n >= 6 && n % 2 == 0) {
        sizes[0].push_back(n);
        sizes[1].push_back(n);
      }
    } else if (n >= 3) {
      sizes[n % 2].push_back(n);
    }
  }
  if (sizes[0].empty() || sizes[1].empty()) {
    throw ConfigError("generate_synthetic: size range [" + std::to_string(min_nodes) + ", " +
                      std::to_string(max_nodes) + "] cannot produce both classes");
  }

  Rng rng(seed);
  GraphDataset dataset;
  dataset.num_classes = 2;
  dataset.class_values = {0, 1};
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t cls = i % 2;
    std::uniform_int_distribution<std::size_t> pick(0, sizes[cls].size() - 1);
    const std::size_t n = sizes[cls][pick(rng)];
    Graph g = (task == SyntheticTask::cycle_vs_union && cls == 1)
                  ? disjoint_union(cycle_graph(n / 2), cycle_graph(n / 2))
                  : cycle_graph(n);
    Permutation perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    g = permute_graph(g, perm);
    g.set_label(cls);
    dataset.graphs.push_back(std::move(g));
  }
  std::shuffle(dataset.graphs.begin(), dataset.graphs.end(), rng);
  return dataset;
}

}  // namespace gcaps
