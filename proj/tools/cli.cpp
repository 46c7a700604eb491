#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "gcaps/checks.hpp"

namespace gcaps::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a finite number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_size(key, std::string(trim(item))));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

Activation parse_activation(const std::string& value) {
  if (value == "tanh") return Activation::tanh;
  if (value == "relu") return Activation::relu;
  if (value == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + value + "'");
}

FilterKind parse_filter(const std::string& value) {
  if (value == "laplacian") return FilterKind::laplacian;
  if (value == "normalized_laplacian") return FilterKind::normalized_laplacian;
  if (value == "mean_adjacency") return FilterKind::mean_adjacency;
  throw ConfigError("unknown filter '" + value + "'");
}

ReadoutMode parse_readout(const std::string& value) {
  if (value == "covariance") return ReadoutMode::covariance_with_mean;
  if (value == "mean") return ReadoutMode::mean_only;
  throw ConfigError("unknown readout '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, auto&, auto& v) { c.dataset = fs::path(v); }},
      {"name", [](RunConfig& c, auto&, auto& v) { c.name = v; }},
      {"out", [](RunConfig& c, auto&, auto& v) { c.out = fs::path(v); }},
      {"features", [](RunConfig& c, auto&, auto& v) { c.features = parse_feature_policy(v); }},
      {"depth", [](RunConfig& c, auto& k, auto& v) { c.model.depth = parse_size(k, v); }},
      {"hidden", [](RunConfig& c, auto& k, auto& v) { c.model.hidden = parse_sizes(k, v); }},
      {"order", [](RunConfig& c, auto& k, auto& v) { c.model.capsule_order = parse_size(k, v); }},
      {"degree", [](RunConfig& c, auto& k, auto& v) { c.model.filter_degree = parse_size(k, v); }},
      {"fc_hidden", [](RunConfig& c, auto& k, auto& v) { c.model.fc_hidden = parse_size(k, v); }},
      {"dropout", [](RunConfig& c, auto& k, auto& v) { c.model.dropout = parse_double(k, v); }},
      {"l2", [](RunConfig& c, auto& k, auto& v) { c.model.l2 = parse_double(k, v); }},
      {"activation", [](RunConfig& c, auto&, auto& v) { c.model.activation = parse_activation(v); }},
      {"readout", [](RunConfig& c, auto&, auto& v) { c.model.readout = parse_readout(v); }},
      {"concat_intermediate",
       [](RunConfig& c, auto& k, auto& v) { c.model.concat_intermediate = parse_bool(k, v); }},
      {"filter", [](RunConfig& c, auto&, auto& v) { c.model.filter = parse_filter(v); }},
      {"standardize", [](RunConfig& c, auto& k, auto& v) { c.model.standardize = parse_bool(k, v); }},
      {"fgsd_bins", [](RunConfig& c, auto& k, auto& v) { c.fgsd.num_bins = parse_size(k, v); }},
      {"fgsd_range", [](RunConfig& c, auto& k, auto& v) { c.fgsd.range_max = parse_double(k, v); }},
      {"fgsd_tolerance",
       [](RunConfig& c, auto& k, auto& v) { c.fgsd.zero_eigen_tolerance = parse_double(k, v); }},
      {"fgsd_normalize", [](RunConfig& c, auto& k, auto& v) { c.fgsd.normalize = parse_bool(k, v); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v) { c.train.epochs = parse_size(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = parse_size(k, v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.learning_rate = parse_double(k, v); }},
      {"decay_every", [](RunConfig& c, auto& k, auto& v) { c.train.decay_every = parse_size(k, v); }},
      {"decay_factor",
       [](RunConfig& c, auto& k, auto& v) { c.train.decay_factor = parse_double(k, v); }},
      {"folds", [](RunConfig& c, auto& k, auto& v) { c.folds = parse_size(k, v); }},
      {"test_fraction", [](RunConfig& c, auto& k, auto& v) { c.test_fraction = parse_double(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_size(k, v); }},
      {"jobs", [](RunConfig& c, auto& k, auto& v) { c.jobs = parse_size(k, v); }},
      {"trials", [](RunConfig& c, auto& k, auto& v) { c.trials = parse_size(k, v); }},
      {"task", [](RunConfig& c, auto&, auto& v) { c.task = parse_synthetic_task(v); }},
      {"count", [](RunConfig& c, auto& k, auto& v) { c.count = parse_size(k, v); }},
      {"min_nodes", [](RunConfig& c, auto& k, auto& v) { c.min_nodes = parse_size(k, v); }},
      {"max_nodes", [](RunConfig& c, auto& k, auto& v) { c.max_nodes = parse_size(k, v); }},
  };
  return table;
}

bool needs_fgsd(FeaturePolicy policy) {
  return policy == FeaturePolicy::fgsd || policy == FeaturePolicy::degree_plus_fgsd ||
         policy == FeaturePolicy::labels_plus_fgsd;
}

FeaturePolicy policy_for(const RunConfig& cfg, const GraphDataset& raw) {
  if (cfg.features) return *cfg.features;
  const bool labeled = !raw.graphs.empty() && raw.graphs.front().node_labels().has_value();
  return labeled ? FeaturePolicy::one_hot_labels : FeaturePolicy::degree_plus_fgsd;
}

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("a seed is required (--seed or seed = ... in the config file)");
  return *cfg.seed;
}

/// TU file prefix: the configured name, else the directory's own name.
std::string dataset_prefix(const RunConfig& cfg, fs::path dir) {
  if (!cfg.name.empty()) return cfg.name;
  if (dir.filename().empty()) dir = dir.parent_path();
  return dir.filename().string();
}

GraphDataset load_for_run(const RunConfig& cfg) {
  if (!cfg.dataset) throw ConfigError("no dataset given (--dataset DIR)");
  return load_tu_dataset(*cfg.dataset, dataset_prefix(cfg, *cfg.dataset));
}

std::vector<std::size_t> labels_of(const GraphDataset& data) {
  std::vector<std::size_t> labels;
  labels.reserve(data.size());
  for (const Graph& g : data.graphs) labels.push_back(g.label().value_or(0));
  return labels;
}

void write_metrics(const fs::path& file, const std::vector<EpochMetrics>& trace) {
  std::ofstream out(file);
  if (!out) throw DatasetError("cannot write " + file.string());
  out << "epoch,split,loss,accuracy\n" << std::setprecision(10);
  for (const auto& m : trace) out << m.epoch << ',' << m.split << ',' << m.loss << ',' << m.accuracy << '\n';
}

void write_params(const fs::path& file, const ParameterSet& params) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + file.string());
  save_parameters(out, params.values);
}

struct RunOutcome {
  std::vector<EpochMetrics> trace;
  ParameterSet params;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

RunOutcome run_split(const RunConfig& cfg, const GraphDataset& raw, std::span<const Tensor> distances,
                     const Fold& split, std::uint64_t seed) {
  const GraphDataset data = features_for_run(cfg, raw, split.train, distances);
  ModelConfig mc = cfg.model;
  mc.seed = seed;
  const auto prepared = prepare_dataset(data, mc);
  GcapsModel model(mc, data.feature_dim, data.num_classes);
  Rng rng(seed);
  RunOutcome outcome;
  outcome.trace = train(model, prepared, split.train, cfg.train, rng, split.test).trace;
  outcome.train_accuracy = evaluate(model, prepared, split.train).accuracy;
  outcome.test_accuracy = evaluate(model, prepared, split.test).accuracy;
  outcome.params = model.parameters();
  return outcome;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = require_seed(cfg);
  const GraphDataset raw = load_for_run(cfg);
  const Fold split = holdout_split(labels_of(raw), cfg.test_fraction, seed);
  const auto distances =
      needs_fgsd(policy_for(cfg, raw)) ? harmonic_distances(raw, cfg.fgsd.zero_eigen_tolerance)
                                       : std::vector<Tensor>{};
  const RunOutcome result = run_split(cfg, raw, distances, split, seed);
  fs::create_directories(cfg.out);
  write_metrics(cfg.out / "metrics.csv", result.trace);
  write_params(cfg.out / "params.gcap", result.params);
  out << std::fixed << std::setprecision(6) << "train accuracy " << result.train_accuracy
      << "\ntest accuracy " << result.test_accuracy << '\n';
  return kExitOk;
}

int cmd_cv(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = require_seed(cfg);
  const GraphDataset raw = load_for_run(cfg);
  const auto folds = kfold_split(labels_of(raw), cfg.folds, seed);
  const auto distances =
      needs_fgsd(policy_for(cfg, raw)) ? harmonic_distances(raw, cfg.fgsd.zero_eigen_tolerance)
                                       : std::vector<Tensor>{};

  std::vector<RunOutcome> outcomes(folds.size());
  std::vector<std::exception_ptr> failures(folds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < folds.size(); f = next++) {
      try {
        outcomes[f] = run_split(cfg, raw, distances, folds[f], seed + f);
      } catch (...) {
        failures[f] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::clamp<std::size_t>(cfg.jobs, 1, folds.size());
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  fs::create_directories(cfg.out);
  std::vector<double> accuracies;
  out << std::fixed << std::setprecision(6);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::ostringstream stem;
    stem << "fold_" << std::setw(2) << std::setfill('0') << f + 1;
    write_metrics(cfg.out / (stem.str() + "_metrics.csv"), outcomes[f].trace);
    write_params(cfg.out / (stem.str() + "_params.gcap"), outcomes[f].params);
    accuracies.push_back(outcomes[f].test_accuracy);
    out << "fold " << f + 1 << " test accuracy " << outcomes[f].test_accuracy << '\n';
  }
  const std::string summary = format_summary(summarize(accuracies));
  std::ofstream(cfg.out / "summary.txt") << summary << '\n';
  out << summary << '\n';
  return kExitOk;
}

int cmd_fgsd_extract(const RunConfig& cfg, std::ostream& out) {
  require_seed(cfg);
  const GraphDataset raw = load_for_run(cfg);
  const auto distances = harmonic_distances(raw, cfg.fgsd.zero_eigen_tolerance);
  FgsdConfig fgsd = cfg.fgsd;
  if (!fgsd.range_max) fgsd.range_max = fit_fgsd_range(distances, {});
  fs::create_directories(cfg.out);
  std::ofstream manifest(cfg.out / "manifest.csv");
  manifest << "graph,file,nodes,label,range_max\n" << std::setprecision(17);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Tensor hist = fgsd_node_features(distances[i], fgsd);
    std::ostringstream file;
    file << "graph_" << std::setw(5) << std::setfill('0') << i << ".csv";
    std::ofstream csv(cfg.out / file.str());
    if (!csv) throw DatasetError("cannot write " + (cfg.out / file.str()).string());
    csv << std::setprecision(17);
    for (std::size_t r = 0; r < hist.rows(); ++r) {
      for (std::size_t c = 0; c < hist.cols(); ++c) csv << (c ? "," : "") << hist(r, c);
      csv << '\n';
    }
    manifest << i << ',' << file.str() << ',' << raw.graphs[i].num_nodes() << ','
             << raw.graphs[i].label().value_or(0) << ',' << *fgsd.range_max << '\n';
  }
  out << "wrote " << raw.size() << " feature files to " << cfg.out.string() << '\n';
  return kExitOk;
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
  const auto results = run_property_suite({require_seed(cfg), cfg.trials});
  std::set<std::string> covered;
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << r.covers << "]";
    if (!r.detail.empty()) out << "  " << r.detail;
    out << '\n';
    covered.insert(r.covers);
    if (!r.passed) ++failed;
  }
  out << "covered:";
  for (const auto& c : covered) out << ' ' << '[' << c << ']';
  out << '\n' << results.size() - failed << '/' << results.size() << " properties passed\n";
  return failed ? kExitFailure : kExitOk;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const auto data =
      generate_synthetic(cfg.task, cfg.count, cfg.min_nodes, cfg.max_nodes, require_seed(cfg));
  const std::string name = dataset_prefix(cfg, cfg.out);
  if (name.empty() || name == "." || name == "..")
    throw ConfigError("synth: give --out a directory name or set name = ...");
  fs::create_directories(cfg.out);
  write_tu_dataset(data, cfg.out, name);
  out << "wrote " << data.size() << " graphs as " << (cfg.out / name).string() << "_*.txt\n";
  return kExitOk;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace

KeyValues parse_config_text(std::string_view text, std::string_view origin) {
  KeyValues values;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    values[key] = std::string(trim(line.substr(eq + 1)));
  }
  return values;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, setter] : setters()) keys.push_back(key);
  return keys;
}

RunConfig resolve_config(const KeyValues& values) {
  RunConfig cfg;
  for (const auto& [key, value] : values) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.model.validate();
  if (cfg.folds < 2) throw ConfigError("folds must be at least 2");
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (cfg.train.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(cfg.train.learning_rate >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(cfg.train.decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  if (cfg.fgsd.num_bins < 1) throw ConfigError("fgsd_bins must be at least 1");
  if (cfg.fgsd.range_max && !(*cfg.fgsd.range_max > 0.0))
    throw ConfigError("fgsd_range must be positive");
  return cfg;
}

CvSummary summarize(std::vector<double> accuracies) {
  CvSummary s;
  s.accuracies = std::move(accuracies);
  if (s.accuracies.empty()) return s;
  const double n = static_cast<double>(s.accuracies.size());
  s.mean = std::accumulate(s.accuracies.begin(), s.accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : s.accuracies) ss += (a - s.mean) * (a - s.mean);
  s.stddev = std::sqrt(ss / n);
  return s;
}

std::string format_summary(const CvSummary& summary) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << "accuracy " << summary.mean << " ± "
      << summary.stddev;
  return out.str();
}

GraphDataset features_for_run(const RunConfig& cfg, const GraphDataset& raw,
                              std::span<const std::size_t> fit_indices,
                              std::span<const Tensor> distances) {
  return assemble_node_features(raw, policy_for(cfg, raw), cfg.fgsd, fit_indices, distances);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph capsule network toolkit"};
  app.require_subcommand(1);

  struct Flags {
    std::string dataset, config, seed, folds, epochs, lr, jobs, out;
    std::vector<std::string> sets;
  } flags;
  std::map<std::string, CLI::Option*> dedicated;

  auto add_common = [&](CLI::App* sub) {
    const std::pair<const char*, std::string*> options[] = {
        {"dataset", &flags.dataset}, {"seed", &flags.seed}, {"folds", &flags.folds},
        {"epochs", &flags.epochs},   {"lr", &flags.lr},     {"jobs", &flags.jobs},
        {"out", &flags.out},
    };
    for (const auto& [name, target] : options) {
      auto* opt = sub->add_option(std::string("--") + name, *target);
      opt->description(std::string("Same as ") + name + " = VALUE in a config file");
      dedicated[std::string(sub->get_name()) + "/" + name] = opt;
    }
    sub->add_option("--config", flags.config, "Flat key = value file; flags override it");
    sub->add_option("--set", flags.sets, "Override any config key: --set key=value");
  };

  const std::pair<const char*, const char*> commands[] = {
      {"train", "Train on a stratified holdout split and report test accuracy"},
      {"cv", "Stratified k-fold cross validation; prints mean ± std accuracy"},
      {"fgsd-extract", "Write per-graph harmonic-distance histograms"},
      {"check", "Run the randomized property suite"},
      {"synth", "Write a synthetic dataset in TU format"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    KeyValues values;
    if (!flags.config.empty()) values = parse_config_text(read_file(flags.config), flags.config);
    for (const auto& assignment : flags.sets) {
      for (auto& [k, v] : parse_config_text(assignment, "--set")) values[k] = v;
    }
    const std::pair<const char*, const std::string*> direct[] = {
        {"dataset", &flags.dataset}, {"seed", &flags.seed}, {"folds", &flags.folds},
        {"epochs", &flags.epochs},   {"lr", &flags.lr},     {"jobs", &flags.jobs},
        {"out", &flags.out},
    };
    for (const auto& [key, value] : direct) {
      if (dedicated.at(command + "/" + key)->count() > 0) values[key] = *value;
    }
    const RunConfig cfg = resolve_config(values);

    if (command == "train") return cmd_train(cfg, out);
    if (command == "cv") return cmd_cv(cfg, out);
    if (command == "fgsd-extract") return cmd_fgsd_extract(cfg, out);
    if (command == "check") return cmd_check(cfg, out);
    return cmd_synth(cfg, out);
  } catch (const ConfigError& e) {
    err << "gcaps " << command << ": configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DatasetError& e) {
    err << "gcaps " << command << ": dataset error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "gcaps " << command << ": training failed: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "gcaps " << command << ": " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace gcaps::cli
