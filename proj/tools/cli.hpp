#ifndef GCAPS_TOOLS_CLI_HPP
#define GCAPS_TOOLS_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcaps/dataset.hpp"
#include "gcaps/model.hpp"
#include "gcaps/spectral.hpp"
#include "gcaps/training.hpp"

namespace gcaps::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

using KeyValues = std::map<std::string, std::string>;

/// Everything a subcommand needs. Defaults apply to keys nobody set.
struct RunConfig {
  std::optional<std::filesystem::path> dataset;
  /// TU file prefix; empty means the dataset (or synth output) directory name.
  std::string name;
  std::filesystem::path out = ".";
  /// Unset picks one-hot labels when the data has them, degree plus FGSD otherwise.
  std::optional<FeaturePolicy> features;
  ModelConfig model;
  FgsdConfig fgsd;
  TrainConfig train;
  std::size_t folds = 10;
  double test_fraction = 0.25;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::size_t trials = 20;
  SyntheticTask task = SyntheticTask::cycle_vs_union;
  std::size_t count = 200;
  std::size_t min_nodes = 6;
  std::size_t max_nodes = 12;
};

/// Parses `key = value` lines; `#` starts a comment. Throws ConfigError.
KeyValues parse_config_text(std::string_view text, std::string_view origin);
/// Builds a RunConfig from defaults plus `values`. Unknown keys throw ConfigError.
RunConfig resolve_config(const KeyValues& values);
/// Every key resolve_config accepts.
std::vector<std::string> known_keys();

struct CvSummary {
  std::vector<double> accuracies;
  double mean = 0.0;
  /// Population standard deviation over folds.
  double stddev = 0.0;
};

CvSummary summarize(std::vector<double> accuracies);
std::string format_summary(const CvSummary& summary);

/// Node features for a run; FGSD ranges are fitted on `fit_indices` only.
GraphDataset features_for_run(const RunConfig& cfg, const GraphDataset& raw,
                              std::span<const std::size_t> fit_indices,
                              std::span<const Tensor> distances);

/// Entry point of the `gcaps` binary. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gcaps::cli

#endif  // GCAPS_TOOLS_CLI_HPP
