#pragma once

// Flat `key = value` run configuration. Every threshold has a documented key;
// `#` starts a comment. Relative paths resolve against the config file's
// directory.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "commute/aggregate.hpp"
#include "commute/commute_mine.hpp"
#include "commute/flow_cluster.hpp"
#include "commute/ingest.hpp"
#include "commute/synthgen.hpp"

namespace commute {

/// Stages in pipeline order. A stage's config hash covers its own keys and
/// those of every earlier stage.
enum class ConfigGroup { ingest, cluster, classify, aggregate, synth, run };

struct RunConfig {
  CleaningConfig cleaning;
  ClusterParams cluster;
  DecisionParams decision;
  HistogramBins bins;
  SynthConfig synth;

  std::filesystem::path trips;
  std::filesystem::path stations;
  std::filesystem::path parcels;
  std::filesystem::path rainy_days;
  std::filesystem::path ground_truth;
  std::filesystem::path out = "out";

  std::string study_start;  // YYYY-MM-DD; empty derives the range from the trips
  std::string study_end;

  bool uncap_radius = false;  // r_max = infinity
  bool beta_zero = false;     // beta = 0
  int workers = 1;
  bool debug_dumps = true;

  double validation_step_m = 10.0;
  double validation_max_m = 300.0;
  double score_tolerance_m = 150.0;
  std::vector<double> compare_betas{0.0, 30.0, 60.0, 90.0};

  /// Cluster parameters with the toggles applied.
  ClusterParams effective_cluster() const;
  /// Delegates to the component configs; throws commute::Error.
  void validate() const;
};

/// Throws commute::Error on unknown keys, malformed values or duplicates.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its documentation and current value.
std::string format_config(const RunConfig& cfg);

/// `key=value` lines of the groups up to and including `upto`, sorted by key.
std::string canonical_config(const RunConfig& cfg, ConfigGroup upto);
std::string config_hash(const RunConfig& cfg, ConfigGroup upto);

}  // namespace commute
