#pragma once

// Artifact writers and the intermediate formats shared by staged runs.
//
// Public artifacts use 6-decimal coordinates, LF line endings and rows sorted
// by id. Intermediates (istfc.csv, classified.csv) carry planar values at full
// precision so a staged run reproduces an `all` run bit for bit.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "commute/aggregate.hpp"
#include "commute/commute_mine.hpp"
#include "commute/flow_cluster.hpp"
#include "commute/ingest.hpp"

namespace commute {

struct UserLayer1 {
  std::string user_id;
  int active_weekdays = 0;
  std::vector<Flow> flows;
  UserClusters clusters;
};

struct AnalysisResults {
  Projection projection;
  std::vector<Station> stations;
  std::vector<CommuterRecord> commuters;  // ascending user_id
  SummaryTables summary;
  std::optional<ValidationCurve> validation;
  std::map<std::size_t, StationCounts> station_usage;
  std::vector<CommuteFlowCluster> flow_clusters;
};

std::string format_commuters_csv(std::span<const CommuterRecord> records, const Projection& proj,
                                 std::span<const Station> stations);
std::string format_commuters_geojson(std::span<const CommuterRecord> records,
                                     const Projection& proj, std::span<const Station> stations);
std::string format_shares_csv(const SummaryTables& s);
/// Rows `metric,category,bin_lo,bin_hi,count,fraction` for the named metrics.
std::string format_histograms_csv(const SummaryTables& s, std::span<const std::string_view> metrics);
std::string format_validation_csv(const ValidationCurve& curve);
std::string format_station_usage_csv(const std::map<std::size_t, StationCounts>& usage,
                                     std::span<const Station> stations);
std::string format_commute_flows_geojson(std::span<const CommuteFlowCluster> clusters,
                                         const Projection& proj);

using Artifact = std::pair<std::string, std::string>;  // file name, contents

/// Every public artifact in a fixed order. validation_curve.csv is left out
/// when `results.validation` is empty.
std::vector<Artifact> render_artifacts(const AnalysisResults& results);

/// Writes render_artifacts() into `out_dir`, creating it if needed.
/// Throws commute::Error when the directory cannot be written.
void export_artifacts(const AnalysisResults& results, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Layer 1 dumps and intermediates

std::string format_isfc_csv(std::span<const UserLayer1> users, const Projection& proj);
std::string format_istfc_csv(std::span<const UserLayer1> users, const Projection& proj);

struct UserIstfcs {
  std::string user_id;
  int active_weekdays = 0;
  // Members are placeholders 0..n'-1: Layer 2 only reads n'.
  std::vector<ISTFC> istfcs;
};

/// Reads the reliable ISTFCs back from istfc.csv. Throws on malformed rows.
std::vector<UserIstfcs> parse_istfc_csv(std::string_view text);

/// Full-precision commuter records for the aggregate and validate stages.
std::string format_classified_csv(std::span<const CommuterRecord> records,
                                  std::span<const Station> stations);
/// Station ids are resolved against `stations`; unknown ids throw.
std::vector<CommuterRecord> parse_classified_csv(std::string_view text,
                                                 std::span<const Station> stations);

}  // namespace commute
