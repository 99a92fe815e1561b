#pragma once

// Stage orchestration. The in-memory functions are what `all` runs; the
// subcommand runner adds file I/O, stage stamps and the run manifest.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "commute/config.hpp"
#include "commute/export.hpp"
#include "commute/synthgen.hpp"

namespace commute {

struct PipelineInputs {
  TripTable trips;
  std::vector<Date> rainy_days;
  std::string stations_text;  // empty: no transfer detection
  std::string parcels_text;   // empty: no residence validation
  std::optional<std::vector<TruthUser>> truth;
};

/// Reads the files named in `cfg`. Only the trip file is mandatory.
PipelineInputs load_inputs(const RunConfig& cfg);

struct IngestResult {
  Projection projection;
  Calendar calendar;
  std::vector<TripRecord> trips;  // active users only, canonical order
  std::map<std::string, int> active_weekdays;
  std::size_t rows_in = 0;
  std::vector<std::pair<std::string, ReasonCounts>> report;  // stage -> removals by reason
};

IngestResult run_ingest(const TripTable& table, const std::vector<Date>& rainy, const RunConfig& cfg);
std::string format_cleaning_report(const IngestResult& r);

/// Layer 1 per user; trip_ref is the trip's index in `in.trips`.
std::vector<UserLayer1> run_clustering(const IngestResult& in, const ClusterParams& p, int workers);

/// The reliable ISTFCs of every user, as read by Layer 2.
std::vector<UserIstfcs> reliable_istfcs(std::span<const UserLayer1> users);

/// Commuter records in ascending user_id order.
std::vector<CommuterRecord> run_classification(std::span<const UserIstfcs> users,
                                               const ClusterParams& cp, const DecisionParams& dp,
                                               const StationIndex& stations, int workers);

AnalysisResults run_aggregation(std::vector<CommuterRecord> records, const Projection& proj,
                                std::vector<Station> stations,
                                std::span<const ResidentialParcel> parcels, const RunConfig& cfg,
                                bool validate);

struct Layer1Indicators {
  std::size_t isfcs = 0;  // reliable ISFCs
  double avg_isfc_records = 0.0;
  double avg_isfc_len_m = 0.0;
  // Mean member distance to the cluster medoid origin / destination, pooled
  // over member flows; the od column averages the two.
  double avg_dist_o_m = 0.0;
  double avg_dist_d_m = 0.0;
  double avg_dist_od_m = 0.0;
  double avg_dist_od_gt1500_m = 0.0;  // ISFCs longer than 1500 m
  double avg_dist_od_gt3000_m = 0.0;
  std::size_t istfcs = 0;  // after neighbour merging, before the reliability filter
  double avg_istfc_records = 0.0;
  double avg_max_interval_min = 0.0;  // smallest arc of the day covering all member departures
};

Layer1Indicators layer1_indicators(std::span<const UserLayer1> users);

struct CompareRow {
  std::string variant;
  ClusterParams params;
  Layer1Indicators indicators;
};

/// Improved parameters, uncapped radius, the original method (uncapped and
/// beta = 0), and one row per swept beta.
std::vector<CompareRow> run_compare(const IngestResult& in, const RunConfig& cfg);
std::string format_compare_csv(std::span<const CompareRow> rows);

struct PipelineResult {
  IngestResult ingest;
  std::vector<UserLayer1> layer1;
  AnalysisResults analysis;
  std::optional<RecoveryMetrics> metrics;
  ReasonCounts dropped_stations;
  ReasonCounts dropped_parcels;
};

PipelineResult run_pipeline(const PipelineInputs& inputs, const RunConfig& cfg);

struct CommandLine {
  std::string subcommand;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

inline constexpr std::string_view kSubcommands[] = {"synth",     "ingest",   "cluster", "classify",
                                                    "aggregate", "validate", "all",     "compare"};

/// Runs one subcommand. Returns the process exit status; errors go to `err`.
int run_command(const CommandLine& cmd, std::ostream& log, std::ostream& err);

}  // namespace commute
