#pragma once

// Population-level analytics over classified commuters: residence validation
// against land-use parcels, characteristic histograms, station usage and
// pooled home-work flow clusters.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "commute/commute_mine.hpp"
#include "commute/flow_cluster.hpp"
#include "commute/ingest.hpp"

namespace commute {

struct ValidationCurve {
  std::vector<double> thresholds;      // metres
  std::vector<double> cumulative_pct;  // fraction of homes within each threshold
  std::size_t users = 0;
};

/// Distance from each known home to the nearest parcel (0 inside), in record
/// order; records without a home are skipped. Throws when `parcels` is empty.
std::vector<double> residence_distances(std::span<const CommuterRecord> records,
                                        std::span<const ResidentialParcel> parcels);

ValidationCurve validate_residences(std::span<const CommuterRecord> records,
                                    std::span<const ResidentialParcel> parcels,
                                    double step_m = 10.0, double max_m = 300.0);

/// Fixed-width histogram; bin k covers [k * width, (k + 1) * width).
class Histogram {
 public:
  explicit Histogram(double width = 1.0) : width_(width) {}

  void add(double v);
  double width() const { return width_; }
  std::size_t total() const { return total_; }
  const std::map<std::int64_t, std::size_t>& counts() const { return counts_; }
  double fraction(std::int64_t bin) const;

 private:
  double width_;
  std::size_t total_ = 0;
  std::map<std::int64_t, std::size_t> counts_;
};

struct HistogramBins {
  double time_min = 15.0;
  double ct_min = 2.0;
  double cd_m = 200.0;
  double wh_min = 30.0;
  double r_rt = 0.05;
};

struct SummaryTables {
  std::map<CommuterCategory, std::size_t> counts;
  std::map<CommuterCategory, double> shares;
  // metric -> category -> histogram. Metrics: ct_e, ct_l, cd, wh, r_rt, t_e, t_l.
  std::map<std::string, std::map<CommuterCategory, Histogram>> histograms;
};

/// Duration and distance only for categories with a complete chain
/// (OnlyBiking, BikingTransitBiking); working hours for every category but
/// BikingTransit.
SummaryTables summarize_commuters(std::span<const CommuterRecord> records,
                                  const HistogramBins& bins = {});

struct StationCounts {
  std::size_t bike_to_transit = 0;
  std::size_t transit_to_bike = 0;
};

/// Keyed by station index. Biking-transit-biking commuters count once at each
/// of their two stations.
std::map<std::size_t, StationCounts> station_usage(std::span<const CommuterRecord> records);

struct CommuteFlowCluster {
  CommuterCategory category = CommuterCategory::OnlyBiking;
  std::vector<std::string> users;  // ascending
  PlanarPoint medoid_home;
  PlanarPoint medoid_work;
  double len = 0.0;

  std::size_t n() const { return users.size(); }
};

/// One home->work flow per record with both ends known, clustered spatially
/// within each category. Ordered by category, then by first member.
std::vector<CommuteFlowCluster> cluster_commute_flows(std::span<const CommuterRecord> records,
                                                      const ClusterParams& p);

}  // namespace commute
