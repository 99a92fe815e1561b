#pragma once

// Layer 1: per-user spatial flow clusters (ISFC), temporal sub-clusters
// (ISTFC), neighbour merging and the two reliability filters.
//
// Clusters are connected components of the pairwise similarity graph. All
// outputs are ordered by the smallest member trip_ref, so they depend only on
// the set of input flows, not on the order they arrive in.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "commute/geo_time.hpp"
#include "commute/ingest.hpp"

namespace commute {

struct Flow {
  std::uint32_t trip_ref = 0;  // canonical trip index; unique within a run
  PlanarPoint origin;
  PlanarPoint destination;
  double len = 0.0;  // dist(origin, destination)
  TimeSpan span;
  Date date{};
};

Flow make_flow(std::uint32_t trip_ref, PlanarPoint o, PlanarPoint d, TimeSpan span, Date date);

/// Projects trips into flows; trip_ref runs first_ref, first_ref + 1, ...
std::vector<Flow> to_flows(std::span<const TripRecord> trips, const Projection& proj,
                           std::uint32_t first_ref = 0);

struct ClusterParams {
  double alpha = 0.3;
  double r_max = 200.0;  // metres; +inf reproduces the uncapped radius
  double beta = 30.0;    // minutes added to both ends of every span
  double ts_min = 0.5;
  double sd_max = 1.0;
  double isfc_weekday_fraction = 0.2;    // ISFC keeps n >= ceil(fraction * active weekdays)
  double istfc_parent_fraction = 0.3;    // ISTFC keeps n' >= fraction * n

  void validate() const;
};

/// Boundary-circle radius for two flow lengths: min(alpha * min(len), r_max).
double boundary_radius(double len_i, double len_j, const ClusterParams& p);

struct SimilarityScores {
  double sd_o = 0.0;
  double sd_d = 0.0;
  double sd = 0.0;
  double r = 0.0;

  bool similar(const ClusterParams& p) const { return sd <= p.sd_max; }
};

/// Throws commute::Error for a zero-length flow.
SimilarityScores spatial_similarity(const Flow& a, const Flow& b, const ClusterParams& p);

/// Jaccard overlap of the two spans after widening each by `beta` minutes on
/// both sides, measured on the 24 h circle.
double temporal_similarity(const TimeSpan& a, const TimeSpan& b, double beta);

/// The member point with the smallest summed distance to all others; ties go
/// to the lexicographically smallest (x, y). Throws on empty input.
PlanarPoint compute_medoid(std::span<const PlanarPoint> points);

struct ISFC {
  int isfc_id = 0;
  std::vector<std::uint32_t> members;  // indices into the user's flow list, ascending trip_ref
  PlanarPoint medoid_o;
  PlanarPoint medoid_d;
  double len = 0.0;

  std::size_t n() const { return members.size(); }
};

struct ISTFC {
  int isfc_id = 0;
  int istfc_id = 0;
  std::size_t parent_n = 0;  // n of the ISFC this cluster came from
  std::vector<std::uint32_t> members;
  PlanarPoint medoid_o;
  PlanarPoint medoid_d;
  double len = 0.0;
  TimeOfDay t_o;
  TimeOfDay t_d;

  std::size_t n_prime() const { return members.size(); }
  TimeSpan span() const { return span_between(t_o, t_d); }
};

/// Spatial clusters of one user's flows. Ids are 0.. in output order.
std::vector<ISFC> cluster_spatial(std::span<const Flow> flows, const ClusterParams& p);

/// max(1, ceil(fraction * active_weekdays)).
std::size_t isfc_min_size(int active_weekdays, const ClusterParams& p);
std::vector<ISFC> filter_reliable_isfc(std::vector<ISFC> isfcs, int active_weekdays,
                                       const ClusterParams& p);

/// Temporal sub-clusters of one ISFC. istfc ids are left at 0; callers number
/// them per user.
std::vector<ISTFC> cluster_temporal(std::span<const Flow> flows, const ISFC& isfc,
                                    const ClusterParams& p);

/// Recomputes medoids, length and mean times from `c.members`.
void refresh_aggregates(ISTFC& c, std::span<const Flow> flows);

/// Descending n', ties by ascending istfc_id.
void sort_by_size(std::vector<ISTFC>& clusters);

/// Single pass of neighbour merging over clusters sorted with sort_by_size.
/// The absorbing cluster's aggregates are refreshed after every absorption.
std::vector<ISTFC> merge_neighbor_istfcs(std::vector<ISTFC> clusters, std::span<const Flow> flows,
                                         const ClusterParams& p);

std::vector<ISTFC> filter_reliable_istfc(std::vector<ISTFC> clusters, const ClusterParams& p);

/// Everything Layer 1 produces for one user.
struct UserClusters {
  std::vector<ISFC> isfcs;           // all spatial clusters
  std::vector<ISFC> reliable_isfcs;  // after the weekday-fraction filter
  std::vector<ISTFC> raw_istfcs;     // temporal clusters before merging
  std::vector<ISTFC> merged_istfcs;  // after neighbour merging
  std::vector<ISTFC> istfcs;         // reliable, sorted with sort_by_size
};

UserClusters run_layer1(std::span<const Flow> flows, int active_weekdays, const ClusterParams& p);

}  // namespace commute
