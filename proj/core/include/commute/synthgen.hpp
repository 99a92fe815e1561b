#pragma once

// Seeded synthetic city and trip generator with ground truth, and a scorer
// that compares classified commuters against it.
//
// Every user draws from its own substream seeded by (seed, user_id), so the
// output is identical for any worker count. Coordinates are rounded to 1e-6
// degrees before use, which makes the CSV round trip exact.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "commute/commute_mine.hpp"
#include "commute/geo_time.hpp"
#include "commute/ingest.hpp"

namespace commute {

struct SynthConfig {
  std::uint64_t seed = 42;

  int n_only_biking = 600;
  int n_biking_transit = 170;
  int n_transit_biking = 110;
  int n_biking_transit_biking = 20;
  int n_noise = 100;

  int n_metro_stations = 40;
  int n_bus_stations = 80;
  int n_parcels = 400;
  int n_job_centers = 12;

  int study_weekdays = 100;
  int rainy_days = 21;
  std::string start_date = "2021-04-08";

  double spatial_jitter_sd = 30.0;   // metres, per coordinate
  double temporal_jitter_sd = 10.0;  // minutes
  double skip_prob_per_leg = 0.15;
  double mean_trips_per_active_day = 3.6;

  GeoPoint center{114.05, 22.55};
  double city_size_m = 10'000.0;
  double active_prob_dry = 0.85;
  double active_prob_rainy = 0.3;
  double bus_transfer_share = 0.1;  // share of transfer users assigned a bus stop
  double to_work_mean = 495.0;      // 08:15
  double back_home_mean = 1110.0;   // 18:30
  double departure_spread_sd = 20.0;
  double station_clearance_m = 150.0;

  /// Throws commute::Error on negative counts or jitters, or probabilities
  /// outside [0, 1].
  void validate() const;
  int n_commuters() const {
    return n_only_biking + n_biking_transit + n_transit_biking + n_biking_transit_biking;
  }
};

enum class LegRole { to_work, back_home, to_station, from_station, errand, noise };

std::string_view to_string(LegRole r);

struct TruthUser {
  std::string user_id;
  std::optional<CommuterCategory> category;  // empty for noise users
  GeoPoint home;
  GeoPoint work;
  std::optional<std::string> home_station;  // bike-to-transit station id
  std::optional<std::string> work_station;  // transit-to-bike station id
  double wh = 0.0;                          // minutes at work

  // Behaviour parameters used by generate_trips.
  TransitMode mode = TransitMode::metro;
  GeoPoint home_dock;  // where the bike is left near home_station
  GeoPoint work_dock;
  double depart_morning = 0.0;  // minutes of day
  double depart_evening = 0.0;
  double speed_kmh = 12.0;
  double transit_min = 0.0;  // station to station, BikingTransitBiking only
  double access_min = 0.0;   // unobserved transit part for single-transfer users
  std::vector<GeoPoint> favourites;
};

struct GroundTruth {
  std::vector<TruthUser> users;  // ascending user_id
  Calendar calendar;
  std::vector<Date> rainy_days;
};

struct SynthCity {
  Projection projection;  // generator frame about cfg.center
  std::vector<Station> stations;
  std::vector<ResidentialParcel> parcels;
  std::vector<Polygon> parcel_lonlat;  // same parcels, vertices as (lon, lat)
  std::vector<PlanarPoint> job_centers;
  GroundTruth truth;
};

/// Throws commute::Error when the counts cannot be met, e.g. transfer users
/// without stations.
SynthCity generate_city(const SynthConfig& cfg);

struct SynthTrips {
  std::vector<TripRecord> trips;  // ascending start, then canonical order
  std::vector<LegRole> roles;     // roles[i] belongs to trips[i]
};

SynthTrips generate_trips(const SynthCity& city, const SynthConfig& cfg, int workers = 1);

/// Writes trips.csv, stations.geojson, parcels.geojson, rainy_days.txt,
/// ground_truth.csv and ground_truth_trips.csv.
void write_synth_outputs(const SynthCity& city, const SynthTrips& trips,
                         const std::filesystem::path& out_dir);

std::string format_stations_geojson(std::span<const Station> stations);
std::string format_parcels_geojson(const SynthCity& city);
std::string format_ground_truth_csv(const GroundTruth& gt);
/// Reads ground_truth.csv back (locations and labels only).
std::vector<TruthUser> parse_ground_truth_csv(std::string_view text);

struct CategoryScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 1.0;
  double recall = 1.0;
};

struct RecoveryMetrics {
  std::size_t commuters = 0;    // true commuters
  std::size_t noise_users = 0;
  std::size_t predicted = 0;
  std::map<CommuterCategory, CategoryScore> per_category;
  double category_accuracy = 1.0;    // over true commuters
  double position_hit_rate = 1.0;    // over true commuters
  double max_position_error_m = 0.0;  // over located ends that were predicted
  double noise_fpr = 0.0;
  double station_match_rate = 1.0;   // over true transfer commuters
};

/// `predicted` station indices refer to `stations`; positions are compared in
/// `proj`. Throws when a predicted user is missing from the ground truth.
RecoveryMetrics score_recovery(std::span<const CommuterRecord> predicted,
                               std::span<const Station> stations,
                               std::span<const TruthUser> truth, const Projection& proj,
                               double tol_m);

std::string format_metrics_csv(const RecoveryMetrics& m);

}  // namespace commute
