#pragma once

// Trip, station, parcel and weather inputs; record cleaning; active-user
// selection.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "commute/geo_time.hpp"

namespace commute {

struct TripRecord {
  std::string user_id;
  Timestamp start = 0;
  Timestamp end = 0;
  GeoPoint origin;
  GeoPoint destination;

  double duration_minutes() const { return static_cast<double>(end - start) / 60.0; }

  friend bool operator==(const TripRecord&, const TripRecord&) = default;
};

/// Order by (user, start, end, origin, destination). Every pipeline stage
/// consumes trips in this order, which makes downstream ids reproducible.
bool canonical_less(const TripRecord& a, const TripRecord& b);

/// Reason code -> count.
using ReasonCounts = std::map<std::string, std::size_t>;

struct TripTable {
  std::vector<TripRecord> trips;
  std::size_t rows = 0;
  ReasonCounts rejected;
};

inline constexpr std::string_view kTripHeader =
    "user_id,start_time,start_lon,start_lat,end_time,end_lon,end_lat";

/// Parses the trip CSV. A missing or wrong header is fatal; malformed rows
/// are skipped and counted by reason.
TripTable parse_trips(std::string_view csv_text);
std::string format_trips(const std::vector<TripRecord>& trips);

struct CleaningConfig {
  double min_duration_min = 1.0;
  double max_duration_min = 120.0;
  double min_distance_m = 100.0;
  double max_distance_m = 15'000.0;
  double min_speed_kmh = 2.0;
  double max_speed_kmh = 25.0;

  /// Throws commute::Error unless every bound is positive and min < max.
  void validate() const;
};

struct FilterResult {
  std::vector<TripRecord> kept;
  ReasonCounts removed;
};

/// Drops trips outside the duration, straight-line distance and implied speed
/// windows (inclusive bounds), or outside the projection range. Each removed
/// trip is counted under the first failing reason, checked in the order
/// out_of_area, speed, duration, distance.
FilterResult filter_unrealistic(std::vector<TripRecord> trips, const CleaningConfig& cfg,
                                const Projection& proj);

/// Collapses exact duplicates within a user. Output is in canonical order.
std::vector<TripRecord> dedupe_user_trips(std::vector<TripRecord> trips);

struct Calendar {
  std::set<Date> study_weekdays;
  std::set<Date> rainy_days;  // subset of study_weekdays

  /// Weekdays (Mon-Fri) in [first, last]; rainy days outside that set are ignored.
  static Calendar from_range(Date first, Date last, const std::vector<Date>& rainy);
};

/// Drops trips that start on a day outside the study weekdays.
FilterResult restrict_to_calendar(std::vector<TripRecord> trips, const Calendar& cal);

/// max(1, floor(|weekdays| / 2) - |rainy days|).
int active_user_threshold(const Calendar& cal);

/// Distinct study weekdays carrying at least one trip, per user.
std::map<std::string, int> count_active_weekdays(const std::vector<TripRecord>& trips,
                                                 const Calendar& cal);

std::set<std::string> select_active_users(const std::vector<TripRecord>& trips,
                                          const Calendar& cal);

/// Rainy-day list: one `YYYY-MM-DD` per line; blank lines and `#` comments are
/// skipped, anything else malformed is fatal.
std::vector<Date> parse_rainy_days(std::string_view text);

/// Mean lon/lat of all trip endpoints; the projection reference.
GeoPoint trip_centroid(const std::vector<TripRecord>& trips);

// ---------------------------------------------------------------------------
// Stations and parcels

enum class TransitMode { metro, bus };

std::string_view to_string(TransitMode m);

struct Station {
  std::string id;
  GeoPoint location;
  PlanarPoint xy;
  TransitMode mode = TransitMode::metro;
  std::vector<std::string> routes;
};

struct ResidentialParcel {
  std::string id;
  Polygon boundary;  // projected
};

template <typename T>
struct Parsed {
  std::vector<T> items;
  ReasonCounts dropped;
};

/// GeoJSON FeatureCollection of Points (properties `mode`, `routes`), or CSV
/// with header `id,lon,lat,mode,routes` (routes `;`-separated). The format is
/// detected from the first non-blank character. Malformed JSON is fatal.
Parsed<Station> parse_stations(std::string_view text, const Projection& proj);

/// GeoJSON FeatureCollection of Polygons / MultiPolygons (outer rings only).
Parsed<ResidentialParcel> parse_parcels(std::string_view text, const Projection& proj);

}  // namespace commute
