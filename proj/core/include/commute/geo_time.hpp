#pragma once

// Planar geometry and time-of-day primitives shared by the whole pipeline.
//
// Coordinates enter as WGS84 lon/lat and are projected once, equirectangularly,
// about a reference point (the dataset centroid). All similarity math runs on
// the projected metres. Times of day are real minutes in [0, 1440).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace commute {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kMinutesPerDay = 1440.0;
inline constexpr double kMaxProjectionRangeM = 100'000.0;

struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(GeoPoint p);

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
  friend auto operator<=>(const PlanarPoint&, const PlanarPoint&) = default;
};

inline double dist(PlanarPoint p, PlanarPoint q) {
  return std::hypot(p.x - q.x, p.y - q.y);
}

inline PlanarPoint midpoint(PlanarPoint p, PlanarPoint q) {
  return {0.5 * (p.x + q.x), 0.5 * (p.y + q.y)};
}

/// Equirectangular projection about a fixed reference point.
class Projection {
 public:
  Projection() = default;
  explicit Projection(GeoPoint ref);

  GeoPoint reference() const { return ref_; }

  /// True when `p` is a valid coordinate within 100 km of the reference.
  bool in_range(GeoPoint p) const;

  /// Throws commute::Error when `p` is invalid or out of range.
  PlanarPoint project(GeoPoint p) const;
  GeoPoint unproject(PlanarPoint q) const;

 private:
  PlanarPoint project_unchecked(GeoPoint p) const;

  GeoPoint ref_{};
  double cos_ref_lat_ = 1.0;
};

inline PlanarPoint project(GeoPoint p, GeoPoint ref) {
  return Projection(ref).project(p);
}

// ---------------------------------------------------------------------------
// Time of day

struct TimeOfDay {
  double minutes = 0.0;

  friend bool operator==(const TimeOfDay&, const TimeOfDay&) = default;
  friend auto operator<=>(const TimeOfDay&, const TimeOfDay&) = default;
};

/// Maps any real minute count onto [0, 1440).
double wrap_minutes(double m);

inline TimeOfDay time_of_day(double minutes) { return {wrap_minutes(minutes)}; }

/// Signed shortest offset from `from` to `to`, in (-720, 720].
double circular_diff(TimeOfDay from, TimeOfDay to);

/// |circular_diff|, in [0, 720].
inline double circular_distance(TimeOfDay a, TimeOfDay b) {
  return std::abs(circular_diff(a, b));
}

/// Minutes travelled forward on the clock from `from` to reach `to`, [0, 1440).
double forward_gap(TimeOfDay from, TimeOfDay to);

/// Mean direction of the inputs on the 24 h circle. Inputs inside a 12 h
/// window give exactly their arithmetic mean (after unwrapping midnight).
/// Throws on empty input.
TimeOfDay circular_mean(std::span<const TimeOfDay> times);

/// A ride or activity interval. The end is start + end_offset and may wrap
/// past midnight.
struct TimeSpan {
  TimeOfDay start;
  double end_offset = 0.0;  // minutes, [0, 720]

  TimeOfDay end() const { return time_of_day(start.minutes + end_offset); }
};

/// Span from `start` forward to `end` on the clock.
TimeSpan span_between(TimeOfDay start, TimeOfDay end);

std::string format_hhmm(TimeOfDay t);

// ---------------------------------------------------------------------------
// Calendar and timestamps (local time, no zones)

using Date = std::chrono::sys_days;

/// Seconds since 1970-01-01T00:00:00 local.
using Timestamp = std::int64_t;

std::optional<Date> parse_date(std::string_view text);
/// Accepts `YYYY-MM-DD HH:MM:SS` and `YYYY/MM/DD HH:MM:SS`.
std::optional<Timestamp> parse_timestamp(std::string_view text);

std::string format_date(Date d);
std::string format_timestamp(Timestamp t);

Date date_of(Timestamp t);
TimeOfDay time_of(Timestamp t);
bool is_weekday(Date d);

// ---------------------------------------------------------------------------
// Polygons

struct Polygon {
  std::vector<PlanarPoint> vertices;  // open ring
};

/// >= 3 distinct vertices and non-zero area.
bool is_non_degenerate(const Polygon& poly);
/// No two non-adjacent edges touch.
bool is_simple(const Polygon& poly);

/// Winding-number containment; points on the boundary count as inside.
bool contains(const Polygon& poly, PlanarPoint p);

/// 0 when `p` is inside or on the boundary, otherwise the distance to the
/// nearest edge. Throws on a degenerate polygon.
double point_to_polygon_distance(PlanarPoint p, const Polygon& poly);

double point_segment_distance(PlanarPoint p, PlanarPoint a, PlanarPoint b);

}  // namespace commute
