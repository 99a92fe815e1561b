#include "commute/geo_time.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <limits>
#include <numbers>

#include "commute/error.hpp"

namespace commute {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cross(PlanarPoint o, PlanarPoint a, PlanarPoint b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(PlanarPoint p, PlanarPoint a, PlanarPoint b) {
  return cross(a, b, p) == 0.0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

int orientation(PlanarPoint a, PlanarPoint b, PlanarPoint c) {
  const double v = cross(a, b, c);
  return (v > 0.0) - (v < 0.0);
}

bool segments_intersect(PlanarPoint p1, PlanarPoint p2, PlanarPoint q1, PlanarPoint q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  return (o1 == 0 && on_segment(q1, p1, p2)) || (o2 == 0 && on_segment(q2, p1, p2)) ||
         (o3 == 0 && on_segment(p1, q1, q2)) || (o4 == 0 && on_segment(p2, q1, q2));
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<Date> parse_date_fields(std::string_view text, char sep) {
  if (text.size() != 10 || text[4] != sep || text[7] != sep) return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

}  // namespace

bool is_valid(GeoPoint p) {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180.0 && p.lon <= 180.0 &&
         p.lat >= -90.0 && p.lat <= 90.0;
}

Projection::Projection(GeoPoint ref) : ref_(ref), cos_ref_lat_(std::cos(ref.lat * kDegToRad)) {
  if (!is_valid(ref)) throw Error("projection reference is not a valid coordinate");
}

PlanarPoint Projection::project_unchecked(GeoPoint p) const {
  return {kEarthRadiusM * cos_ref_lat_ * (p.lon - ref_.lon) * kDegToRad,
          kEarthRadiusM * (p.lat - ref_.lat) * kDegToRad};
}

bool Projection::in_range(GeoPoint p) const {
  if (!is_valid(p)) return false;
  const PlanarPoint q = project_unchecked(p);
  return std::hypot(q.x, q.y) <= kMaxProjectionRangeM;
}

PlanarPoint Projection::project(GeoPoint p) const {
  if (!in_range(p)) throw Error("coordinate outside projection range");
  return project_unchecked(p);
}

GeoPoint Projection::unproject(PlanarPoint q) const {
  return {ref_.lon + q.x / (kEarthRadiusM * cos_ref_lat_) / kDegToRad,
          ref_.lat + q.y / kEarthRadiusM / kDegToRad};
}

double wrap_minutes(double m) {
  double r = std::fmod(m, kMinutesPerDay);
  if (r < 0.0) r += kMinutesPerDay;
  if (r >= kMinutesPerDay) r = 0.0;
  return r;
}

double circular_diff(TimeOfDay from, TimeOfDay to) {
  double d = wrap_minutes(to.minutes - from.minutes);
  if (d > kMinutesPerDay / 2) d -= kMinutesPerDay;
  return d;
}

double forward_gap(TimeOfDay from, TimeOfDay to) { return wrap_minutes(to.minutes - from.minutes); }

TimeOfDay circular_mean(std::span<const TimeOfDay> times) {
  if (times.empty()) throw Error("circular_mean of an empty set");
  double s = 0.0;
  double c = 0.0;
  for (const TimeOfDay t : times) {
    const double theta = t.minutes / kMinutesPerDay * 2.0 * std::numbers::pi;
    s += std::sin(theta);
    c += std::cos(theta);
  }
  // A vanishing resultant has no direction; fall back to the first sample.
  double anchor = times.front().minutes;
  if (std::hypot(s, c) > 1e-9 * static_cast<double>(times.size())) {
    anchor = wrap_minutes(std::atan2(s, c) / (2.0 * std::numbers::pi) * kMinutesPerDay);
  }
  // Shift each sample by whole days onto the anchor's half-circle, then take
  // the plain mean. Whole-day shifts are exact, so in-window inputs reproduce
  // their arithmetic mean bit for bit.
  double sum = 0.0;
  for (const TimeOfDay t : times) {
    double u = t.minutes;
    if (u - anchor > kMinutesPerDay / 2) u -= kMinutesPerDay;
    else if (anchor - u > kMinutesPerDay / 2) u += kMinutesPerDay;
    sum += u;
  }
  return time_of_day(sum / static_cast<double>(times.size()));
}

TimeSpan span_between(TimeOfDay start, TimeOfDay end) { return {start, forward_gap(start, end)}; }

std::string format_hhmm(TimeOfDay t) {
  const long total = std::lround(t.minutes) % 1440;
  std::array<char, 8> buf{};
  std::snprintf(buf.data(), buf.size(), "%02ld:%02ld", total / 60, total % 60);
  return buf.data();
}

std::optional<Date> parse_date(std::string_view text) { return parse_date_fields(text, '-'); }

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (text.size() != 19 || text[10] != ' ' || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  auto date = parse_date_fields(text.substr(0, 10), text[4] == '/' ? '/' : '-');
  if (!date) return std::nullopt;
  int hh = 0;
  int mm = 0;
  int ss = 0;
  if (!parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm) ||
      !parse_int(text.substr(17, 2), ss)) {
    return std::nullopt;
  }
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) return std::nullopt;
  const std::int64_t days = date->time_since_epoch().count();
  return days * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf.data();
}

std::string format_timestamp(Timestamp t) {
  const Date d = date_of(t);
  const std::int64_t secs = t - d.time_since_epoch().count() * std::int64_t{86400};
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), " %02d:%02d:%02d", static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return format_date(d) + buf.data();
}

Date date_of(Timestamp t) {
  std::int64_t days = t / 86400;
  if (t % 86400 < 0) --days;
  return Date{std::chrono::days{days}};
}

TimeOfDay time_of(Timestamp t) {
  const std::int64_t secs = t - date_of(t).time_since_epoch().count() * std::int64_t{86400};
  return {static_cast<double>(secs) / 60.0};
}

bool is_weekday(Date d) {
  const std::chrono::weekday wd{d};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

bool is_non_degenerate(const Polygon& poly) {
  const auto& v = poly.vertices;
  if (v.size() < 3) return false;
  std::vector<PlanarPoint> distinct(v.begin(), v.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) return false;
  double area2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const PlanarPoint a = v[i];
    const PlanarPoint b = v[(i + 1) % v.size()];
    area2 += a.x * b.y - b.x * a.y;
  }
  return std::isfinite(area2) && area2 != 0.0;
}

bool is_simple(const Polygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool contains(const Polygon& poly, PlanarPoint p) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  int winding = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const PlanarPoint a = v[i];
    const PlanarPoint b = v[(i + 1) % n];
    if (on_segment(p, a, b)) return true;
    if (a.y <= p.y) {
      if (b.y > p.y && cross(a, b, p) > 0.0) ++winding;
    } else if (b.y <= p.y && cross(a, b, p) < 0.0) {
      --winding;
    }
  }
  return winding != 0;
}

double point_segment_distance(PlanarPoint p, PlanarPoint a, PlanarPoint b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return dist(p, a);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return dist(p, {a.x + t * dx, a.y + t * dy});
}

double point_to_polygon_distance(PlanarPoint p, const Polygon& poly) {
  if (!is_non_degenerate(poly)) throw Error("degenerate polygon");
  if (contains(poly, p)) return 0.0;
  const auto& v = poly.vertices;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    best = std::min(best, point_segment_distance(p, v[i], v[(i + 1) % v.size()]));
  }
  return best;
}

}  // namespace commute
