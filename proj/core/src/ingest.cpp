#include "commute/ingest.hpp"

#include <algorithm>
#include <tuple>

#include <json.hpp>

#include "commute/csv.hpp"
#include "commute/error.hpp"

namespace commute {

using nlohmann::json;

bool canonical_less(const TripRecord& a, const TripRecord& b) {
  return std::tie(a.user_id, a.start, a.end, a.origin.lon, a.origin.lat, a.destination.lon,
                  a.destination.lat) < std::tie(b.user_id, b.start, b.end, b.origin.lon,
                                                b.origin.lat, b.destination.lon, b.destination.lat);
}

TripTable parse_trips(std::string_view csv_text) {
  TripTable table;
  LineCursor cursor(csv_text);
  std::string_view line;
  if (!cursor.next(line)) throw Error("trip table is empty (missing header)");
  if (trim(line) != kTripHeader) {
    throw Error("unexpected trip header: '" + std::string(line) + "'");
  }
  std::vector<std::string_view> f;
  while (cursor.next(line)) {
    if (trim(line).empty()) continue;
    ++table.rows;
    split_simple(line, f);
    if (f.size() != 7) {
      ++table.rejected["field_count"];
      continue;
    }
    const std::string_view user = trim(f[0]);
    if (user.empty()) {
      ++table.rejected["empty_user"];
      continue;
    }
    const auto start = parse_timestamp(trim(f[1]));
    const auto end = parse_timestamp(trim(f[4]));
    if (!start || !end) {
      ++table.rejected["bad_timestamp"];
      continue;
    }
    const auto olon = parse_double(f[2]);
    const auto olat = parse_double(f[3]);
    const auto dlon = parse_double(f[5]);
    const auto dlat = parse_double(f[6]);
    if (!olon || !olat || !dlon || !dlat) {
      ++table.rejected["bad_coordinate"];
      continue;
    }
    TripRecord rec{std::string(user), *start, *end, {*olon, *olat}, {*dlon, *dlat}};
    if (!is_valid(rec.origin) || !is_valid(rec.destination)) {
      ++table.rejected["coordinate_range"];
      continue;
    }
    if (rec.end <= rec.start) {
      ++table.rejected["non_positive_duration"];
      continue;
    }
    table.trips.push_back(std::move(rec));
  }
  return table;
}

std::string format_trips(const std::vector<TripRecord>& trips) {
  std::string out(kTripHeader);
  out += '\n';
  out.reserve(out.size() + trips.size() * 96);
  for (const TripRecord& t : trips) {
    out += csv_field(t.user_id);
    out += ',';
    out += format_timestamp(t.start);
    out += ',';
    out += fixed(t.origin.lon, 6);
    out += ',';
    out += fixed(t.origin.lat, 6);
    out += ',';
    out += format_timestamp(t.end);
    out += ',';
    out += fixed(t.destination.lon, 6);
    out += ',';
    out += fixed(t.destination.lat, 6);
    out += '\n';
  }
  return out;
}

void CleaningConfig::validate() const {
  const auto check = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0) || !(hi > lo)) {
      throw Error(std::string("cleaning bounds for ") + what + " must satisfy 0 < min < max");
    }
  };
  check(min_duration_min, max_duration_min, "duration");
  check(min_distance_m, max_distance_m, "distance");
  check(min_speed_kmh, max_speed_kmh, "speed");
  if (max_duration_min > 720.0) throw Error("max duration may not exceed 720 minutes");
}

FilterResult filter_unrealistic(std::vector<TripRecord> trips, const CleaningConfig& cfg,
                                const Projection& proj) {
  cfg.validate();
  FilterResult result;
  result.kept.reserve(trips.size());
  for (TripRecord& t : trips) {
    if (!proj.in_range(t.origin) || !proj.in_range(t.destination)) {
      ++result.removed["out_of_area"];
      continue;
    }
    const double minutes = t.duration_minutes();
    const double meters = dist(proj.project(t.origin), proj.project(t.destination));
    const double kmh = (meters / 1000.0) / (minutes / 60.0);
    if (!(kmh >= cfg.min_speed_kmh && kmh <= cfg.max_speed_kmh)) {
      ++result.removed["speed"];
      continue;
    }
    if (minutes < cfg.min_duration_min || minutes > cfg.max_duration_min) {
      ++result.removed["duration"];
      continue;
    }
    if (meters < cfg.min_distance_m || meters > cfg.max_distance_m) {
      ++result.removed["distance"];
      continue;
    }
    result.kept.push_back(std::move(t));
  }
  return result;
}

std::vector<TripRecord> dedupe_user_trips(std::vector<TripRecord> trips) {
  std::sort(trips.begin(), trips.end(), canonical_less);
  trips.erase(std::unique(trips.begin(), trips.end()), trips.end());
  return trips;
}

Calendar Calendar::from_range(Date first, Date last, const std::vector<Date>& rainy) {
  Calendar cal;
  for (Date d = first; d <= last; d += std::chrono::days{1}) {
    if (is_weekday(d)) cal.study_weekdays.insert(d);
  }
  for (const Date d : rainy) {
    if (cal.study_weekdays.contains(d)) cal.rainy_days.insert(d);
  }
  return cal;
}

FilterResult restrict_to_calendar(std::vector<TripRecord> trips, const Calendar& cal) {
  FilterResult result;
  result.kept.reserve(trips.size());
  for (TripRecord& t : trips) {
    if (!cal.study_weekdays.contains(date_of(t.start))) {
      ++result.removed["outside_calendar"];
      continue;
    }
    result.kept.push_back(std::move(t));
  }
  return result;
}

int active_user_threshold(const Calendar& cal) {
  const int half = static_cast<int>(cal.study_weekdays.size() / 2);
  return std::max(1, half - static_cast<int>(cal.rainy_days.size()));
}

std::map<std::string, int> count_active_weekdays(const std::vector<TripRecord>& trips,
                                                 const Calendar& cal) {
  std::map<std::string, std::set<Date>> days;
  for (const TripRecord& t : trips) {
    const Date d = date_of(t.start);
    if (cal.study_weekdays.contains(d)) days[t.user_id].insert(d);
  }
  std::map<std::string, int> counts;
  for (const auto& [user, set] : days) counts.emplace(user, static_cast<int>(set.size()));
  return counts;
}

std::set<std::string> select_active_users(const std::vector<TripRecord>& trips,
                                          const Calendar& cal) {
  const int threshold = active_user_threshold(cal);
  std::set<std::string> active;
  for (const auto& [user, count] : count_active_weekdays(trips, cal)) {
    if (count >= threshold) active.insert(user);
  }
  return active;
}

std::vector<Date> parse_rainy_days(std::string_view text) {
  std::vector<Date> days;
  LineCursor cursor(text);
  std::string_view line;
  while (cursor.next(line)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto d = parse_date(line);
    if (!d) {
      throw Error("rainy-day file line " + std::to_string(cursor.line_number()) +
                  ": expected YYYY-MM-DD, got '" + std::string(line) + "'");
    }
    days.push_back(*d);
  }
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  return days;
}

GeoPoint trip_centroid(const std::vector<TripRecord>& trips) {
  if (trips.empty()) throw Error("cannot take the centroid of an empty trip set");
  double lon = 0.0;
  double lat = 0.0;
  for (const TripRecord& t : trips) {
    lon += t.origin.lon + t.destination.lon;
    lat += t.origin.lat + t.destination.lat;
  }
  const double n = 2.0 * static_cast<double>(trips.size());
  return {lon / n, lat / n};
}

// ---------------------------------------------------------------------------

std::string_view to_string(TransitMode m) { return m == TransitMode::metro ? "metro" : "bus"; }

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string(what) + ": malformed JSON: " + e.what());
  }
}

const json& features_of(const json& doc, const char* what) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw Error(std::string(what) + ": expected a GeoJSON FeatureCollection");
  }
  return doc["features"];
}

std::string feature_id(const json& feature, const std::string& fallback) {
  const json* candidates[] = {
      feature.contains("properties") && feature["properties"].is_object() &&
              feature["properties"].contains("id")
          ? &feature["properties"]["id"]
          : nullptr,
      feature.contains("id") ? &feature["id"] : nullptr,
  };
  for (const json* c : candidates) {
    if (c == nullptr) continue;
    if (c->is_string()) return c->get<std::string>();
    if (c->is_number_integer()) return std::to_string(c->get<long long>());
  }
  return fallback;
}

std::optional<TransitMode> parse_mode(std::string_view s) {
  if (s == "metro") return TransitMode::metro;
  if (s == "bus") return TransitMode::bus;
  return std::nullopt;
}

Parsed<Station> parse_stations_geojson(std::string_view text, const Projection& proj) {
  Parsed<Station> out;
  const json doc = parse_json(text, "stations");
  std::size_t index = 0;
  for (const json& f : features_of(doc, "stations")) {
    const std::string fallback = "S" + std::to_string(index++);
    if (!f.contains("geometry") || !f["geometry"].is_object() ||
        f["geometry"].value("type", "") != "Point") {
      ++out.dropped["not_a_point"];
      continue;
    }
    const json& coords = f["geometry"]["coordinates"];
    if (!coords.is_array() || coords.size() < 2 || !coords[0].is_number() ||
        !coords[1].is_number()) {
      ++out.dropped["bad_coordinates"];
      continue;
    }
    const json props = f.contains("properties") && f["properties"].is_object()
                           ? f["properties"]
                           : json::object();
    if (!props.contains("mode") || !props["mode"].is_string()) {
      ++out.dropped["missing_mode"];
      continue;
    }
    const auto mode = parse_mode(props["mode"].get<std::string>());
    if (!mode) {
      ++out.dropped["invalid_mode"];
      continue;
    }
    const GeoPoint loc{coords[0].get<double>(), coords[1].get<double>()};
    if (!proj.in_range(loc)) {
      ++out.dropped["out_of_range"];
      continue;
    }
    Station s;
    s.id = feature_id(f, fallback);
    s.location = loc;
    s.xy = proj.project(loc);
    s.mode = *mode;
    if (props.contains("routes") && props["routes"].is_array()) {
      for (const json& r : props["routes"]) {
        s.routes.push_back(r.is_string() ? r.get<std::string>() : r.dump());
      }
    }
    out.items.push_back(std::move(s));
  }
  return out;
}

Parsed<Station> parse_stations_csv(std::string_view text, const Projection& proj) {
  Parsed<Station> out;
  LineCursor cursor(text);
  std::string_view line;
  if (!cursor.next(line) || trim(line) != "id,lon,lat,mode,routes") {
    throw Error("stations CSV: expected header id,lon,lat,mode,routes");
  }
  while (cursor.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      ++out.dropped["field_count"];
      continue;
    }
    const auto lon = parse_double(f[1]);
    const auto lat = parse_double(f[2]);
    if (!lon || !lat) {
      ++out.dropped["bad_coordinates"];
      continue;
    }
    if (trim(f[3]).empty()) {
      ++out.dropped["missing_mode"];
      continue;
    }
    const auto mode = parse_mode(trim(f[3]));
    if (!mode) {
      ++out.dropped["invalid_mode"];
      continue;
    }
    const GeoPoint loc{*lon, *lat};
    if (!proj.in_range(loc)) {
      ++out.dropped["out_of_range"];
      continue;
    }
    Station s;
    s.id = std::string(trim(f[0]));
    s.location = loc;
    s.xy = proj.project(loc);
    s.mode = *mode;
    std::string_view routes = trim(f[4]);
    while (!routes.empty()) {
      const std::size_t semi = routes.find(';');
      const std::string_view r = trim(routes.substr(0, semi));
      if (!r.empty()) s.routes.emplace_back(r);
      if (semi == std::string_view::npos) break;
      routes.remove_prefix(semi + 1);
    }
    out.items.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Parsed<Station> parse_stations(std::string_view text, const Projection& proj) {
  const std::string_view body = trim(text);
  const std::size_t first = body.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && body[first] == '{') {
    return parse_stations_geojson(text, proj);
  }
  return parse_stations_csv(text, proj);
}

Parsed<ResidentialParcel> parse_parcels(std::string_view text, const Projection& proj) {
  Parsed<ResidentialParcel> out;
  const json doc = parse_json(text, "parcels");
  std::size_t index = 0;
  for (const json& f : features_of(doc, "parcels")) {
    const std::string base = feature_id(f, "P" + std::to_string(index++));
    if (!f.contains("geometry") || !f["geometry"].is_object()) {
      ++out.dropped["missing_geometry"];
      continue;
    }
    const json& geom = f["geometry"];
    const std::string type = geom.value("type", "");
    std::vector<const json*> polygons;
    if (type == "Polygon") {
      polygons.push_back(&geom["coordinates"]);
    } else if (type == "MultiPolygon" && geom["coordinates"].is_array()) {
      for (const json& p : geom["coordinates"]) polygons.push_back(&p);
    } else {
      ++out.dropped["not_a_polygon"];
      continue;
    }
    for (std::size_t k = 0; k < polygons.size(); ++k) {
      const json& rings = *polygons[k];
      if (!rings.is_array() || rings.empty() || !rings[0].is_array()) {
        ++out.dropped["bad_coordinates"];
        continue;
      }
      Polygon poly;
      bool ok = true;
      for (const json& c : rings[0]) {
        if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
          ok = false;
          break;
        }
        const GeoPoint g{c[0].get<double>(), c[1].get<double>()};
        if (!proj.in_range(g)) {
          ok = false;
          break;
        }
        poly.vertices.push_back(proj.project(g));
      }
      if (!ok) {
        ++out.dropped["bad_coordinates"];
        continue;
      }
      if (poly.vertices.size() > 1 && poly.vertices.front() == poly.vertices.back()) {
        poly.vertices.pop_back();
      }
      if (!is_non_degenerate(poly)) {
        ++out.dropped["degenerate"];
        continue;
      }
      if (!is_simple(poly)) {
        ++out.dropped["self_intersecting"];
        continue;
      }
      std::string id = polygons.size() > 1 ? base + "#" + std::to_string(k) : base;
      out.items.push_back({std::move(id), std::move(poly)});
    }
  }
  return out;
}

}  // namespace commute
