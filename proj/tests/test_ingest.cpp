#include <gtest/gtest.h>

#include <string>

#include "commute/error.hpp"
#include "commute/ingest.hpp"

using namespace commute;

namespace {

std::string header() { return std::string(kTripHeader) + "\n"; }

TripRecord trip(const std::string& user, const std::string& start, double minutes, GeoPoint o,
                GeoPoint d) {
  const Timestamp s = *parse_timestamp(start);
  return {user, s, s + static_cast<Timestamp>(minutes * 60), o, d};
}

Calendar weekdays(int n, int rainy) {
  Date first = *parse_date("2021-04-05");  // Monday
  std::vector<Date> days;
  Date d = first;
  while (static_cast<int>(days.size()) < n) {
    if (is_weekday(d)) days.push_back(d);
    d += std::chrono::days{1};
  }
  std::vector<Date> wet(days.begin(), days.begin() + rainy);
  return Calendar::from_range(days.front(), days.back(), wet);
}

}  // namespace

TEST(ParseTrips, ExampleRow) {
  const TripTable t = parse_trips(header() +
                                  "9fb2d1ec,2021-04-08 13:19:32,114.0082,22.6392,2021-04-08 "
                                  "13:23:18,114.0104,22.6348\n");
  ASSERT_EQ(t.trips.size(), 1u);
  EXPECT_EQ(t.trips[0].end - t.trips[0].start, 3 * 60 + 46);
  EXPECT_EQ(t.trips[0].origin, (GeoPoint{114.0082, 22.6392}));
}

TEST(ParseTrips, BadRowsAreCountedAndSkipped) {
  const TripTable t = parse_trips(header() +
                                  "a,2021-04-08 08:00:00,114.0,95.0,2021-04-08 08:10:00,114.01,22.6\n"
                                  "b,2021-04-08 08:10:00,114.0,22.6,2021-04-08 08:00:00,114.01,22.6\n"
                                  "c,2021-04-08 08:00:00,114.0,22.6\n"
                                  "d,yesterday,114.0,22.6,2021-04-08 08:10:00,114.01,22.6\n"
                                  "e,2021-04-08 08:00:00,abc,22.6,2021-04-08 08:10:00,114.01,22.6\n"
                                  "f,2021-04-08 08:00:00,114.0,22.6,2021-04-08 08:10:00,114.01,22.6\n");
  EXPECT_EQ(t.rows, 6u);
  EXPECT_EQ(t.trips.size(), 1u);
  EXPECT_EQ(t.rejected.at("coordinate_range"), 1u);
  EXPECT_EQ(t.rejected.at("non_positive_duration"), 1u);
  EXPECT_EQ(t.rejected.at("field_count"), 1u);
  EXPECT_EQ(t.rejected.at("bad_timestamp"), 1u);
  EXPECT_EQ(t.rejected.at("bad_coordinate"), 1u);
}

TEST(ParseTrips, WrongHeaderIsFatal) {
  EXPECT_THROW(parse_trips("user,start\n"), Error);
  EXPECT_THROW(parse_trips(""), Error);
}

TEST(ParseTrips, RoundTripsThroughFormat) {
  const std::vector<TripRecord> trips{
      trip("u1", "2021-04-08 08:00:00", 10, {114.001234, 22.501234}, {114.011234, 22.511234})};
  EXPECT_EQ(parse_trips(format_trips(trips)).trips, trips);
}

TEST(FilterUnrealistic, DefaultWindows) {
  const Projection proj({114.0, 22.5});
  CleaningConfig cfg;
  // 1.5 km east is about 0.01458 degrees of longitude at this latitude.
  const double dlon = 1500.0 / (6'371'000.0 * std::cos(22.5 * 3.14159265358979 / 180.0)) * 180.0 /
                      3.14159265358979;
  std::vector<TripRecord> in{
      trip("ok", "2021-04-08 08:00:00", 10, {114.0, 22.5}, {114.0 + dlon, 22.5}),
      trip("fast", "2021-04-08 08:00:00", 0.5, {114.0, 22.5}, {114.0 + dlon * 10 / 3, 22.5}),
      trip("long", "2021-04-08 08:00:00", 300, {114.0, 22.5}, {114.0 + dlon * 10, 22.5}),
      trip("quick", "2021-04-08 08:00:00", 3, {114.0, 22.5}, {114.0 + dlon * 10 / 3, 22.5}),
  };
  const FilterResult r = filter_unrealistic(in, cfg, proj);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].user_id, "ok");
  EXPECT_EQ(r.removed.at("speed"), 2u);
  EXPECT_EQ(r.removed.at("duration"), 1u);
  std::size_t removed = 0;
  for (const auto& [reason, n] : r.removed) removed += n;
  EXPECT_EQ(removed + r.kept.size(), in.size());
}

TEST(FilterUnrealistic, InvalidConfigThrows) {
  CleaningConfig cfg;
  cfg.min_speed_kmh = 30;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Dedupe, CollapsesExactDuplicatesOnly) {
  const TripRecord a = trip("u", "2021-04-08 08:00:00", 10, {114.0, 22.5}, {114.01, 22.5});
  const TripRecord b = trip("u", "2021-04-08 08:00:00", 10, {114.0, 22.5}, {114.02, 22.5});
  const auto once = dedupe_user_trips({a, a, b});
  EXPECT_EQ(once.size(), 2u);
  EXPECT_EQ(dedupe_user_trips(once), once);
}

TEST(ActiveThreshold, Examples) {
  EXPECT_EQ(active_user_threshold(weekdays(100, 21)), 29);
  EXPECT_EQ(active_user_threshold(weekdays(10, 0)), 5);
  EXPECT_EQ(active_user_threshold(weekdays(40, 25)), 1);
}

TEST(ActiveUsers, AtLeastThreshold) {
  const Calendar cal = weekdays(10, 0);  // threshold 5
  std::vector<TripRecord> trips;
  int k = 0;
  for (const Date d : cal.study_weekdays) {
    const std::string day = format_date(d);
    if (k < 5) trips.push_back(trip("five", day + " 08:00:00", 10, {114, 22.5}, {114.01, 22.5}));
    if (k < 4) trips.push_back(trip("four", day + " 08:00:00", 10, {114, 22.5}, {114.01, 22.5}));
    ++k;
  }
  const auto active = select_active_users(trips, cal);
  EXPECT_TRUE(active.count("five"));
  EXPECT_FALSE(active.count("four"));
}

TEST(Calendar, WeekendsAndForeignRainyDaysIgnored) {
  const Calendar cal = Calendar::from_range(*parse_date("2021-04-05"), *parse_date("2021-04-11"),
                                            {*parse_date("2021-04-10"), *parse_date("2021-04-06")});
  EXPECT_EQ(cal.study_weekdays.size(), 5u);
  EXPECT_EQ(cal.rainy_days.size(), 1u);
  std::vector<TripRecord> trips{
      trip("u", "2021-04-10 08:00:00", 10, {114, 22.5}, {114.01, 22.5}),
      trip("u", "2021-04-09 08:00:00", 10, {114, 22.5}, {114.01, 22.5})};
  const FilterResult r = restrict_to_calendar(trips, cal);
  EXPECT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.removed.at("outside_calendar"), 1u);
}

TEST(RainyDays, ParsesCommentsAndRejectsJunk) {
  EXPECT_EQ(parse_rainy_days("# wet\n2021-04-06\n\n2021-04-07\n").size(), 2u);
  EXPECT_THROW(parse_rainy_days("2021-04-06\nrain\n"), Error);
}

TEST(Stations, GeoJsonAndCsv) {
  const Projection proj({114.0, 22.5});
  const auto gj = parse_stations(R"({"type":"FeatureCollection","features":[
    {"type":"Feature","id":"M1","geometry":{"type":"Point","coordinates":[114.0,22.5]},"properties":{"mode":"metro","routes":["L1"]}},
    {"type":"Feature","id":"X","geometry":{"type":"Point","coordinates":[114.0,22.5]},"properties":{"routes":[]}},
    {"type":"Feature","id":"B1","geometry":{"type":"Point","coordinates":[114.01,22.5]},"properties":{"mode":"bus"}}]})",
                                 proj);
  ASSERT_EQ(gj.items.size(), 2u);
  EXPECT_EQ(gj.items[0].mode, TransitMode::metro);
  EXPECT_EQ(gj.items[0].routes, std::vector<std::string>{"L1"});
  EXPECT_EQ(gj.dropped.at("missing_mode"), 1u);
  const auto csv = parse_stations("id,lon,lat,mode,routes\nS1,114.0,22.5,bus,7;9\n", proj);
  ASSERT_EQ(csv.items.size(), 1u);
  EXPECT_EQ(csv.items[0].routes.size(), 2u);
  EXPECT_THROW(parse_stations("{not json", proj), Error);
}

TEST(Parcels, DegenerateRingsDropped) {
  const Projection proj({114.0, 22.5});
  const auto p = parse_parcels(R"({"type":"FeatureCollection","features":[
    {"type":"Feature","id":"P1","geometry":{"type":"Polygon","coordinates":[[[114.0,22.5],[114.001,22.5],[114.001,22.501],[114.0,22.501],[114.0,22.5]]]},"properties":{}},
    {"type":"Feature","id":"P2","geometry":{"type":"Polygon","coordinates":[[[114.0,22.5],[114.001,22.5],[114.0,22.5]]]},"properties":{}}]})",
                               proj);
  ASSERT_EQ(p.items.size(), 1u);
  EXPECT_EQ(p.items[0].id, "P1");
  EXPECT_EQ(p.items[0].boundary.vertices.size(), 4u);
  EXPECT_EQ(p.dropped.at("degenerate"), 1u);
}
