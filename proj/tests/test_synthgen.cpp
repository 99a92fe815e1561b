#include <gtest/gtest.h>

#include <map>
#include <set>

#include "commute/error.hpp"
#include "commute/synthgen.hpp"

using namespace commute;

namespace {

SynthConfig small_city() {
  SynthConfig c;
  c.n_only_biking = 12;
  c.n_biking_transit = 5;
  c.n_transit_biking = 4;
  c.n_biking_transit_biking = 3;
  c.n_noise = 5;
  c.n_metro_stations = 12;
  c.n_bus_stations = 12;
  c.n_parcels = 60;
  c.study_weekdays = 30;
  c.rainy_days = 5;
  return c;
}

CommuterRecord predicted(const TruthUser& u, const Projection& proj,
                         const std::map<std::string, std::size_t>& station_ids) {
  CommuterRecord r;
  r.user_id = u.user_id;
  r.category = *u.category;
  if (r.category != CommuterCategory::TransitBiking) r.home = proj.project(u.home);
  if (r.category != CommuterCategory::BikingTransit) r.work = proj.project(u.work);
  if (u.home_station) r.home_station = station_ids.at(*u.home_station);
  if (u.work_station) r.work_station = station_ids.at(*u.work_station);
  return r;
}

}  // namespace

TEST(SynthConfig, Validation) {
  SynthConfig c;
  EXPECT_NO_THROW(c.validate());
  c.skip_prob_per_leg = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = SynthConfig{};
  c.spatial_jitter_sd = -1;
  EXPECT_THROW(c.validate(), Error);
  c = SynthConfig{};
  c.n_metro_stations = c.n_bus_stations = 0;
  EXPECT_THROW(generate_city(c), Error);
}

TEST(GenerateCity, ZeroStationsWithoutTransferUsers) {
  SynthConfig c = small_city();
  c.n_metro_stations = c.n_bus_stations = 0;
  c.n_biking_transit = c.n_transit_biking = c.n_biking_transit_biking = 0;
  const SynthCity city = generate_city(c);
  EXPECT_TRUE(city.stations.empty());
  EXPECT_EQ(city.truth.users.size(), 17u);
}

TEST(GenerateCity, DeterministicAndWellFormed) {
  const SynthConfig c = small_city();
  const SynthCity a = generate_city(c), b = generate_city(c);
  EXPECT_EQ(format_ground_truth_csv(a.truth), format_ground_truth_csv(b.truth));
  EXPECT_EQ(format_stations_geojson(a.stations), format_stations_geojson(b.stations));
  for (const TruthUser& u : a.truth.users) {
    if (u.category == CommuterCategory::BikingTransitBiking) {
      ASSERT_TRUE(u.home_station && u.work_station);
      EXPECT_NE(*u.home_station, *u.work_station);
    }
    if (u.category == CommuterCategory::OnlyBiking) {
      EXPECT_FALSE(u.home_station || u.work_station);
    }
    if (u.category) {
      EXPECT_GE(u.wh, 300.0);
    }
  }
  SynthConfig other = c;
  other.seed = 43;
  EXPECT_NE(format_ground_truth_csv(generate_city(other).truth), format_ground_truth_csv(a.truth));
}

TEST(GenerateTrips, NoiselessLegsHitTrueEndpoints) {
  SynthConfig c = small_city();
  c.spatial_jitter_sd = 0;
  c.temporal_jitter_sd = 0;
  c.skip_prob_per_leg = 0;
  const SynthCity city = generate_city(c);
  const SynthTrips trips = generate_trips(city, c);
  std::map<std::string, const TruthUser*> truth;
  for (const TruthUser& u : city.truth.users) truth[u.user_id] = &u;
  std::map<std::string, std::set<Date>> days;
  std::map<std::string, int> commute_legs;
  for (std::size_t i = 0; i < trips.trips.size(); ++i) {
    const TripRecord& t = trips.trips[i];
    const TruthUser& u = *truth.at(t.user_id);
    days[t.user_id].insert(date_of(t.start));
    if (u.category != CommuterCategory::OnlyBiking) continue;
    if (trips.roles[i] == LegRole::to_work) {
      EXPECT_EQ(t.origin, u.home);
      EXPECT_EQ(t.destination, u.work);
      ++commute_legs[t.user_id];
    } else if (trips.roles[i] == LegRole::back_home) {
      EXPECT_EQ(t.origin, u.work);
      EXPECT_EQ(t.destination, u.home);
      ++commute_legs[t.user_id];
    } else {
      EXPECT_EQ(trips.roles[i], LegRole::errand);
    }
  }
  const int threshold = active_user_threshold(city.truth.calendar);
  for (const TruthUser& u : city.truth.users) {
    if (!u.category) continue;
    EXPECT_GT(static_cast<int>(days[u.user_id].size()), threshold) << u.user_id;
    if (u.category == CommuterCategory::OnlyBiking) {
      EXPECT_EQ(commute_legs[u.user_id], 2 * static_cast<int>(days[u.user_id].size()));
    }
  }
}

TEST(GenerateTrips, WorkerCountDoesNotChangeOutput) {
  const SynthConfig c = small_city();
  const SynthCity city = generate_city(c);
  const SynthTrips one = generate_trips(city, c, 1);
  const SynthTrips three = generate_trips(city, c, 3);
  EXPECT_EQ(format_trips(one.trips), format_trips(three.trips));
  EXPECT_EQ(one.roles, three.roles);
}

TEST(GroundTruth, CsvRoundTrip) {
  const SynthCity city = generate_city(small_city());
  const auto back = parse_ground_truth_csv(format_ground_truth_csv(city.truth));
  ASSERT_EQ(back.size(), city.truth.users.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].user_id, city.truth.users[i].user_id);
    EXPECT_EQ(back[i].category, city.truth.users[i].category);
    if (back[i].category) {
      EXPECT_EQ(back[i].home, city.truth.users[i].home);
      EXPECT_EQ(back[i].work_station, city.truth.users[i].work_station);
    }
  }
}

TEST(ScoreRecovery, PerfectPrediction) {
  const SynthCity city = generate_city(small_city());
  std::map<std::string, std::size_t> ids;
  for (std::size_t i = 0; i < city.stations.size(); ++i) ids[city.stations[i].id] = i;
  std::vector<CommuterRecord> pred;
  for (const TruthUser& u : city.truth.users) {
    if (u.category) pred.push_back(predicted(u, city.projection, ids));
  }
  const RecoveryMetrics m = score_recovery(pred, city.stations, city.truth.users, city.projection, 150);
  EXPECT_EQ(m.category_accuracy, 1.0);
  EXPECT_EQ(m.position_hit_rate, 1.0);
  EXPECT_EQ(m.noise_fpr, 0.0);
  EXPECT_EQ(m.station_match_rate, 1.0);
  EXPECT_EQ(m.max_position_error_m, 0.0);
  for (const auto& [c, s] : m.per_category) {
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
  }
}

TEST(ScoreRecovery, EveryoneOnlyBiking) {
  const SynthCity city = generate_city(small_city());
  std::vector<CommuterRecord> pred;
  for (const TruthUser& u : city.truth.users) {
    if (!u.category) continue;
    CommuterRecord r;
    r.user_id = u.user_id;
    r.home = city.projection.project(u.home);
    r.work = city.projection.project(u.work);
    pred.push_back(r);
  }
  const RecoveryMetrics m = score_recovery(pred, city.stations, city.truth.users, city.projection, 150);
  EXPECT_EQ(m.per_category.at(CommuterCategory::OnlyBiking).recall, 1.0);
  EXPECT_EQ(m.per_category.at(CommuterCategory::BikingTransit).recall, 0.0);
  EXPECT_EQ(m.per_category.at(CommuterCategory::TransitBiking).recall, 0.0);
}

TEST(ScoreRecovery, ToleranceAndUniverse) {
  const Projection proj({114.0, 22.5});
  TruthUser u;
  u.user_id = "u";
  u.category = CommuterCategory::OnlyBiking;
  u.home = {114.0, 22.5};
  u.work = proj.unproject({3000, 0});
  CommuterRecord r;
  r.user_id = "u";
  r.home = PlanarPoint{120, 0};
  r.work = PlanarPoint{3000, 0};
  const std::vector<TruthUser> truth{u};
  EXPECT_EQ(score_recovery(std::vector<CommuterRecord>{r}, {}, truth, proj, 150).position_hit_rate, 1.0);
  r.user_id = "stranger";
  EXPECT_THROW(score_recovery(std::vector<CommuterRecord>{r}, {}, truth, proj, 150), Error);
}
