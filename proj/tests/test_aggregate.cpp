#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "commute/aggregate.hpp"
#include "commute/csv.hpp"
#include "commute/error.hpp"
#include "commute/export.hpp"

using namespace commute;

namespace {

CommuterRecord record(const std::string& id, CommuterCategory c, std::optional<PlanarPoint> home,
                      std::optional<PlanarPoint> work) {
  CommuterRecord r;
  r.user_id = id;
  r.category = c;
  r.home = home;
  r.work = work;
  r.attrs.t_e = {480};
  r.attrs.t_l = {1110};
  r.attrs.ct_e = 12;
  r.attrs.ct_l = 14;
  r.attrs.cd = 1800;
  r.attrs.wh = 600;
  r.attrs.n_t = 40;
  r.attrs.r_rt = 0.6;
  r.idcf.origin = home.value_or(PlanarPoint{});
  r.idcf.destination = work.value_or(PlanarPoint{});
  return r;
}

ResidentialParcel square(const std::string& id, double x, double y, double side) {
  return {id, Polygon{{{x, y}, {x + side, y}, {x + side, y + side}, {x, y + side}}}};
}

}  // namespace

TEST(ValidateResidences, InsideAndNear) {
  const std::vector<ResidentialParcel> parcels{square("P", 0, 0, 100)};
  const std::vector<CommuterRecord> recs{
      record("a", CommuterCategory::OnlyBiking, PlanarPoint{50, 50}, PlanarPoint{900, 0}),
      record("b", CommuterCategory::OnlyBiking, PlanarPoint{125, 50}, PlanarPoint{900, 0}),
      record("c", CommuterCategory::TransitBiking, std::nullopt, PlanarPoint{900, 0})};
  const ValidationCurve v = validate_residences(recs, parcels);
  EXPECT_EQ(v.users, 2u);
  ASSERT_EQ(v.thresholds.size(), 31u);
  EXPECT_EQ(v.cumulative_pct[0], 0.5);
  EXPECT_EQ(v.cumulative_pct[2], 0.5);
  EXPECT_EQ(v.cumulative_pct[3], 1.0);
  EXPECT_THROW(validate_residences(recs, {}), Error);
}

TEST(ValidateResidences, AllInsideIsFlatOne) {
  const std::vector<ResidentialParcel> parcels{square("P", 0, 0, 100)};
  const std::vector<CommuterRecord> recs{
      record("a", CommuterCategory::OnlyBiking, PlanarPoint{50, 50}, PlanarPoint{900, 0})};
  for (const double f : validate_residences(recs, parcels).cumulative_pct) EXPECT_EQ(f, 1.0);
}

TEST(Summaries, SharesAndExclusions) {
  const std::vector<CommuterRecord> recs{
      record("a", CommuterCategory::OnlyBiking, PlanarPoint{0, 0}, PlanarPoint{1, 0}),
      record("b", CommuterCategory::BikingTransit, PlanarPoint{0, 0}, std::nullopt)};
  const SummaryTables s = summarize_commuters(recs);
  EXPECT_EQ(s.shares.at(CommuterCategory::OnlyBiking), 0.5);
  EXPECT_EQ(s.histograms.at("wh").count(CommuterCategory::BikingTransit), 0u);
  EXPECT_EQ(s.histograms.at("cd").count(CommuterCategory::BikingTransit), 0u);
  EXPECT_EQ(s.histograms.at("t_e").at(CommuterCategory::BikingTransit).counts().begin()->first, 32);
  const SummaryTables only = summarize_commuters(std::vector<CommuterRecord>(3, recs[0]));
  EXPECT_EQ(only.shares.at(CommuterCategory::OnlyBiking), 1.0);
}

TEST(StationUsage, ChainsCountAtBothStations) {
  CommuterRecord bt = record("a", CommuterCategory::BikingTransit, PlanarPoint{0, 0}, std::nullopt);
  bt.home_station = 0;
  CommuterRecord btb = record("b", CommuterCategory::BikingTransitBiking, PlanarPoint{0, 0},
                              PlanarPoint{5000, 0});
  btb.home_station = 0;
  btb.work_station = 1;
  const auto u = station_usage(std::vector<CommuterRecord>{bt, btb});
  EXPECT_EQ(u.at(0).bike_to_transit, 2u);
  EXPECT_EQ(u.at(1).transit_to_bike, 1u);
  EXPECT_TRUE(station_usage(std::vector<CommuterRecord>{}).empty());
}

TEST(CommuteFlows, SharedBlocksFormOneCluster) {
  std::vector<CommuterRecord> recs;
  for (int i = 0; i < 10; ++i) {
    recs.push_back(record("u" + std::to_string(i), CommuterCategory::OnlyBiking,
                          PlanarPoint{10.0 * i, 0}, PlanarPoint{2000, 5.0 * i}));
  }
  const auto c = cluster_commute_flows(recs, ClusterParams{});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].n(), 10u);
}

TEST(Export, EmptyResultsGiveHeaderOnlyFiles) {
  AnalysisResults a;
  a.projection = Projection({114.0, 22.5});
  for (const auto& [name, contents] : render_artifacts(a)) {
    if (name.ends_with(".csv") && name != "summary_shares.csv") {
      EXPECT_EQ(std::count(contents.begin(), contents.end(), '\n'), 1) << name;
    }
    if (name.ends_with(".geojson")) {
      EXPECT_EQ(nlohmann::json::parse(contents)["features"].size(), 0u) << name;
    }
  }
}

TEST(Export, CommutersFilesAreWellFormed) {
  AnalysisResults a;
  a.projection = Projection({114.0, 22.5});
  a.stations = {{"M001", {114.0, 22.5}, {0, 0}, TransitMode::metro, {}}};
  CommuterRecord bt = record("z\"q", CommuterCategory::BikingTransit, PlanarPoint{0, 0}, std::nullopt);
  bt.home_station = 0;
  a.commuters = {record("a", CommuterCategory::OnlyBiking, PlanarPoint{100, 100}, PlanarPoint{900, 0}),
                 bt};
  const std::string csv = format_commuters_csv(a.commuters, a.projection, a.stations);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "user_id,category,home_lon,home_lat,work_lon,work_lat,T_e,T_l,CT_e,CT_l,CD_m,WH_min,"
            "n_t,R_rt,transfer_station_ids,transfer_mode");
  EXPECT_NE(csv.find("M001,metro"), std::string::npos);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  const auto gj = nlohmann::json::parse(format_commuters_geojson(a.commuters, a.projection, a.stations));
  EXPECT_EQ(gj["type"], "FeatureCollection");
  EXPECT_EQ(gj["features"].size(), 2u);
}

TEST(Export, ClassifiedRoundTripIsExact) {
  const std::vector<Station> stations{{"M001", {114.0, 22.5}, {0, 0}, TransitMode::metro, {}},
                                      {"B002", {114.0, 22.5}, {0, 0}, TransitMode::bus, {}}};
  CommuterRecord btb = record("b", CommuterCategory::BikingTransitBiking, PlanarPoint{0.1, 1.0 / 3},
                              PlanarPoint{5000.123456789, -2.5});
  btb.home_station = 1;
  btb.work_station = 0;
  btb.attrs.r_rt = 2.0 / 3;
  const std::vector<CommuterRecord> recs{btb};
  const std::string text = format_classified_csv(recs, stations);
  const auto back = parse_classified_csv(text, stations);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].home, btb.home);
  EXPECT_EQ(back[0].work, btb.work);
  EXPECT_EQ(back[0].attrs.r_rt, btb.attrs.r_rt);
  EXPECT_EQ(back[0].home_station, 1u);
  EXPECT_EQ(format_classified_csv(back, stations), text);
  EXPECT_THROW(parse_classified_csv(text, std::vector<Station>{}), Error);
}

TEST(Export, UnwritableDirectoryThrows) {
  const auto file = std::filesystem::temp_directory_path() / "commute_export_blocker";
  write_file(file, "x");
  EXPECT_THROW(export_artifacts(AnalysisResults{}, file / "sub"), Error);
  std::filesystem::remove(file);
}
