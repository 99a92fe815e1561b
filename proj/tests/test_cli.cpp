#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "commute/csv.hpp"
#include "commute/error.hpp"
#include "commute/pipeline.hpp"

using namespace commute;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("commute_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kSmallCity =
    "synth_only_biking = 30\n"
    "synth_biking_transit = 8\n"
    "synth_transit_biking = 6\n"
    "synth_biking_transit_biking = 3\n"
    "synth_noise = 8\n"
    "synth_metro_stations = 12\n"
    "synth_bus_stations = 12\n"
    "synth_parcels = 80\n"
    "synth_study_weekdays = 40\n"
    "synth_rainy_days = 6\n";

int run(const std::string& sub, const fs::path& config, std::string* err = nullptr,
        std::optional<int> workers = std::nullopt, std::optional<fs::path> out = std::nullopt) {
  CommandLine cmd;
  cmd.subcommand = sub;
  cmd.config = config;
  cmd.workers = workers;
  cmd.out = out;
  std::ostringstream log, e;
  const int rc = run_command(cmd, log, e);
  if (err) *err = e.str();
  return rc;
}

// Generates the small city once per test binary.
const fs::path& small_city() {
  static const fs::path dir = [] {
    const fs::path d = scratch("city");
    write_file(d / "seed.conf", std::string(kSmallCity) + "out = city\n");
    if (run("synth", d / "seed.conf") != 0) throw Error("synth failed");
    return d / "city";
  }();
  return dir;
}

}  // namespace

TEST(Config, DefaultsMatchDocumentedValues) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.cluster.alpha, 0.3);
  EXPECT_EQ(c.cluster.r_max, 200.0);
  EXPECT_EQ(c.cluster.beta, 30.0);
  EXPECT_EQ(c.cluster.ts_min, 0.5);
  EXPECT_EQ(c.decision.t_wh, 240.0);
  EXPECT_EQ(c.decision.td_metro, 60.0);
  EXPECT_EQ(c.decision.td_bus, 30.0);
  EXPECT_EQ(c.decision.op_start.minutes, 360.0);
  EXPECT_EQ(c.decision.op_end.minutes, 1410.0);
  EXPECT_EQ(c.decision.iadcf_window, 120.0);
  EXPECT_EQ(c.cluster.isfc_weekday_fraction, 0.2);
  EXPECT_EQ(c.cluster.istfc_parent_fraction, 0.3);
}

TEST(Config, RejectsUnknownDuplicateAndMalformed) {
  EXPECT_THROW(parse_config("alpah = 0.3\n"), Error);
  EXPECT_THROW(parse_config("alpha = 0.3\nalpha = 0.4\n"), Error);
  EXPECT_THROW(parse_config("alpha = lots\n"), Error);
  EXPECT_THROW(parse_config("op_start = 25:00\n"), Error);
  EXPECT_THROW(parse_config("ts_min = 0\n"), Error);
}

TEST(Config, FormatRoundTrips) {
  RunConfig c = parse_config("alpha = 0.25\nbeta = 45\nuncap_radius = true\nop_end = 22:15\n");
  const RunConfig back = parse_config(format_config(c));
  EXPECT_EQ(canonical_config(back, ConfigGroup::aggregate), canonical_config(c, ConfigGroup::aggregate));
  EXPECT_EQ(canonical_config(back, ConfigGroup::synth), canonical_config(c, ConfigGroup::synth));
  EXPECT_TRUE(std::isinf(c.effective_cluster().r_max));
}

TEST(Config, HashCoversOnlyEarlierStages) {
  const RunConfig a = parse_config("");
  const RunConfig b = parse_config("t_wh = 300\n");
  EXPECT_EQ(config_hash(a, ConfigGroup::cluster), config_hash(b, ConfigGroup::cluster));
  EXPECT_NE(config_hash(a, ConfigGroup::classify), config_hash(b, ConfigGroup::classify));
  const RunConfig w = parse_config("workers = 4\n");
  EXPECT_EQ(config_hash(a, ConfigGroup::aggregate), config_hash(w, ConfigGroup::aggregate));
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const RunConfig c = parse_config("trips = t.csv\nout = res\n", "/data/run");
  EXPECT_EQ(c.trips, fs::path("/data/run/t.csv"));
  EXPECT_EQ(c.out, fs::path("/data/run/res"));
  EXPECT_EQ(parse_config("", "/data/run").out, fs::path("/data/run/out"));
}

TEST(Cli, AllProducesCommutersAndMetrics) {
  const fs::path conf = small_city() / "pipeline.conf";
  ASSERT_EQ(run("all", conf), 0);
  const fs::path out = small_city() / "results";
  for (const char* f : {"commuters.csv", "metrics.csv", "run.json", "summary_shares.csv",
                        "validation_curve.csv", "station_usage.csv", "commute_flows.geojson"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(read_file(out / "run.json"));
  EXPECT_EQ(manifest["subcommand"], "all");
  EXPECT_TRUE(manifest["inputs"].contains("trips.csv"));
  EXPECT_TRUE(manifest["outputs"].contains("commuters.csv"));
}

TEST(Cli, RerunIsByteIdenticalAcrossWorkerCounts) {
  const fs::path conf = small_city() / "pipeline.conf";
  ASSERT_EQ(run("all", conf, nullptr, 1), 0);
  const fs::path out = small_city() / "results";
  const std::string first = read_file(out / "run.json");
  const std::string commuters = read_file(out / "commuters.csv");
  ASSERT_EQ(run("all", conf, nullptr, 3), 0);
  EXPECT_EQ(read_file(out / "run.json"), first);
  EXPECT_EQ(read_file(out / "commuters.csv"), commuters);
}

TEST(Cli, StagedRunMatchesAll) {
  const fs::path out = scratch("staged") / "out";
  const fs::path city = small_city();
  for (const char* s : {"ingest", "cluster", "classify", "aggregate", "validate"}) {
    std::string err;
    ASSERT_EQ(run(s, city / "pipeline.conf", &err, std::nullopt, out), 0) << s << ": " << err;
  }
  ASSERT_EQ(run("all", city / "pipeline.conf"), 0);
  for (const char* f : {"cleaned_trips.csv", "istfc.csv", "classified.csv", "commuters.csv",
                        "commuters.geojson", "hist_wh.csv", "station_usage.csv",
                        "validation_curve.csv", "metrics.csv", "commute_flows.geojson"}) {
    EXPECT_EQ(read_file(out / f), read_file(city / "results" / f)) << f;
  }
}

TEST(Cli, StaleStageIsRefused) {
  const fs::path dir = scratch("stale");
  const fs::path city = small_city();
  const std::string base = "trips = " + (city / "trips.csv").string() + "\nstations = " +
                           (city / "stations.geojson").string() + "\nout = out\n";
  write_file(dir / "a.conf", base);
  ASSERT_EQ(run("ingest", dir / "a.conf"), 0);
  ASSERT_EQ(run("cluster", dir / "a.conf"), 0);
  write_file(dir / "b.conf", base + "beta = 10\n");
  std::string err;
  EXPECT_NE(run("classify", dir / "b.conf", &err), 0);
  EXPECT_NE(err.find("different configuration"), std::string::npos) << err;

  write_file(dir / "out" / "istfc.csv", read_file(dir / "out" / "istfc.csv") + "\n");
  EXPECT_NE(run("classify", dir / "a.conf", &err), 0);
  EXPECT_NE(err.find("changed"), std::string::npos) << err;
}

TEST(Cli, MissingInputFails) {
  const fs::path dir = scratch("missing");
  write_file(dir / "c.conf", "trips = nope.csv\n");
  std::string err;
  EXPECT_NE(run("all", dir / "c.conf", &err), 0);
  EXPECT_NE(err.find("missing input"), std::string::npos) << err;
  EXPECT_NE(run("all", dir / "absent.conf", &err), 0);
  write_file(dir / "v.conf", "trips = " + (small_city() / "trips.csv").string() + "\n");
  EXPECT_NE(run("validate", dir / "v.conf", &err), 0);
}

TEST(Cli, CompareLeavesMainOutputsAlone) {
  const fs::path city = small_city();
  ASSERT_EQ(run("all", city / "pipeline.conf"), 0);
  const std::string before = read_file(city / "results" / "run.json");
  ASSERT_EQ(run("compare", city / "pipeline.conf"), 0);
  EXPECT_EQ(read_file(city / "results" / "run.json"), before);
  const std::string csv = read_file(city / "results" / "compare" / "compare.csv");
  EXPECT_NE(csv.find("\noriginal,"), std::string::npos);
}

TEST(Compare, BetaZeroLowersRecordsPerIstfc) {
  const RunConfig cfg = load_config(small_city() / "pipeline.conf");
  const PipelineInputs in = load_inputs(cfg);
  const IngestResult ing = run_ingest(in.trips, in.rainy_days, cfg);
  ClusterParams zero = cfg.cluster;
  zero.beta = 0;
  const auto z = layer1_indicators(run_clustering(ing, zero, 1));
  const auto t = layer1_indicators(run_clustering(ing, cfg.cluster, 1));
  EXPECT_LT(z.avg_istfc_records, t.avg_istfc_records);
}

TEST(Pipeline, InMemoryMatchesRecoveryOnSmallCity) {
  const RunConfig cfg = load_config(small_city() / "pipeline.conf");
  const PipelineResult r = run_pipeline(load_inputs(cfg), cfg);
  ASSERT_TRUE(r.metrics);
  EXPECT_GE(r.metrics->category_accuracy, 0.8);
  EXPECT_TRUE(r.analysis.validation);
}
