// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "commute/csv.hpp"
#include "commute/error.hpp"
#include "commute/flow_cluster.hpp"
#include "commute/pipeline.hpp"
#include "oracles.hpp"

using namespace commute;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("commute_accept_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void run_or_throw(const std::string& sub, const fs::path& config, std::optional<int> workers = {},
                  std::optional<fs::path> out = {}) {
  CommandLine cmd;
  cmd.subcommand = sub;
  cmd.config = config;
  cmd.workers = workers;
  cmd.out = out;
  std::ostringstream log, err;
  if (run_command(cmd, log, err) != 0) throw Error(err.str());
}

// Synthesises a city from `synth_keys` and returns the directory holding its
// pipeline.conf.
fs::path make_city(const std::string& name, const std::string& synth_keys) {
  const fs::path dir = scratch(name);
  write_file(dir / "seed.conf", synth_keys + "out = city\n");
  run_or_throw("synth", dir / "seed.conf");
  return dir / "city";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TimeSpan span(double a, double b) { return span_between({a}, {b}); }

Outcome ts_worked_examples() {
  const double a = temporal_similarity(span(480, 520), span(495, 530), 0);
  const double b = temporal_similarity(span(485, 495), span(495, 505), 0);
  const double c = temporal_similarity(span(485, 495), span(495, 505), 30);
  return {a == 0.5 && b == 0.0 && std::abs(c - 0.75) <= 1e-9,
          "ts = " + fmt("%.17g", a) + ", " + fmt("%.17g", b) + ", " + fmt("%.17g", c)};
}

Outcome radius_cap() {
  ClusterParams p;
  const double capped = boundary_radius(3000, 3000, p);
  p.r_max = std::numeric_limits<double>::infinity();
  const double uncapped = boundary_radius(3000, 3000, p);
  return {capped == 200.0 && uncapped == 900.0,
          "r = " + fmt("%g", uncapped) + " m uncapped, " + fmt("%g", capped) + " m capped"};
}

Outcome active_threshold() {
  const Date first = *parse_date("2021-04-05");
  std::vector<Date> days;
  for (Date d = first; days.size() < 100; d += std::chrono::days{1}) {
    if (is_weekday(d)) days.push_back(d);
  }
  const Calendar cal =
      Calendar::from_range(days.front(), days.back(), std::vector<Date>(days.begin(), days.begin() + 21));
  const int t = active_user_threshold(cal);
  return {t == 29, "threshold " + std::to_string(t) + " for 100 weekdays, 21 rainy"};
}

Outcome partitions_match_oracle() {
  const ClusterParams p;
  int bad = 0;
  std::size_t largest = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    oracle::Gen g(seed * 7919 + 1);
    const auto flows = g.flows(1 + g.index(200));
    largest = std::max(largest, flows.size());
    const auto spatial = oracle::brute_components(flows.size(), [&](std::size_t i, std::size_t j) {
      return oracle::spatially_similar(flows[i], flows[j], p);
    });
    if (oracle::partition_of(cluster_spatial(flows, p)) != spatial) ++bad;

    ISFC all;
    for (std::uint32_t i = 0; i < flows.size(); ++i) all.members.push_back(i);
    const auto temporal = oracle::brute_components(flows.size(), [&](std::size_t i, std::size_t j) {
      return oracle::interval_jaccard(flows[i].span.start.minutes, flows[i].span.end_offset,
                                      flows[j].span.start.minutes, flows[j].span.end_offset,
                                      p.beta) >= p.ts_min;
    });
    if (oracle::partition_of(cluster_temporal(flows, all, p)) != temporal) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatches over 100 instances (n <= " +
                        std::to_string(largest) + ")"};
}

Outcome merge_conserves() {
  const ClusterParams p;
  int bad = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    oracle::Gen g(seed + 40'000);
    const auto flows = g.flows(2 + g.index(60), 80);
    // Random partition of the flows into up to 8 clusters.
    const std::size_t k = 1 + g.index(std::min<std::size_t>(8, flows.size()));
    std::vector<ISTFC> clusters(k);
    for (std::uint32_t i = 0; i < flows.size(); ++i) clusters[g.index(k)].members.push_back(i);
    std::erase_if(clusters, [](const ISTFC& c) { return c.members.empty(); });
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      clusters[i].istfc_id = static_cast<int>(i);
      clusters[i].parent_n = flows.size();
      refresh_aggregates(clusters[i], flows);
    }
    sort_by_size(clusters);
    const auto merged = merge_neighbor_istfcs(clusters, flows, p);
    std::vector<std::uint32_t> members;
    for (const ISTFC& c : merged) members.insert(members.end(), c.members.begin(), c.members.end());
    std::sort(members.begin(), members.end());
    std::vector<std::uint32_t> want(flows.size());
    std::iota(want.begin(), want.end(), 0u);
    if (members != want || merged.size() > clusters.size()) ++bad;
  }

  // Same route, overlapping times, sizes 5, 3 and 2.
  std::vector<Flow> flows;
  std::vector<ISTFC> three;
  const double starts[] = {480, 500, 470};
  const std::size_t sizes[] = {5, 3, 2};
  std::uint32_t ref = 0;
  for (int k = 0; k < 3; ++k) {
    ISTFC c;
    c.istfc_id = k;
    c.parent_n = 10;
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      flows.push_back(make_flow(ref, {10.0 * k, 0}, {2000, 10.0 * k}, span(starts[k], starts[k] + 15), {}));
      c.members.push_back(ref++);
    }
    refresh_aggregates(c, flows);
    three.push_back(c);
  }
  const auto merged = merge_neighbor_istfcs(three, flows, p);
  const bool fixture = merged.size() == 1 && merged[0].n_prime() == 10;
  return {bad == 0 && fixture, std::to_string(bad) + " violations over 1000 sets; fixture merges to " +
                                   std::to_string(merged.size())};
}

Outcome noiseless_recovery() {
  const fs::path city = make_city("noiseless",
                                  "synth_only_biking = 110\n"
                                  "synth_biking_transit = 40\n"
                                  "synth_transit_biking = 35\n"
                                  "synth_biking_transit_biking = 15\n"
                                  "synth_noise = 50\n"
                                  "synth_spatial_jitter_sd = 0\n"
                                  "synth_temporal_jitter_sd = 0\n"
                                  "synth_skip_prob_per_leg = 0\n");
  const RunConfig cfg = load_config(city / "pipeline.conf");
  const PipelineResult r = run_pipeline(load_inputs(cfg), cfg);
  const RecoveryMetrics& m = *r.metrics;
  return {m.category_accuracy == 1.0 && m.max_position_error_m < 1e-6 && m.noise_fpr == 0.0,
          "accuracy " + fmt("%.4f", m.category_accuracy) + ", max position error " +
              fmt("%.3g", m.max_position_error_m) + " m, noise FPR " + fmt("%.4f", m.noise_fpr)};
}

const fs::path& default_city() {
  static const fs::path city = make_city("default", "");
  return city;
}

Outcome noisy_recovery() {
  const RunConfig cfg = load_config(default_city() / "pipeline.conf");
  const PipelineResult r = run_pipeline(load_inputs(cfg), cfg);
  const RecoveryMetrics& m = *r.metrics;
  return {m.category_accuracy >= 0.9 && m.position_hit_rate >= 0.9 && m.noise_fpr <= 0.05,
          "accuracy " + fmt("%.4f", m.category_accuracy) + ", hit rate " +
              fmt("%.4f", m.position_hit_rate) + ", noise FPR " + fmt("%.4f", m.noise_fpr)};
}

Outcome compare_directions() {
  const RunConfig cfg = load_config(default_city() / "pipeline.conf");
  const PipelineInputs in = load_inputs(cfg);
  const IngestResult ing = run_ingest(in.trips, in.rainy_days, cfg);
  const auto rows = run_compare(ing, cfg);
  const auto row = [&](const std::string& v) -> const Layer1Indicators& {
    for (const CompareRow& r : rows) {
      if (r.variant == v) return r.indicators;
    }
    throw Error("no compare row " + v);
  };
  const double improved = row("improved").avg_dist_od_m, uncapped = row("uncapped").avg_dist_od_m;
  const double b0 = row("beta_0").avg_istfc_records, b30 = row("beta_30").avg_istfc_records;
  return {improved < uncapped && b30 > b0,
          "avg_dist_od " + fmt("%.1f", improved) + " vs " + fmt("%.1f", uncapped) +
              " m; records per ISTFC beta 0 " + fmt("%.2f", b0) + " vs beta 30 " + fmt("%.2f", b30)};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& diff) {
  std::vector<fs::path> names;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) names.push_back(fs::relative(e.path(), a));
  }
  std::size_t nb = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) nb += e.is_regular_file();
  if (nb != names.size()) {
    diff = "file counts differ";
    return false;
  }
  for (const fs::path& n : names) {
    if (!fs::exists(b / n) || read_file(a / n) != read_file(b / n)) {
      diff = n.string();
      return false;
    }
  }
  return true;
}

Outcome determinism_and_scale() {
  const fs::path conf = default_city() / "pipeline.conf";
  const fs::path one = scratch("w1"), three = scratch("w3");
  run_or_throw("all", conf, 1, one);
  run_or_throw("all", conf, 3, three);
  std::string diff;
  const bool identical = same_tree(one, three, diff);

  const fs::path big = make_city("large",
                                 "synth_only_biking = 2400\n"
                                 "synth_biking_transit = 680\n"
                                 "synth_transit_biking = 440\n"
                                 "synth_biking_transit_biking = 80\n"
                                 "synth_noise = 400\n"
                                 "synth_metro_stations = 120\n"
                                 "synth_bus_stations = 240\n"
                                 "synth_parcels = 1600\n");
  const std::string trips = read_file(big / "trips.csv");
  const auto rows = std::count(trips.begin(), trips.end(), '\n') - 1;
  const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto t0 = std::chrono::steady_clock::now();
  run_or_throw("all", big / "pipeline.conf", workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {identical && secs < 60.0,
          std::string(identical ? "artifacts identical for 1 and 3 workers" : "artifacts differ: " + diff) +
              "; all on " + std::to_string(rows) + " trips took " + fmt("%.1f", secs) + " s with " +
              std::to_string(workers) + " worker(s)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"temporal similarity worked examples", ts_worked_examples},
      {"boundary radius cap", radius_cap},
      {"active-user threshold", active_threshold},
      {"clustering equals brute-force components", partitions_match_oracle},
      {"neighbour merging conserves flows", merge_conserves},
      {"noiseless synthetic recovery", noiseless_recovery},
      {"noisy synthetic recovery", noisy_recovery},
      {"comparison directions", compare_directions},
      {"determinism and 1M-trip runtime", determinism_and_scale},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
