#include "commute/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <system_error>

#include <json.hpp>

#include "commute/csv.hpp"
#include "commute/error.hpp"
#include "commute/parallel.hpp"

#ifndef COMMUTE_VERSION
#define COMMUTE_VERSION "dev"
#endif

namespace commute {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string content_hash(std::string_view s) { return hex64(fnv1a64(s)); }

std::string read_required(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(std::string("missing input: no ") + what + " path configured");
  if (!fs::exists(p)) throw Error(std::string("missing input: ") + what + " file " + p.string());
  return read_file(p);
}

struct UserRange {
  std::size_t begin;
  std::size_t end;
};

std::vector<UserRange> user_ranges(const std::vector<TripRecord>& trips) {
  std::vector<UserRange> out;
  for (std::size_t i = 0; i < trips.size();) {
    std::size_t j = i + 1;
    while (j < trips.size() && trips[j].user_id == trips[i].user_id) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

// Smallest arc of the day that covers every departure.
double covering_arc(std::vector<double> starts) {
  if (starts.size() < 2) return 0.0;
  std::sort(starts.begin(), starts.end());
  double widest_gap = starts.front() + kMinutesPerDay - starts.back();
  for (std::size_t i = 1; i < starts.size(); ++i) widest_gap = std::max(widest_gap, starts[i] - starts[i - 1]);
  return kMinutesPerDay - widest_gap;
}

double mean(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

}  // namespace

PipelineInputs load_inputs(const RunConfig& cfg) {
  PipelineInputs in;
  in.trips = parse_trips(read_required(cfg.trips, "trips"));
  if (!cfg.rainy_days.empty()) in.rainy_days = parse_rainy_days(read_required(cfg.rainy_days, "rainy_days"));
  if (!cfg.stations.empty()) in.stations_text = read_required(cfg.stations, "stations");
  if (!cfg.parcels.empty()) in.parcels_text = read_required(cfg.parcels, "parcels");
  if (!cfg.ground_truth.empty()) {
    in.truth = parse_ground_truth_csv(read_required(cfg.ground_truth, "ground_truth"));
  }
  return in;
}

IngestResult run_ingest(const TripTable& table, const std::vector<Date>& rainy, const RunConfig& cfg) {
  IngestResult r;
  r.rows_in = table.rows;
  r.report.emplace_back("parse", table.rejected);
  if (table.trips.empty()) throw Error("no valid trips in the input");
  r.projection = Projection(trip_centroid(table.trips));

  FilterResult f = filter_unrealistic(table.trips, cfg.cleaning, r.projection);
  r.report.emplace_back("filter", f.removed);
  const std::size_t before_dedupe = f.kept.size();
  std::vector<TripRecord> trips = dedupe_user_trips(std::move(f.kept));
  r.report.push_back({"dedupe", {{"duplicate", before_dedupe - trips.size()}}});
  if (trips.empty()) throw Error("no trips survive cleaning");

  if (!cfg.study_start.empty()) {
    r.calendar = Calendar::from_range(*parse_date(cfg.study_start), *parse_date(cfg.study_end), rainy);
  } else {
    Date first = date_of(trips.front().start), last = first;
    for (const TripRecord& t : trips) {
      first = std::min(first, date_of(t.start));
      last = std::max(last, date_of(t.start));
    }
    r.calendar = Calendar::from_range(first, last, rainy);
  }
  FilterResult c = restrict_to_calendar(std::move(trips), r.calendar);
  r.report.emplace_back("calendar", c.removed);

  const int threshold = active_user_threshold(r.calendar);
  const std::map<std::string, int> counts = count_active_weekdays(c.kept, r.calendar);
  std::size_t inactive = 0;
  for (TripRecord& t : c.kept) {
    const auto it = counts.find(t.user_id);
    if (it != counts.end() && it->second >= threshold) {
      r.trips.push_back(std::move(t));
    } else {
      ++inactive;
    }
  }
  r.report.push_back({"activity", {{"inactive_user", inactive}}});
  for (const auto& [user, n] : counts) {
    if (n >= threshold) r.active_weekdays.emplace(user, n);
  }
  return r;
}

std::string format_cleaning_report(const IngestResult& r) {
  std::string out = "stage,reason,count\n";
  out += "input,rows," + std::to_string(r.rows_in) + '\n';
  for (const auto& [stage, reasons] : r.report) {
    for (const auto& [reason, n] : reasons) {
      out += stage + ',' + reason + ',' + std::to_string(n) + '\n';
    }
  }
  out += "output,trips," + std::to_string(r.trips.size()) + '\n';
  out += "output,active_users," + std::to_string(r.active_weekdays.size()) + '\n';
  return out;
}

std::vector<UserLayer1> run_clustering(const IngestResult& in, const ClusterParams& p, int workers) {
  p.validate();
  const std::vector<UserRange> ranges = user_ranges(in.trips);
  if (in.trips.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("too many trips");
  std::vector<UserLayer1> out(ranges.size());
  parallel_for(ranges.size(), workers, [&](std::size_t u) {
    const UserRange& r = ranges[u];
    UserLayer1& dst = out[u];
    dst.user_id = in.trips[r.begin].user_id;
    dst.active_weekdays = in.active_weekdays.at(dst.user_id);
    const std::span<const TripRecord> trips(in.trips.data() + r.begin, r.end - r.begin);
    dst.flows = to_flows(trips, in.projection, static_cast<std::uint32_t>(r.begin));
    dst.clusters = run_layer1(dst.flows, dst.active_weekdays, p);
  });
  return out;
}

std::vector<UserIstfcs> reliable_istfcs(std::span<const UserLayer1> users) {
  std::vector<UserIstfcs> out;
  out.reserve(users.size());
  for (const UserLayer1& u : users) out.push_back({u.user_id, u.active_weekdays, u.clusters.istfcs});
  return out;
}

std::vector<CommuterRecord> run_classification(std::span<const UserIstfcs> users,
                                               const ClusterParams& cp, const DecisionParams& dp,
                                               const StationIndex& stations, int workers) {
  dp.validate();
  std::vector<std::optional<CommuterRecord>> slots(users.size());
  parallel_for(users.size(), workers, [&](std::size_t i) {
    slots[i] = run_layer2(users[i].user_id, users[i].istfcs, cp, dp, stations).record;
  });
  std::vector<CommuterRecord> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  std::sort(out.begin(), out.end(),
            [](const CommuterRecord& a, const CommuterRecord& b) { return a.user_id < b.user_id; });
  return out;
}

AnalysisResults run_aggregation(std::vector<CommuterRecord> records, const Projection& proj,
                                std::vector<Station> stations,
                                std::span<const ResidentialParcel> parcels, const RunConfig& cfg,
                                bool validate) {
  AnalysisResults a;
  a.projection = proj;
  a.stations = std::move(stations);
  a.commuters = std::move(records);
  a.summary = summarize_commuters(a.commuters, cfg.bins);
  a.station_usage = station_usage(a.commuters);
  a.flow_clusters = cluster_commute_flows(a.commuters, cfg.effective_cluster());
  if (validate) {
    a.validation = parcels.empty()
                       ? ValidationCurve{}
                       : validate_residences(a.commuters, parcels, cfg.validation_step_m,
                                             cfg.validation_max_m);
  }
  return a;
}

Layer1Indicators layer1_indicators(std::span<const UserLayer1> users) {
  Layer1Indicators ind;
  double records = 0, len = 0, d_o = 0, d_d = 0, od1500 = 0, od3000 = 0;
  std::size_t members = 0, members1500 = 0, members3000 = 0;
  double t_records = 0, t_interval = 0;
  for (const UserLayer1& u : users) {
    for (const ISFC& c : u.clusters.reliable_isfcs) {
      ++ind.isfcs;
      records += static_cast<double>(c.n());
      len += c.len;
      for (const std::uint32_t m : c.members) {
        const Flow& f = u.flows[m];
        const double a = dist(f.origin, c.medoid_o);
        const double b = dist(f.destination, c.medoid_d);
        d_o += a;
        d_d += b;
        ++members;
        if (c.len > 1500.0) {
          od1500 += (a + b) / 2.0;
          ++members1500;
        }
        if (c.len > 3000.0) {
          od3000 += (a + b) / 2.0;
          ++members3000;
        }
      }
    }
    for (const ISTFC& c : u.clusters.merged_istfcs) {
      ++ind.istfcs;
      t_records += static_cast<double>(c.n_prime());
      std::vector<double> starts;
      starts.reserve(c.members.size());
      for (const std::uint32_t m : c.members) starts.push_back(u.flows[m].span.start.minutes);
      t_interval += covering_arc(std::move(starts));
    }
  }
  ind.avg_isfc_records = mean(records, ind.isfcs);
  ind.avg_isfc_len_m = mean(len, ind.isfcs);
  ind.avg_dist_o_m = mean(d_o, members);
  ind.avg_dist_d_m = mean(d_d, members);
  ind.avg_dist_od_m = mean((d_o + d_d) / 2.0, members);
  ind.avg_dist_od_gt1500_m = mean(od1500, members1500);
  ind.avg_dist_od_gt3000_m = mean(od3000, members3000);
  ind.avg_istfc_records = mean(t_records, ind.istfcs);
  ind.avg_max_interval_min = mean(t_interval, ind.istfcs);
  return ind;
}

std::vector<CompareRow> run_compare(const IngestResult& in, const RunConfig& cfg) {
  std::vector<CompareRow> rows;
  const ClusterParams improved = cfg.cluster;
  ClusterParams uncapped = improved;
  uncapped.r_max = std::numeric_limits<double>::infinity();
  ClusterParams original = uncapped;
  original.beta = 0.0;
  rows.push_back({"improved", improved, {}});
  rows.push_back({"uncapped", uncapped, {}});
  rows.push_back({"original", original, {}});
  for (const double b : cfg.compare_betas) {
    ClusterParams p = improved;
    p.beta = b;
    char name[32];
    std::snprintf(name, sizeof name, "beta_%g", b);
    rows.push_back({name, p, {}});
  }
  for (CompareRow& row : rows) {
    row.indicators = layer1_indicators(run_clustering(in, row.params, cfg.workers));
  }
  return rows;
}

std::string format_compare_csv(std::span<const CompareRow> rows) {
  std::string out =
      "variant,alpha,r_max,beta,isfc_count,avg_records_per_isfc,avg_isfc_len_m,avg_dist_origin_m,"
      "avg_dist_dest_m,avg_dist_od_m,avg_dist_od_gt1500_m,avg_dist_od_gt3000_m,istfc_count,"
      "avg_records_per_istfc,avg_max_interval_min\n";
  for (const CompareRow& r : rows) {
    const Layer1Indicators& i = r.indicators;
    out += r.variant + ',' + fixed(r.params.alpha, 3) + ',' +
           (std::isinf(r.params.r_max) ? std::string("inf") : fixed(r.params.r_max, 1)) + ',' +
           fixed(r.params.beta, 1) + ',' + std::to_string(i.isfcs) + ',' +
           fixed(i.avg_isfc_records, 4) + ',' + fixed(i.avg_isfc_len_m, 2) + ',' +
           fixed(i.avg_dist_o_m, 3) + ',' + fixed(i.avg_dist_d_m, 3) + ',' +
           fixed(i.avg_dist_od_m, 3) + ',' + fixed(i.avg_dist_od_gt1500_m, 3) + ',' +
           fixed(i.avg_dist_od_gt3000_m, 3) + ',' + std::to_string(i.istfcs) + ',' +
           fixed(i.avg_istfc_records, 4) + ',' + fixed(i.avg_max_interval_min, 3) + '\n';
  }
  return out;
}

PipelineResult run_pipeline(const PipelineInputs& inputs, const RunConfig& cfg) {
  cfg.validate();
  PipelineResult r;
  r.ingest = run_ingest(inputs.trips, inputs.rainy_days, cfg);
  const ClusterParams cp = cfg.effective_cluster();
  r.layer1 = run_clustering(r.ingest, cp, cfg.workers);

  Parsed<Station> stations;
  if (!inputs.stations_text.empty()) stations = parse_stations(inputs.stations_text, r.ingest.projection);
  r.dropped_stations = stations.dropped;
  const StationIndex index(stations.items);
  const std::vector<UserIstfcs> istfcs = reliable_istfcs(r.layer1);
  std::vector<CommuterRecord> records =
      run_classification(istfcs, cp, cfg.decision, index, cfg.workers);

  Parsed<ResidentialParcel> parcels;
  if (!inputs.parcels_text.empty()) parcels = parse_parcels(inputs.parcels_text, r.ingest.projection);
  r.dropped_parcels = parcels.dropped;
  r.analysis = run_aggregation(std::move(records), r.ingest.projection, std::move(stations.items),
                               parcels.items, cfg, true);
  if (inputs.truth) {
    r.metrics = score_recovery(r.analysis.commuters, r.analysis.stations, *inputs.truth,
                               r.ingest.projection, cfg.score_tolerance_m);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

using HashMap = std::map<std::string, std::string>;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class OutDir {
 public:
  explicit OutDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& contents) {
    write_file(dir_ / name, contents);
    outputs[name] = content_hash(contents);
  }

  // Reads a file written by an earlier stage and checks it against the
  // hash that stage recorded.
  std::string read_checked(const std::string& name, const json& stamp) const {
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) throw Error("missing stage output " + p.string());
    std::string text = read_file(p);
    const std::string want = stamp["outputs"].value(name, "");
    if (want != content_hash(text)) {
      throw Error(p.string() + " changed since stage '" + stamp.value("stage", "?") +
                  "' wrote it; rerun that stage");
    }
    return text;
  }

  json stamp(const std::string& stage, const std::string& expected_hash) const {
    const fs::path p = dir_ / ("stage_" + stage + ".json");
    if (!fs::exists(p)) {
      throw Error("no " + p.filename().string() + " in " + dir_.string() + "; run `" + stage +
                  "` (or `all`) first");
    }
    json j = json::parse(read_file(p), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(p.string() + " is not valid JSON");
    if (j.value("config_hash", "") != expected_hash) {
      throw Error("stage '" + stage + "' outputs were produced with a different configuration; rerun `" +
                  stage + "`");
    }
    return j;
  }

  void write_stamp(const std::string& stage, const std::string& hash, const HashMap& inputs,
                   const std::vector<std::string>& names, json extra = json::object()) {
    json j = std::move(extra);
    j["stage"] = stage;
    j["config_hash"] = hash;
    j["inputs"] = inputs;
    json outs = json::object();
    for (const std::string& n : names) outs[n] = outputs.at(n);
    j["outputs"] = outs;
    write("stage_" + stage + ".json", j.dump(2) + "\n");
  }

  const fs::path& path() const { return dir_; }

  HashMap outputs;

 private:
  fs::path dir_;
};

HashMap input_hash(HashMap m, const fs::path& p, const std::string& text) {
  if (!p.empty()) m[p.filename().string()] = content_hash(text);
  return m;
}

json projection_json(const Projection& p) {
  return {{"lon", p.reference().lon}, {"lat", p.reference().lat}};
}

Projection projection_from(const json& stamp) {
  const json& p = stamp.at("projection");
  return Projection({p.at("lon").get<double>(), p.at("lat").get<double>()});
}

struct Context {
  RunConfig cfg;
  OutDir out;
  HashMap inputs;
  std::ostream& log;
};

void log_counts(std::ostream& log, const std::string& what, const ReasonCounts& c) {
  for (const auto& [reason, n] : c) log << "  " << what << " dropped " << n << " (" << reason << ")\n";
}

// --- ingest -----------------------------------------------------------------

IngestResult ingest_stage(Context& ctx) {
  Timer t;
  const std::string trips_text = read_required(ctx.cfg.trips, "trips");
  std::vector<Date> rainy;
  ctx.inputs = input_hash(ctx.inputs, ctx.cfg.trips, trips_text);
  if (!ctx.cfg.rainy_days.empty()) {
    const std::string rainy_text = read_required(ctx.cfg.rainy_days, "rainy_days");
    rainy = parse_rainy_days(rainy_text);
    ctx.inputs = input_hash(ctx.inputs, ctx.cfg.rainy_days, rainy_text);
  }
  IngestResult r = run_ingest(parse_trips(trips_text), rainy, ctx.cfg);
  ctx.out.write("cleaned_trips.csv", format_trips(r.trips));
  ctx.out.write("cleaning_report.csv", format_cleaning_report(r));
  json extra;
  extra["projection"] = projection_json(r.projection);
  const auto& days = r.calendar.study_weekdays;
  extra["study_start"] = days.empty() ? "" : format_date(*days.begin());
  extra["study_end"] = days.empty() ? "" : format_date(*days.rbegin());
  json rainy_list = json::array();
  for (const Date d : r.calendar.rainy_days) rainy_list.push_back(format_date(d));
  extra["rainy_days"] = rainy_list;
  ctx.out.write_stamp("ingest", config_hash(ctx.cfg, ConfigGroup::ingest), ctx.inputs,
                      {"cleaned_trips.csv", "cleaning_report.csv"}, extra);
  ctx.log << "ingest: " << r.rows_in << " rows -> " << r.trips.size() << " trips of "
          << r.active_weekdays.size() << " active users over " << days.size() << " weekdays ("
          << fixed(t.seconds(), 2) << " s)\n";
  return r;
}

IngestResult reload_ingest(Context& ctx, json& stamp) {
  stamp = ctx.out.stamp("ingest", config_hash(ctx.cfg, ConfigGroup::ingest));
  const std::string text = ctx.out.read_checked("cleaned_trips.csv", stamp);
  ctx.inputs["cleaned_trips.csv"] = content_hash(text);
  IngestResult r;
  r.projection = projection_from(stamp);
  TripTable table = parse_trips(text);
  r.rows_in = table.rows;
  r.trips = std::move(table.trips);
  std::vector<Date> rainy;
  for (const json& d : stamp.at("rainy_days")) rainy.push_back(*parse_date(d.get<std::string>()));
  const auto first = parse_date(stamp.value("study_start", ""));
  const auto last = parse_date(stamp.value("study_end", ""));
  if (first && last) r.calendar = Calendar::from_range(*first, *last, rainy);
  for (const auto& [user, n] : count_active_weekdays(r.trips, r.calendar)) r.active_weekdays.emplace(user, n);
  return r;
}

// --- cluster ----------------------------------------------------------------

std::vector<UserLayer1> cluster_stage(Context& ctx, const IngestResult& in) {
  Timer t;
  std::vector<UserLayer1> users = run_clustering(in, ctx.cfg.effective_cluster(), ctx.cfg.workers);
  std::vector<std::string> names{"istfc.csv"};
  ctx.out.write("istfc.csv", format_istfc_csv(users, in.projection));
  if (ctx.cfg.debug_dumps) {
    ctx.out.write("isfc.csv", format_isfc_csv(users, in.projection));
    names.push_back("isfc.csv");
  }
  json extra;
  extra["projection"] = projection_json(in.projection);
  ctx.out.write_stamp("cluster", config_hash(ctx.cfg, ConfigGroup::cluster), ctx.inputs, names, extra);
  std::size_t isfc = 0, istfc = 0;
  for (const UserLayer1& u : users) {
    isfc += u.clusters.reliable_isfcs.size();
    istfc += u.clusters.istfcs.size();
  }
  ctx.log << "cluster: " << users.size() << " users, " << isfc << " reliable ISFCs, " << istfc
          << " reliable ISTFCs (" << fixed(t.seconds(), 2) << " s)\n";
  return users;
}

// --- classify ---------------------------------------------------------------

std::vector<Station> load_stations(Context& ctx, const Projection& proj) {
  if (ctx.cfg.stations.empty()) {
    ctx.log << "  no stations configured; every commuter is OnlyBiking\n";
    return {};
  }
  const std::string text = read_required(ctx.cfg.stations, "stations");
  ctx.inputs = input_hash(ctx.inputs, ctx.cfg.stations, text);
  Parsed<Station> s = parse_stations(text, proj);
  log_counts(ctx.log, "stations", s.dropped);
  return std::move(s.items);
}

std::vector<CommuterRecord> classify_stage(Context& ctx, std::span<const UserIstfcs> users,
                                           const Projection& proj,
                                           const std::vector<Station>& stations) {
  Timer t;
  const StationIndex index(stations);
  std::vector<CommuterRecord> records =
      run_classification(users, ctx.cfg.effective_cluster(), ctx.cfg.decision, index, ctx.cfg.workers);
  ctx.out.write("classified.csv", format_classified_csv(records, stations));
  json extra;
  extra["projection"] = projection_json(proj);
  ctx.out.write_stamp("classify", config_hash(ctx.cfg, ConfigGroup::classify), ctx.inputs,
                      {"classified.csv"}, extra);
  ctx.log << "classify: " << records.size() << " commuters among " << users.size() << " users ("
          << fixed(t.seconds(), 2) << " s)\n";
  return records;
}

// --- aggregate / validate -----------------------------------------------------

std::vector<ResidentialParcel> load_parcels(Context& ctx, const Projection& proj, bool required) {
  if (ctx.cfg.parcels.empty()) {
    if (required) throw Error("missing input: no parcels path configured");
    return {};
  }
  const std::string text = read_required(ctx.cfg.parcels, "parcels");
  ctx.inputs = input_hash(ctx.inputs, ctx.cfg.parcels, text);
  Parsed<ResidentialParcel> p = parse_parcels(text, proj);
  log_counts(ctx.log, "parcels", p.dropped);
  return std::move(p.items);
}

void write_artifacts(Context& ctx, const AnalysisResults& a) {
  for (const auto& [name, contents] : render_artifacts(a)) ctx.out.write(name, contents);
}

void score_stage(Context& ctx, const AnalysisResults& a) {
  if (ctx.cfg.ground_truth.empty()) return;
  const std::string text = read_required(ctx.cfg.ground_truth, "ground_truth");
  ctx.inputs = input_hash(ctx.inputs, ctx.cfg.ground_truth, text);
  const RecoveryMetrics m = score_recovery(a.commuters, a.stations, parse_ground_truth_csv(text),
                                           a.projection, ctx.cfg.score_tolerance_m);
  ctx.out.write("metrics.csv", format_metrics_csv(m));
  ctx.log << "score: accuracy " << fixed(m.category_accuracy, 4) << ", home/work hits "
          << fixed(m.position_hit_rate, 4) << ", noise FPR " << fixed(m.noise_fpr, 4) << '\n';
}

void log_shares(std::ostream& log, const AnalysisResults& a) {
  for (const CommuterCategory c : kAllCategories) {
    const auto it = a.summary.counts.find(c);
    log << "  " << to_string(c) << ": " << (it == a.summary.counts.end() ? 0 : it->second) << '\n';
  }
}

// --- manifest -----------------------------------------------------------------

void write_manifest(Context& ctx, const std::string& sub, ConfigGroup group) {
  json j;
  j["tool"] = "commute-miner";
  j["version"] = COMMUTE_VERSION;
  j["subcommand"] = sub;
  j["config_hash"] = config_hash(ctx.cfg, group);
  j["config"] = canonical_config(ctx.cfg, group);
  j["inputs"] = ctx.inputs;
  j["outputs"] = ctx.out.outputs;
  write_file(ctx.out.path() / "run.json", j.dump(2) + "\n");
}

void synth_command(Context& ctx) {
  Timer t;
  const SynthCity city = generate_city(ctx.cfg.synth);
  const SynthTrips trips = generate_trips(city, ctx.cfg.synth, ctx.cfg.workers);
  write_synth_outputs(city, trips, ctx.out.path());
  for (const char* name : {"trips.csv", "stations.geojson", "parcels.geojson", "rainy_days.txt",
                           "ground_truth.csv", "ground_truth_trips.csv"}) {
    ctx.out.outputs[name] = content_hash(read_file(ctx.out.path() / name));
  }
  RunConfig next = ctx.cfg;
  next.trips = "trips.csv";
  next.stations = "stations.geojson";
  next.parcels = "parcels.geojson";
  next.rainy_days = "rainy_days.txt";
  next.ground_truth = "ground_truth.csv";
  next.out = "results";
  const auto& days = city.truth.calendar.study_weekdays;
  if (!days.empty()) {
    next.study_start = format_date(*days.begin());
    next.study_end = format_date(*days.rbegin());
  }
  ctx.out.write("pipeline.conf", "# Generated by `commute-miner synth`; paths are relative to this file.\n\n" +
                                     format_config(next));
  ctx.log << "synth: " << city.truth.users.size() << " users, " << trips.trips.size() << " trips, "
          << city.stations.size() << " stations, " << city.parcels.size() << " parcels ("
          << fixed(t.seconds(), 2) << " s)\n"
          << "  next: commute-miner all --config " << (ctx.out.path() / "pipeline.conf").string() << '\n';
}

void all_command(Context& ctx) {
  const IngestResult in = ingest_stage(ctx);
  const std::vector<UserLayer1> users = cluster_stage(ctx, in);
  const std::vector<Station> stations = load_stations(ctx, in.projection);
  const std::vector<CommuterRecord> records =
      classify_stage(ctx, reliable_istfcs(users), in.projection, stations);
  const std::vector<ResidentialParcel> parcels = load_parcels(ctx, in.projection, false);
  Timer t;
  const AnalysisResults a = run_aggregation(records, in.projection, stations, parcels, ctx.cfg, true);
  write_artifacts(ctx, a);
  score_stage(ctx, a);
  ctx.log << "aggregate: " << a.commuters.size() << " commuters, " << a.flow_clusters.size()
          << " commute flow clusters (" << fixed(t.seconds(), 2) << " s)\n";
  log_shares(ctx.log, a);
}

}  // namespace

int run_command(const CommandLine& cmd, std::ostream& log, std::ostream& err) {
  try {
    const auto known = std::find(std::begin(kSubcommands), std::end(kSubcommands), cmd.subcommand);
    if (known == std::end(kSubcommands)) throw Error("unknown subcommand '" + cmd.subcommand + "'");
    RunConfig cfg = load_config(cmd.config);
    if (cmd.out) cfg.out = *cmd.out;
    if (cmd.seed) cfg.synth.seed = *cmd.seed;
    if (cmd.workers) cfg.workers = *cmd.workers;
    cfg.validate();

    const std::string& sub = cmd.subcommand;
    const fs::path out_dir = sub == "compare" ? cfg.out / "compare" : cfg.out;
    Context ctx{cfg, OutDir(out_dir), {}, log};
    ConfigGroup group = ConfigGroup::aggregate;

    if (sub == "synth") {
      group = ConfigGroup::synth;
      synth_command(ctx);
    } else if (sub == "ingest") {
      group = ConfigGroup::ingest;
      ingest_stage(ctx);
    } else if (sub == "cluster") {
      group = ConfigGroup::cluster;
      json stamp;
      cluster_stage(ctx, reload_ingest(ctx, stamp));
    } else if (sub == "classify") {
      group = ConfigGroup::classify;
      const json stamp = ctx.out.stamp("cluster", config_hash(cfg, ConfigGroup::cluster));
      const std::string text = ctx.out.read_checked("istfc.csv", stamp);
      ctx.inputs["istfc.csv"] = content_hash(text);
      const Projection proj = projection_from(stamp);
      classify_stage(ctx, parse_istfc_csv(text), proj, load_stations(ctx, proj));
    } else if (sub == "aggregate" || sub == "validate") {
      const json stamp = ctx.out.stamp("classify", config_hash(cfg, ConfigGroup::classify));
      const std::string text = ctx.out.read_checked("classified.csv", stamp);
      ctx.inputs["classified.csv"] = content_hash(text);
      const Projection proj = projection_from(stamp);
      const std::vector<Station> stations = load_stations(ctx, proj);
      std::vector<CommuterRecord> records = parse_classified_csv(text, stations);
      const bool validate = sub == "validate";
      const std::vector<ResidentialParcel> parcels = load_parcels(ctx, proj, validate);
      const AnalysisResults a =
          run_aggregation(std::move(records), proj, stations, parcels, cfg, validate);
      if (validate) {
        ctx.out.write("validation_curve.csv", format_validation_csv(*a.validation));
        score_stage(ctx, a);
        ctx.log << "validate: " << a.validation->users << " homes checked against "
                << parcels.size() << " parcels\n";
      } else {
        for (const auto& [name, contents] : render_artifacts(a)) ctx.out.write(name, contents);
        ctx.log << "aggregate: " << a.commuters.size() << " commuters\n";
        log_shares(log, a);
      }
    } else if (sub == "all") {
      all_command(ctx);
    } else if (sub == "compare") {
      Timer t;
      const std::string trips_text = read_required(cfg.trips, "trips");
      ctx.inputs = input_hash(ctx.inputs, cfg.trips, trips_text);
      std::vector<Date> rainy;
      if (!cfg.rainy_days.empty()) {
        const std::string rainy_text = read_required(cfg.rainy_days, "rainy_days");
        rainy = parse_rainy_days(rainy_text);
        ctx.inputs = input_hash(ctx.inputs, cfg.rainy_days, rainy_text);
      }
      const IngestResult in = run_ingest(parse_trips(trips_text), rainy, cfg);
      ctx.out.write("compare.csv", format_compare_csv(run_compare(in, cfg)));
      group = ConfigGroup::aggregate;
      ctx.log << "compare: wrote " << (out_dir / "compare.csv").string() << " ("
              << fixed(t.seconds(), 2) << " s)\n";
    }
    write_manifest(ctx, sub, group);
    return 0;
  } catch (const std::exception& e) {
    err << "commute-miner " << cmd.subcommand << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace commute
