#include "commute/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "commute/csv.hpp"
#include "commute/error.hpp"

namespace commute {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_real(std::string_view key, std::string_view v) {
  const auto d = parse_double(v);
  if (!d) throw Error("config: " + std::string(key) + " expects a number, got '" + std::string(v) + "'");
  return *d;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  const auto d = parse_int(v);
  if (!d) throw Error("config: " + std::string(key) + " expects an integer, got '" + std::string(v) + "'");
  return *d;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: " + std::string(key) + " expects true or false");
}

TimeOfDay to_time(std::string_view key, std::string_view v) {
  const auto colon = v.find(':');
  if (colon == std::string_view::npos) return {to_real(key, v)};
  const auto h = parse_int(v.substr(0, colon));
  const auto m = parse_int(v.substr(colon + 1));
  if (!h || !m || *h < 0 || *h > 24 || *m < 0 || *m > 59) {
    throw Error("config: " + std::string(key) + " expects HH:MM");
  }
  return {static_cast<double>(*h * 60 + *m)};
}

std::string from_time(TimeOfDay t) {
  if (t.minutes == std::floor(t.minutes)) return format_hhmm(t);
  return shortest(t.minutes);
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string_view name;
  ConfigGroup group;
  std::string_view doc;
  Setter set;
  Getter get;
};

template <typename M>
Key real(std::string_view name, ConfigGroup g, std::string_view doc, M member) {
  return {name, g, doc,
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = to_real(k, v); },
          [member](const RunConfig& c) { return shortest(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Key integer(std::string_view name, ConfigGroup g, std::string_view doc, M member) {
  return {name, g, doc,
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            const auto n = to_int(k, v);
            using T = std::remove_reference_t<decltype(member(c))>;
            if (n < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
                static_cast<std::uint64_t>(std::max<std::int64_t>(n, 0)) >
                    static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
              throw Error("config: " + std::string(k) + " is out of range");
            }
            member(c) = static_cast<T>(n);
          },
          [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Key flag(std::string_view name, ConfigGroup g, std::string_view doc, M member) {
  return {name, g, doc,
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = to_bool(k, v); },
          [member](const RunConfig& c) {
            return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <typename M>
Key time(std::string_view name, ConfigGroup g, std::string_view doc, M member) {
  return {name, g, doc,
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = to_time(k, v); },
          [member](const RunConfig& c) { return from_time(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Key text(std::string_view name, ConfigGroup g, std::string_view doc, M member) {
  return {name, g, doc,
          [member](RunConfig& c, std::string_view, std::string_view v) { member(c) = std::string(v); },
          [member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Key path(std::string_view name, ConfigGroup g, std::string_view doc, M member) {
  return {name, g, doc,
          [member](RunConfig& c, std::string_view, std::string_view v) { member(c) = std::string(v); },
          [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)).generic_string(); }};
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

using G = ConfigGroup;

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      path("trips", G::ingest, "trip CSV", FIELD(trips)),
      path("rainy_days", G::ingest, "rainy weekdays, one YYYY-MM-DD per line (optional)", FIELD(rainy_days)),
      text("study_start", G::ingest, "first study day; empty uses the earliest trip date", FIELD(study_start)),
      text("study_end", G::ingest, "last study day; empty uses the latest trip date", FIELD(study_end)),
      real("min_duration_min", G::ingest, "shortest plausible trip, minutes", FIELD(cleaning.min_duration_min)),
      real("max_duration_min", G::ingest, "longest plausible trip, minutes", FIELD(cleaning.max_duration_min)),
      real("min_distance_m", G::ingest, "shortest straight-line trip, metres", FIELD(cleaning.min_distance_m)),
      real("max_distance_m", G::ingest, "longest straight-line trip, metres", FIELD(cleaning.max_distance_m)),
      real("min_speed_kmh", G::ingest, "slowest implied speed", FIELD(cleaning.min_speed_kmh)),
      real("max_speed_kmh", G::ingest, "fastest implied speed", FIELD(cleaning.max_speed_kmh)),

      real("alpha", G::cluster, "boundary radius as a fraction of the shorter flow", FIELD(cluster.alpha)),
      real("r_max", G::cluster, "boundary radius cap, metres (inf disables the cap)", FIELD(cluster.r_max)),
      real("beta", G::cluster, "minutes added to both ends of every trip span", FIELD(cluster.beta)),
      real("ts_min", G::cluster, "temporal similarity needed to link two flows", FIELD(cluster.ts_min)),
      real("sd_max", G::cluster, "spatial dissimilarity allowed between linked flows", FIELD(cluster.sd_max)),
      real("isfc_weekday_fraction", G::cluster, "reliable ISFC size as a fraction of active weekdays",
           FIELD(cluster.isfc_weekday_fraction)),
      real("istfc_parent_fraction", G::cluster, "reliable ISTFC size as a fraction of its ISFC",
           FIELD(cluster.istfc_parent_fraction)),
      flag("uncap_radius", G::cluster, "original method: no radius cap", FIELD(uncap_radius)),
      flag("beta_zero", G::cluster, "original method: no span widening", FIELD(beta_zero)),

      path("stations", G::classify, "metro and bus stations, GeoJSON or CSV", FIELD(stations)),
      real("t_wh", G::classify, "minimum working hours, minutes", FIELD(decision.t_wh)),
      real("td_metro", G::classify, "metro transfer distance, metres", FIELD(decision.td_metro)),
      real("td_bus", G::classify, "bus transfer distance, metres", FIELD(decision.td_bus)),
      time("op_start", G::classify, "transit service start", FIELD(decision.op_start)),
      time("op_end", G::classify, "transit service end", FIELD(decision.op_end)),
      real("iadcf_window", G::classify, "IADCF temporal window, minutes", FIELD(decision.iadcf_window)),
      time("morning_anchor", G::classify, "the earlier side of a pair departs nearer this time",
           FIELD(decision.morning_anchor)),

      path("parcels", G::aggregate, "residential parcels GeoJSON (optional)", FIELD(parcels)),
      path("ground_truth", G::aggregate, "synthetic ground truth for scoring (optional)", FIELD(ground_truth)),
      real("bin_time_min", G::aggregate, "departure histogram bin, minutes", FIELD(bins.time_min)),
      real("bin_ct_min", G::aggregate, "commute time histogram bin, minutes", FIELD(bins.ct_min)),
      real("bin_cd_m", G::aggregate, "commute distance histogram bin, metres", FIELD(bins.cd_m)),
      real("bin_wh_min", G::aggregate, "working hours histogram bin, minutes", FIELD(bins.wh_min)),
      real("bin_r_rt", G::aggregate, "round-trip ratio histogram bin", FIELD(bins.r_rt)),
      real("validation_step_m", G::aggregate, "residence validation step, metres", FIELD(validation_step_m)),
      real("validation_max_m", G::aggregate, "residence validation range, metres", FIELD(validation_max_m)),
      real("score_tolerance_m", G::aggregate, "home/work hit radius when scoring", FIELD(score_tolerance_m)),
      {"compare_betas", G::aggregate, "beta values swept by compare, comma separated",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.compare_betas.clear();
         for (const std::string& part : split_csv(v)) c.compare_betas.push_back(to_real(k, trim(part)));
       },
       [](const RunConfig& c) {
         std::string out;
         for (const double b : c.compare_betas) out += (out.empty() ? "" : ",") + shortest(b);
         return out;
       }},

      integer("synth_seed", G::synth, "generator seed", FIELD(synth.seed)),
      integer("synth_only_biking", G::synth, "OnlyBiking users", FIELD(synth.n_only_biking)),
      integer("synth_biking_transit", G::synth, "BikingTransit users", FIELD(synth.n_biking_transit)),
      integer("synth_transit_biking", G::synth, "TransitBiking users", FIELD(synth.n_transit_biking)),
      integer("synth_biking_transit_biking", G::synth, "BikingTransitBiking users",
              FIELD(synth.n_biking_transit_biking)),
      integer("synth_noise", G::synth, "users without a commute", FIELD(synth.n_noise)),
      integer("synth_metro_stations", G::synth, "metro stations", FIELD(synth.n_metro_stations)),
      integer("synth_bus_stations", G::synth, "bus stops", FIELD(synth.n_bus_stations)),
      integer("synth_parcels", G::synth, "residential parcels", FIELD(synth.n_parcels)),
      integer("synth_job_centers", G::synth, "employment centres", FIELD(synth.n_job_centers)),
      integer("synth_study_weekdays", G::synth, "weekdays generated", FIELD(synth.study_weekdays)),
      integer("synth_rainy_days", G::synth, "rainy weekdays among them", FIELD(synth.rainy_days)),
      text("synth_start_date", G::synth, "first generated day", FIELD(synth.start_date)),
      real("synth_spatial_jitter_sd", G::synth, "endpoint noise per coordinate, metres",
           FIELD(synth.spatial_jitter_sd)),
      real("synth_temporal_jitter_sd", G::synth, "departure noise, minutes", FIELD(synth.temporal_jitter_sd)),
      real("synth_skip_prob_per_leg", G::synth, "chance a commuting ride is missing", FIELD(synth.skip_prob_per_leg)),
      real("synth_mean_trips_per_active_day", G::synth, "target rides per active day",
           FIELD(synth.mean_trips_per_active_day)),
      real("synth_center_lon", G::synth, "city centre longitude", FIELD(synth.center.lon)),
      real("synth_center_lat", G::synth, "city centre latitude", FIELD(synth.center.lat)),
      real("synth_city_size_m", G::synth, "side of the square city, metres", FIELD(synth.city_size_m)),
      real("synth_active_prob_dry", G::synth, "chance of riding on a dry weekday", FIELD(synth.active_prob_dry)),
      real("synth_active_prob_rainy", G::synth, "chance of riding on a rainy weekday",
           FIELD(synth.active_prob_rainy)),
      real("synth_bus_transfer_share", G::synth, "transfer users served by bus", FIELD(synth.bus_transfer_share)),
      real("synth_to_work_mean", G::synth, "mean morning departure, minutes of day", FIELD(synth.to_work_mean)),
      real("synth_back_home_mean", G::synth, "mean evening departure, minutes of day", FIELD(synth.back_home_mean)),
      real("synth_departure_spread_sd", G::synth, "spread of personal departure times, minutes",
           FIELD(synth.departure_spread_sd)),
      real("synth_station_clearance_m", G::synth, "minimum distance of homes and workplaces from stations",
           FIELD(synth.station_clearance_m)),

      path("out", G::run, "output directory", FIELD(out)),
      integer("workers", G::run, "worker threads; outputs do not depend on it", FIELD(workers)),
      flag("debug_dumps", G::run, "write isfc.csv alongside the stage intermediates", FIELD(debug_dumps)),
  };
  return table;
}

#undef FIELD

const Key* find_key(std::string_view name) {
  for (const Key& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

bool is_path_key(std::string_view name) {
  return name == "trips" || name == "rainy_days" || name == "stations" || name == "parcels" ||
         name == "ground_truth" || name == "out";
}

}  // namespace

ClusterParams RunConfig::effective_cluster() const {
  ClusterParams p = cluster;
  if (uncap_radius) p.r_max = std::numeric_limits<double>::infinity();
  if (beta_zero) p.beta = 0.0;
  return p;
}

void RunConfig::validate() const {
  cleaning.validate();
  cluster.validate();
  decision.validate();
  synth.validate();
  const double widths[] = {bins.time_min, bins.ct_min, bins.cd_m, bins.wh_min, bins.r_rt};
  for (const double w : widths) {
    if (!(w > 0.0)) throw Error("histogram bin widths must be positive");
  }
  if (!(validation_step_m > 0.0) || !(validation_max_m >= 0.0)) {
    throw Error("validation step must be positive and the range non-negative");
  }
  if (!(score_tolerance_m >= 0.0)) throw Error("score_tolerance_m must be >= 0");
  if (workers < 1) throw Error("workers must be >= 1");
  for (const double b : compare_betas) {
    if (!(b >= 0.0)) throw Error("compare_betas must be >= 0");
  }
  if (study_start.empty() != study_end.empty()) {
    throw Error("study_start and study_end must be given together");
  }
  if (!study_start.empty()) {
    const auto a = parse_date(study_start);
    const auto b = parse_date(study_end);
    if (!a || !b || *b < *a) throw Error("study_start / study_end must be ordered YYYY-MM-DD dates");
  }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  LineCursor cur(text);
  std::string_view line;
  while (cur.next(line)) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(cur.line_number());
    if (eq == std::string_view::npos) throw Error(where + ": expected key = value");
    const std::string_view name = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* key = find_key(name);
    if (key == nullptr) throw Error(where + ": unknown key '" + std::string(name) + "'");
    if (!seen.emplace(name).second) throw Error(where + ": duplicate key '" + std::string(name) + "'");
    if (is_path_key(name) && !value.empty() && !base_dir.empty() &&
        std::filesystem::path(value).is_relative()) {
      key->set(cfg, name, (base_dir / value).lexically_normal().generic_string());
    } else {
      key->set(cfg, name, value);
    }
  }
  if (!seen.contains("out") && !base_dir.empty()) cfg.out = (base_dir / cfg.out).lexically_normal();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  return parse_config(read_file(path), path.parent_path());
}

std::string format_config(const RunConfig& cfg) {
  static constexpr std::string_view kHeadings[] = {"ingest", "layer 1 clustering", "layer 2 decisions",
                                                   "aggregation and validation", "synthetic city",
                                                   "run"};
  std::string out;
  int group = -1;
  for (const Key& k : keys()) {
    if (static_cast<int>(k.group) != group) {
      group = static_cast<int>(k.group);
      if (!out.empty()) out += '\n';
      out += "# --- " + std::string(kHeadings[group]) + " ---\n";
    }
    out += "# " + std::string(k.doc) + '\n';
    out += std::string(k.name) + " = " + k.get(cfg) + '\n';
  }
  return out;
}

std::string canonical_config(const RunConfig& cfg, ConfigGroup upto) {
  std::map<std::string_view, std::string> lines;
  for (const Key& k : keys()) {
    const bool covered = upto == ConfigGroup::synth
                             ? k.group == ConfigGroup::synth
                             : k.group != ConfigGroup::synth && k.group != ConfigGroup::run &&
                                   static_cast<int>(k.group) <= static_cast<int>(upto);
    if (covered) lines.emplace(k.name, k.get(cfg));
  }
  std::string out;
  for (const auto& [name, value] : lines) out += std::string(name) + '=' + value + '\n';
  return out;
}

std::string config_hash(const RunConfig& cfg, ConfigGroup upto) {
  return hex64(fnv1a64(canonical_config(cfg, upto)));
}

}  // namespace commute
