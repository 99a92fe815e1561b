#include "commute/export.hpp"

#include <algorithm>
#include <cmath>
#include <system_error>

#include <json.hpp>

#include "commute/csv.hpp"
#include "commute/error.hpp"

namespace commute {

namespace {

std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

std::string coord(GeoPoint g) { return "[" + fixed(g.lon, 6) + "," + fixed(g.lat, 6) + "]"; }

std::string lonlat(GeoPoint g) { return fixed(g.lon, 6) + "," + fixed(g.lat, 6); }

std::string station_ids(const CommuterRecord& r, std::span<const Station> stations) {
  std::string out;
  for (const std::size_t s : r.transfer_stations()) {
    if (!out.empty()) out += ';';
    out += stations[s].id;
  }
  return out;
}

std::string station_modes(const CommuterRecord& r, std::span<const Station> stations) {
  std::string out;
  for (const std::size_t s : r.transfer_stations()) {
    if (!out.empty()) out += ';';
    out += to_string(stations[s].mode);
  }
  return out;
}

bool has_duration(CommuterCategory c) {
  return c == CommuterCategory::OnlyBiking || c == CommuterCategory::BikingTransitBiking;
}

bool has_wh(CommuterCategory c) { return c != CommuterCategory::BikingTransit; }

std::string opt(bool present, const std::string& v) { return present ? v : std::string(); }

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// Reads a CSV whose first line must equal `header`.
std::vector<Row> read_rows(std::string_view text, std::string_view header, const char* what) {
  LineCursor cur(text);
  std::string_view line;
  if (!cur.next(line) || line != header) throw Error(std::string(what) + ": unexpected header");
  const std::size_t width = split_csv(header).size();
  std::vector<Row> rows;
  while (cur.next(line)) {
    if (line.empty()) continue;
    Row r{split_csv(line), cur.line_number()};
    if (r.fields.size() != width) {
      throw Error(std::string(what) + ": wrong field count on line " + std::to_string(r.line));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

double num(const Row& r, std::size_t i, const char* what) {
  const auto v = parse_double(r.fields[i]);
  if (!v) throw Error(std::string(what) + ": bad number on line " + std::to_string(r.line));
  return *v;
}

std::int64_t integer(const Row& r, std::size_t i, const char* what) {
  const auto v = parse_int(r.fields[i]);
  if (!v) throw Error(std::string(what) + ": bad integer on line " + std::to_string(r.line));
  return *v;
}

constexpr std::string_view kCommutersHeader =
    "user_id,category,home_lon,home_lat,work_lon,work_lat,T_e,T_l,CT_e,CT_l,CD_m,WH_min,n_t,R_rt,"
    "transfer_station_ids,transfer_mode";

constexpr std::string_view kIstfcHeader =
    "user_id,active_weekdays,isfc_id,istfc_id,parent_n,n_prime,o_lon,o_lat,d_lon,d_lat,o_x,o_y,"
    "d_x,d_y,len_m,T_o,T_d";

constexpr std::string_view kClassifiedHeader =
    "user_id,category,home_x,home_y,work_x,work_y,home_station,work_station,t_e,t_l,ct_e,ct_l,cd,"
    "wh,n_t,r_rt";

}  // namespace

std::string format_commuters_csv(std::span<const CommuterRecord> records, const Projection& proj,
                                 std::span<const Station> stations) {
  std::string out(kCommutersHeader);
  out += '\n';
  for (const CommuterRecord& r : records) {
    const CommuteAttributes& a = r.attrs;
    const bool dur = has_duration(r.category);
    out += csv_field(r.user_id) + ',' + std::string(to_string(r.category)) + ',';
    out += r.home ? lonlat(proj.unproject(*r.home)) : std::string(",");
    out += ',';
    out += r.work ? lonlat(proj.unproject(*r.work)) : std::string(",");
    out += ',' + fixed(a.t_e.minutes, 2) + ',' + fixed(a.t_l.minutes, 2);
    out += ',' + opt(dur, fixed(a.ct_e, 2)) + ',' + opt(dur, fixed(a.ct_l, 2));
    out += ',' + opt(dur, fixed(a.cd, 1)) + ',' + opt(has_wh(r.category), fixed(a.wh, 2));
    out += ',' + std::to_string(a.n_t) + ',' + fixed(a.r_rt, 4);
    out += ',' + csv_field(station_ids(r, stations)) + ',' + station_modes(r, stations) + '\n';
  }
  return out;
}

std::string format_commuters_geojson(std::span<const CommuterRecord> records,
                                     const Projection& proj, std::span<const Station> stations) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  bool first = true;
  for (const CommuterRecord& r : records) {
    if (!r.home && !r.work) continue;
    out += first ? "\n" : ",\n";
    first = false;
    out += "{\"type\":\"Feature\",\"geometry\":";
    if (r.home && r.work) {
      out += "{\"type\":\"LineString\",\"coordinates\":[" + coord(proj.unproject(*r.home)) + "," +
             coord(proj.unproject(*r.work)) + "]}";
    } else {
      out += "{\"type\":\"Point\",\"coordinates\":" +
             coord(proj.unproject(r.home ? *r.home : *r.work)) + "}";
    }
    out += ",\"properties\":{\"user_id\":" + json_string(r.user_id) +
           ",\"category\":" + json_string(to_string(r.category)) +
           ",\"end\":" + json_string(r.home && r.work ? "home-work" : r.home ? "home" : "work") +
           ",\"transfer_station_ids\":" + json_string(station_ids(r, stations)) + "}}";
  }
  out += "\n]}\n";
  return out;
}

std::string format_shares_csv(const SummaryTables& s) {
  std::size_t total = 0;
  for (const auto& [c, n] : s.counts) total += n;
  std::string out = "category,count,share\n";
  for (const CommuterCategory c : kAllCategories) {
    const auto it = s.counts.find(c);
    const std::size_t n = it == s.counts.end() ? 0 : it->second;
    const double share = total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total);
    out += std::string(to_string(c)) + ',' + std::to_string(n) + ',' + fixed(share, 6) + '\n';
  }
  return out;
}

std::string format_histograms_csv(const SummaryTables& s,
                                  std::span<const std::string_view> metrics) {
  std::string out = "metric,category,bin_lo,bin_hi,count,fraction\n";
  for (const std::string_view m : metrics) {
    const auto it = s.histograms.find(std::string(m));
    if (it == s.histograms.end()) continue;
    for (const CommuterCategory c : kAllCategories) {
      const auto h = it->second.find(c);
      if (h == it->second.end()) continue;
      const double w = h->second.width();
      for (const auto& [bin, n] : h->second.counts()) {
        out += std::string(m) + ',' + std::string(to_string(c)) + ',' +
               fixed(static_cast<double>(bin) * w, 2) + ',' +
               fixed(static_cast<double>(bin + 1) * w, 2) + ',' + std::to_string(n) + ',' +
               fixed(h->second.fraction(bin), 6) + '\n';
      }
    }
  }
  return out;
}

std::string format_validation_csv(const ValidationCurve& curve) {
  std::string out = "threshold_m,cumulative_fraction,users\n";
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    out += fixed(curve.thresholds[i], 1) + ',' + fixed(curve.cumulative_pct[i], 6) + ',' +
           std::to_string(curve.users) + '\n';
  }
  return out;
}

std::string format_station_usage_csv(const std::map<std::size_t, StationCounts>& usage,
                                     std::span<const Station> stations) {
  std::vector<std::size_t> order;
  for (const auto& [idx, counts] : usage) order.push_back(idx);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return stations[a].id < stations[b].id; });
  std::string out = "station_id,mode,lon,lat,bike_to_transit,transit_to_bike\n";
  for (const std::size_t idx : order) {
    const Station& st = stations[idx];
    const StationCounts& c = usage.at(idx);
    out += csv_field(st.id) + ',' + std::string(to_string(st.mode)) + ',' + lonlat(st.location) +
           ',' + std::to_string(c.bike_to_transit) + ',' + std::to_string(c.transit_to_bike) + '\n';
  }
  return out;
}

std::string format_commute_flows_geojson(std::span<const CommuteFlowCluster> clusters,
                                         const Projection& proj) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const CommuteFlowCluster& c = clusters[i];
    out += i == 0 ? "\n" : ",\n";
    out += "{\"type\":\"Feature\",\"geometry\":{\"type\":\"LineString\",\"coordinates\":[" +
           coord(proj.unproject(c.medoid_home)) + "," + coord(proj.unproject(c.medoid_work)) +
           "]},\"properties\":{\"cluster_id\":" + std::to_string(i) +
           ",\"category\":" + json_string(to_string(c.category)) +
           ",\"n\":" + std::to_string(c.n()) + ",\"len_m\":" + fixed(c.len, 1) + "}}";
  }
  out += "\n]}\n";
  return out;
}

std::vector<Artifact> render_artifacts(const AnalysisResults& results) {
  const auto& st = results.stations;
  std::vector<Artifact> out;
  out.emplace_back("commuters.csv", format_commuters_csv(results.commuters, results.projection, st));
  out.emplace_back("commuters.geojson",
                   format_commuters_geojson(results.commuters, results.projection, st));
  out.emplace_back("summary_shares.csv", format_shares_csv(results.summary));

  const std::pair<const char*, std::vector<std::string_view>> hists[] = {
      {"hist_departure.csv", {"t_e", "t_l"}},
      {"hist_ct.csv", {"ct_e", "ct_l"}},
      {"hist_cd.csv", {"cd"}},
      {"hist_wh.csv", {"wh"}},
      {"hist_rrt.csv", {"r_rt"}},
  };
  for (const auto& [name, metrics] : hists) {
    out.emplace_back(name, format_histograms_csv(results.summary, metrics));
  }
  out.emplace_back("station_usage.csv", format_station_usage_csv(results.station_usage, st));
  out.emplace_back("commute_flows.geojson",
                   format_commute_flows_geojson(results.flow_clusters, results.projection));
  if (results.validation) {
    out.emplace_back("validation_curve.csv", format_validation_csv(*results.validation));
  }
  return out;
}

void export_artifacts(const AnalysisResults& results, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir.string() + ": " + ec.message());
  for (const auto& [name, contents] : render_artifacts(results)) write_file(out_dir / name, contents);
}

// ---------------------------------------------------------------------------

std::string format_isfc_csv(std::span<const UserLayer1> users, const Projection& proj) {
  std::string out = "user_id,isfc_id,n,reliable,o_lon,o_lat,d_lon,d_lat,len_m\n";
  for (const UserLayer1& u : users) {
    for (const ISFC& c : u.clusters.isfcs) {
      const bool reliable =
          std::any_of(u.clusters.reliable_isfcs.begin(), u.clusters.reliable_isfcs.end(),
                      [&](const ISFC& r) { return r.isfc_id == c.isfc_id; });
      out += csv_field(u.user_id) + ',' + std::to_string(c.isfc_id) + ',' + std::to_string(c.n()) +
             ',' + (reliable ? "1" : "0") + ',' + lonlat(proj.unproject(c.medoid_o)) + ',' +
             lonlat(proj.unproject(c.medoid_d)) + ',' + fixed(c.len, 1) + '\n';
    }
  }
  return out;
}

std::string format_istfc_csv(std::span<const UserLayer1> users, const Projection& proj) {
  std::string out(kIstfcHeader);
  out += '\n';
  for (const UserLayer1& u : users) {
    for (const ISTFC& c : u.clusters.istfcs) {
      out += csv_field(u.user_id) + ',' + std::to_string(u.active_weekdays) + ',' +
             std::to_string(c.isfc_id) + ',' + std::to_string(c.istfc_id) + ',' +
             std::to_string(c.parent_n) + ',' + std::to_string(c.n_prime()) + ',' +
             lonlat(proj.unproject(c.medoid_o)) + ',' + lonlat(proj.unproject(c.medoid_d)) + ',' +
             exact(c.medoid_o.x) + ',' + exact(c.medoid_o.y) + ',' + exact(c.medoid_d.x) + ',' +
             exact(c.medoid_d.y) + ',' + exact(c.len) + ',' + exact(c.t_o.minutes) + ',' +
             exact(c.t_d.minutes) + '\n';
    }
  }
  return out;
}

std::vector<UserIstfcs> parse_istfc_csv(std::string_view text) {
  constexpr const char* what = "istfc.csv";
  std::vector<UserIstfcs> users;
  for (const Row& r : read_rows(text, kIstfcHeader, what)) {
    if (users.empty() || users.back().user_id != r.fields[0]) {
      users.push_back({r.fields[0], static_cast<int>(integer(r, 1, what)), {}});
    }
    ISTFC c;
    c.isfc_id = static_cast<int>(integer(r, 2, what));
    c.istfc_id = static_cast<int>(integer(r, 3, what));
    c.parent_n = static_cast<std::size_t>(integer(r, 4, what));
    const auto n_prime = integer(r, 5, what);
    if (n_prime <= 0) throw Error("istfc.csv: non-positive n' on line " + std::to_string(r.line));
    c.members.resize(static_cast<std::size_t>(n_prime));
    for (std::size_t k = 0; k < c.members.size(); ++k) c.members[k] = static_cast<std::uint32_t>(k);
    c.medoid_o = {num(r, 10, what), num(r, 11, what)};
    c.medoid_d = {num(r, 12, what), num(r, 13, what)};
    c.len = num(r, 14, what);
    c.t_o = {num(r, 15, what)};
    c.t_d = {num(r, 16, what)};
    users.back().istfcs.push_back(std::move(c));
  }
  return users;
}

std::string format_classified_csv(std::span<const CommuterRecord> records,
                                  std::span<const Station> stations) {
  std::string out(kClassifiedHeader);
  out += '\n';
  auto point = [](const std::optional<PlanarPoint>& p) {
    return p ? exact(p->x) + ',' + exact(p->y) : std::string(",");
  };
  auto station = [&](const std::optional<std::size_t>& s) {
    return s ? csv_field(stations[*s].id) : std::string();
  };
  for (const CommuterRecord& r : records) {
    const CommuteAttributes& a = r.attrs;
    out += csv_field(r.user_id) + ',' + std::string(to_string(r.category)) + ',' + point(r.home) +
           ',' + point(r.work) + ',' + station(r.home_station) + ',' + station(r.work_station) +
           ',' + exact(a.t_e.minutes) + ',' + exact(a.t_l.minutes) + ',' + exact(a.ct_e) + ',' +
           exact(a.ct_l) + ',' + exact(a.cd) + ',' + exact(a.wh) + ',' + std::to_string(a.n_t) +
           ',' + exact(a.r_rt) + '\n';
  }
  return out;
}

std::vector<CommuterRecord> parse_classified_csv(std::string_view text,
                                                 std::span<const Station> stations) {
  constexpr const char* what = "classified.csv";
  std::map<std::string, std::size_t, std::less<>> by_id;
  for (std::size_t i = 0; i < stations.size(); ++i) by_id.emplace(stations[i].id, i);

  std::vector<CommuterRecord> out;
  for (const Row& r : read_rows(text, kClassifiedHeader, what)) {
    CommuterRecord rec;
    rec.user_id = r.fields[0];
    const auto cat = parse_category(r.fields[1]);
    if (!cat) throw Error("classified.csv: unknown category on line " + std::to_string(r.line));
    rec.category = *cat;
    if (!r.fields[2].empty()) rec.home = PlanarPoint{num(r, 2, what), num(r, 3, what)};
    if (!r.fields[4].empty()) rec.work = PlanarPoint{num(r, 4, what), num(r, 5, what)};
    auto station = [&](std::size_t col) -> std::optional<std::size_t> {
      if (r.fields[col].empty()) return std::nullopt;
      const auto it = by_id.find(r.fields[col]);
      if (it == by_id.end()) {
        throw Error("classified.csv: unknown station '" + r.fields[col] + "' on line " +
                    std::to_string(r.line));
      }
      return it->second;
    };
    rec.home_station = station(6);
    rec.work_station = station(7);
    CommuteAttributes& a = rec.attrs;
    a.t_e = {num(r, 8, what)};
    a.t_l = {num(r, 9, what)};
    a.ct_e = num(r, 10, what);
    a.ct_l = num(r, 11, what);
    a.cd = num(r, 12, what);
    a.wh = num(r, 13, what);
    a.n_t = static_cast<std::size_t>(integer(r, 14, what));
    a.r_rt = num(r, 15, what);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace commute
