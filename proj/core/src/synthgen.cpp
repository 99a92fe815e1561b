#include "commute/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <system_error>

#include <json.hpp>

#include "commute/csv.hpp"
#include "commute/error.hpp"
#include "commute/flow_cluster.hpp"
#include "commute/parallel.hpp"

namespace commute {

namespace {

constexpr double kMinStationSeparation = 250.0;
constexpr double kParcelMargin = 5.0;

double round6(double v) { return std::round(v * 1e6) / 1e6; }

GeoPoint quantize(GeoPoint g) { return {round6(g.lon), round6(g.lat)}; }

std::uint64_t substream(std::uint64_t seed, std::string_view tag) {
  return fnv1a64(hex64(seed) + ":" + std::string(tag));
}

// mt19937_64 output is fixed by the standard; the transforms below are
// written out so results do not depend on the library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }
  bool chance(double p) { return uniform() < p; }
  double normal(double mean, double sd) {
    if (sd == 0.0) return mean;
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  PlanarPoint polar(PlanarPoint c, double r) {
    const double a = uniform(0.0, 2.0 * std::numbers::pi);
    return {c.x + r * std::cos(a), c.y + r * std::sin(a)};
  }

 private:
  std::mt19937_64 eng_;
};

struct Frame {
  Projection proj;
  double half = 0.0;

  GeoPoint geo(PlanarPoint p) const { return quantize(proj.unproject(p)); }
  // Planar position of the quantized point.
  PlanarPoint snap(PlanarPoint p) const { return proj.project(geo(p)); }
  bool inside(PlanarPoint p, double margin = 0.0) const {
    return std::abs(p.x) <= half - margin && std::abs(p.y) <= half - margin;
  }
};

struct Rect {
  double x0, y0, x1, y1;
};

class CityBuilder {
 public:
  CityBuilder(const SynthConfig& cfg, SynthCity& city) : cfg_(cfg), city_(city) {
    frame_.proj = Projection(cfg.center);
    frame_.half = cfg.city_size_m / 2.0;
    city_.projection = frame_.proj;
  }

  void place_stations(Rng& rng, int n, TransitMode mode, char prefix, double jitter) {
    if (n <= 0) return;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    const double sx = cfg_.city_size_m / cols;
    const double sy = cfg_.city_size_m / rows;
    for (int k = 0; k < n; ++k) {
      const int c = k % cols;
      const int r = k / cols;
      const PlanarPoint base{-frame_.half + (c + 0.5) * sx, -frame_.half + (r + 0.5) * sy};
      bool placed = false;
      for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
        const PlanarPoint p = frame_.snap(
            {base.x + rng.uniform(-jitter, jitter) * sx, base.y + rng.uniform(-jitter, jitter) * sy});
        if (nearest_station(p) < kMinStationSeparation) continue;
        Station s;
        char id[16];
        std::snprintf(id, sizeof id, "%c%03d", prefix, k + 1);
        s.id = id;
        s.location = frame_.geo(p);
        s.xy = p;
        s.mode = mode;
        s.routes = {mode == TransitMode::metro ? "L" + std::to_string(1 + r % 6)
                                               : "R" + std::to_string(1 + (c + r) % 15)};
        city_.stations.push_back(std::move(s));
        placed = true;
      }
      if (!placed) throw Error("synth: cannot place stations 250 m apart; enlarge the city");
    }
  }

  void place_parcels(Rng& rng) {
    for (int k = 0; k < cfg_.n_parcels; ++k) {
      const double w = rng.uniform(150.0, 400.0);
      const double h = rng.uniform(150.0, 400.0);
      const PlanarPoint c{rng.uniform(-frame_.half + 250.0, frame_.half - 250.0),
                          rng.uniform(-frame_.half + 250.0, frame_.half - 250.0)};
      const PlanarPoint corners[] = {{c.x - w / 2, c.y - h / 2},
                                     {c.x + w / 2, c.y - h / 2},
                                     {c.x + w / 2, c.y + h / 2},
                                     {c.x - w / 2, c.y + h / 2}};
      ResidentialParcel parcel;
      char id[16];
      std::snprintf(id, sizeof id, "P%04d", k + 1);
      parcel.id = id;
      Polygon lonlat;
      for (const PlanarPoint q : corners) {
        const GeoPoint g = frame_.geo(q);
        lonlat.vertices.push_back({g.lon, g.lat});
        parcel.boundary.vertices.push_back(frame_.proj.project(g));
      }
      rects_.push_back({c.x - w / 2, c.y - h / 2, c.x + w / 2, c.y + h / 2});
      city_.parcels.push_back(std::move(parcel));
      city_.parcel_lonlat.push_back(std::move(lonlat));
    }
  }

  void place_job_centers(Rng& rng) {
    for (int k = 0; k < cfg_.n_job_centers; ++k) {
      city_.job_centers.push_back({rng.uniform(-0.35, 0.35) * cfg_.city_size_m,
                                   rng.uniform(-0.35, 0.35) * cfg_.city_size_m});
    }
  }

  double nearest_station(PlanarPoint p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Station& s : city_.stations) best = std::min(best, dist(p, s.xy));
    return best;
  }

  double nearest_of_mode(PlanarPoint p, TransitMode m) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Station& s : city_.stations) {
      if (s.mode == m) best = std::min(best, dist(p, s.xy));
    }
    return best;
  }

  std::vector<std::size_t> stations_of(TransitMode m) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < city_.stations.size(); ++i) {
      if (city_.stations[i].mode == m) out.push_back(i);
    }
    return out;
  }

  PlanarPoint in_parcel(Rng& rng) const {
    const Rect& r = rects_[rng.index(rects_.size())];
    return frame_.snap({rng.uniform(r.x0 + kParcelMargin, r.x1 - kParcelMargin),
                        rng.uniform(r.y0 + kParcelMargin, r.y1 - kParcelMargin)});
  }

  bool clear(PlanarPoint p) const { return nearest_station(p) >= cfg_.station_clearance_m; }

  // A bike-side end served by station `s`: far enough that the other end's
  // nearest station of the same mode stays beyond half the ride.
  bool served_by(PlanarPoint p, const Station& s) const {
    const double d = dist(p, s.xy);
    return d >= 500.0 && d <= 2500.0 && clear(p) && nearest_of_mode(p, s.mode) >= 0.6 * d;
  }

  PlanarPoint home_anywhere(Rng& rng) const {
    for (int attempt = 0; attempt < 5000; ++attempt) {
      const PlanarPoint p = in_parcel(rng);
      if (clear(p)) return p;
    }
    throw Error("synth: no parcel point clears the stations");
  }

  std::optional<PlanarPoint> home_near(Rng& rng, const Station& s) const {
    for (int attempt = 0; attempt < 4000; ++attempt) {
      const PlanarPoint p = in_parcel(rng);
      if (served_by(p, s)) return p;
    }
    return std::nullopt;
  }

  std::optional<PlanarPoint> work_near(Rng& rng, const Station& s) const {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      const PlanarPoint p = frame_.snap(rng.polar(s.xy, rng.uniform(500.0, 2500.0)));
      if (frame_.inside(p, 50.0) && served_by(p, s)) return p;
    }
    return std::nullopt;
  }

  std::optional<PlanarPoint> work_from(Rng& rng, PlanarPoint home) const {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      const PlanarPoint c = city_.job_centers[rng.index(city_.job_centers.size())];
      const PlanarPoint p = frame_.snap({rng.normal(c.x, 700.0), rng.normal(c.y, 700.0)});
      const double d = dist(home, p);
      if (frame_.inside(p, 50.0) && d >= 800.0 && d <= 5000.0 && clear(p)) return p;
    }
    return std::nullopt;
  }

  PlanarPoint dock(Rng& rng, const Station& s) const {
    const DecisionParams dp;
    const double td = s.mode == TransitMode::metro ? dp.td_metro : dp.td_bus;
    return frame_.snap(rng.polar(s.xy, rng.uniform(0.0, td / 4.0)));
  }

  std::vector<GeoPoint> favourites(Rng& rng, PlanarPoint home, PlanarPoint work) const {
    std::vector<GeoPoint> out;
    for (int attempt = 0; attempt < 5000 && out.size() < 2; ++attempt) {
      const PlanarPoint p = frame_.snap(rng.polar(home, rng.uniform(800.0, 2500.0)));
      if (frame_.inside(p, 50.0) && dist(p, work) >= 800.0) out.push_back(frame_.geo(p));
    }
    if (out.size() < 2) throw Error("synth: cannot place errand destinations");
    return out;
  }

  TruthUser make_user(const std::string& id, std::optional<CommuterCategory> cat) const {
    Rng rng(substream(cfg_.seed, id));
    TruthUser u;
    u.user_id = id;
    u.category = cat;
    u.speed_kmh = rng.uniform(10.0, 15.0);
    u.depart_morning = std::clamp(rng.normal(cfg_.to_work_mean, cfg_.departure_spread_sd), 420.0, 570.0);
    u.depart_evening = std::clamp(rng.normal(cfg_.back_home_mean, cfg_.departure_spread_sd), 1020.0, 1200.0);
    u.access_min = rng.uniform(10.0, 30.0);
    auto ride = [&](PlanarPoint a, PlanarPoint b) { return dist(a, b) / 1000.0 / u.speed_kmh * 60.0; };

    if (!cat) {
      const PlanarPoint home = home_anywhere(rng);
      u.home = frame_.geo(home);
      u.work = u.home;
      return u;
    }

    const bool metro_only = stations_of(TransitMode::bus).empty();
    const bool bus_only = stations_of(TransitMode::metro).empty();
    u.mode = bus_only || (!metro_only && rng.chance(cfg_.bus_transfer_share)) ? TransitMode::bus
                                                                               : TransitMode::metro;
    const std::vector<std::size_t> pool = stations_of(u.mode);

    for (int round = 0; round < 200; ++round) {
      PlanarPoint home, work;
      switch (*cat) {
        case CommuterCategory::OnlyBiking: {
          home = home_anywhere(rng);
          const auto w = work_from(rng, home);
          if (!w) continue;
          work = *w;
          u.wh = u.depart_evening - (u.depart_morning + ride(home, work));
          break;
        }
        case CommuterCategory::BikingTransit: {
          const Station& s = city_.stations[pool[rng.index(pool.size())]];
          const auto h = home_near(rng, s);
          if (!h) continue;
          home = *h;
          work = home_anywhere(rng);
          const PlanarPoint d = dock(rng, s);
          u.home_station = s.id;
          u.home_dock = frame_.geo(d);
          u.wh = u.depart_evening - (u.depart_morning + ride(home, d) + u.access_min);
          break;
        }
        case CommuterCategory::TransitBiking: {
          const Station& s = city_.stations[pool[rng.index(pool.size())]];
          const auto w = work_near(rng, s);
          if (!w) continue;
          work = *w;
          home = home_anywhere(rng);
          const PlanarPoint d = dock(rng, s);
          u.work_station = s.id;
          u.work_dock = frame_.geo(d);
          u.wh = u.depart_evening - (u.depart_morning + u.access_min + ride(d, work));
          break;
        }
        case CommuterCategory::BikingTransitBiking: {
          const Station& s1 = city_.stations[pool[rng.index(pool.size())]];
          std::vector<std::size_t> far;
          for (const std::size_t k : pool) {
            if (dist(city_.stations[k].xy, s1.xy) >= 2000.0) far.push_back(k);
          }
          if (far.empty()) continue;
          const Station& s2 = city_.stations[far[rng.index(far.size())]];
          const auto h = home_near(rng, s1);
          const auto w = h ? work_near(rng, s2) : std::nullopt;
          if (!w) continue;
          home = *h;
          work = *w;
          const PlanarPoint d1 = dock(rng, s1);
          const PlanarPoint d2 = dock(rng, s2);
          u.home_station = s1.id;
          u.work_station = s2.id;
          u.home_dock = frame_.geo(d1);
          u.work_dock = frame_.geo(d2);
          u.transit_min = dist(s1.xy, s2.xy) / 1000.0 / 30.0 * 60.0 + 5.0;
          u.wh = u.depart_evening -
                 (u.depart_morning + ride(home, d1) + u.transit_min + ride(d2, work));
          break;
        }
      }
      u.home = frame_.geo(home);
      u.work = frame_.geo(work);
      u.favourites = favourites(rng, home, work);
      return u;
    }
    throw Error("synth: cannot place user " + id + "; too few stations or parcels");
  }

  const Frame& frame() const { return frame_; }

 private:
  const SynthConfig& cfg_;
  SynthCity& city_;
  Frame frame_;
  std::vector<Rect> rects_;
};

std::string user_id_for(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U%05d", index + 1);
  return buf;
}

// ---------------------------------------------------------------------------
// Trips

struct Leg {
  TripRecord trip;
  LegRole role;
};

class TripWriter {
 public:
  TripWriter(const TruthUser& u, const SynthConfig& cfg, const Frame& frame, Rng& rng,
             std::vector<Leg>& out)
      : u_(u), cfg_(cfg), frame_(frame), rng_(rng), out_(out) {}

  // Emits one ride departing at `depart` (minutes of day) and returns its
  // arrival time, or -1 when the ride would cross midnight.
  double ride(Date day, GeoPoint o, GeoPoint d, double depart, LegRole role) {
    PlanarPoint po = frame_.proj.project(o);
    PlanarPoint pd = frame_.proj.project(d);
    if (cfg_.spatial_jitter_sd > 0.0 && role != LegRole::noise) {
      po = frame_.snap({rng_.normal(po.x, cfg_.spatial_jitter_sd), rng_.normal(po.y, cfg_.spatial_jitter_sd)});
      pd = frame_.snap({rng_.normal(pd.x, cfg_.spatial_jitter_sd), rng_.normal(pd.y, cfg_.spatial_jitter_sd)});
    }
    const double minutes = dist(po, pd) / 1000.0 / u_.speed_kmh * 60.0;
    const auto start = static_cast<std::int64_t>(std::llround(depart * 60.0));
    const auto secs = std::max<std::int64_t>(60, std::llround(minutes * 60.0));
    if (start < 0 || start + secs >= 86400) return -1.0;
    const std::int64_t base = day.time_since_epoch().count() * std::int64_t{86400};
    TripRecord t{u_.user_id, base + start, base + start + secs, frame_.geo(po), frame_.geo(pd)};
    out_.push_back({std::move(t), role});
    return depart + static_cast<double>(secs) / 60.0;
  }

  double jittered(double t) { return rng_.normal(t, cfg_.temporal_jitter_sd); }

  // A commuting leg that may be skipped. Returns the nominal arrival either way.
  double leg(Date day, GeoPoint o, GeoPoint d, double depart, LegRole role) {
    const double nominal =
        depart + dist(frame_.proj.project(o), frame_.proj.project(d)) / 1000.0 / u_.speed_kmh * 60.0;
    const bool skip = rng_.chance(cfg_.skip_prob_per_leg);
    const double t = jittered(depart);
    if (!skip) ride(day, o, d, t, role);
    return nominal;
  }

 private:
  const TruthUser& u_;
  const SynthConfig& cfg_;
  const Frame& frame_;
  Rng& rng_;
  std::vector<Leg>& out_;
};

std::vector<Date> active_days(const GroundTruth& gt, const SynthConfig& cfg,
                              Rng& rng) {
  std::vector<Date> days(gt.calendar.study_weekdays.begin(), gt.calendar.study_weekdays.end());
  std::vector<bool> on(days.size());
  int count = 0;
  for (std::size_t i = 0; i < days.size(); ++i) {
    on[i] = rng.chance(gt.calendar.rainy_days.contains(days[i]) ? cfg.active_prob_rainy
                                                                : cfg.active_prob_dry);
    count += on[i] ? 1 : 0;
  }
  const int threshold = active_user_threshold(gt.calendar);
  while (count <= threshold && count < static_cast<int>(days.size())) {
    const std::size_t i = rng.index(days.size());
    if (!on[i]) {
      on[i] = true;
      ++count;
    }
  }
  std::vector<Date> out;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (on[i]) out.push_back(days[i]);
  }
  return out;
}

int legs_per_day(CommuterCategory c) { return c == CommuterCategory::BikingTransitBiking ? 4 : 2; }

std::vector<Leg> commuter_trips(const TruthUser& u, const GroundTruth& gt, const SynthConfig& cfg,
                                const Frame& frame) {
  Rng rng(substream(cfg.seed, u.user_id + "/trips"));
  std::vector<Leg> legs;
  TripWriter w(u, cfg, frame, rng, legs);
  const CommuterCategory cat = *u.category;
  const double expected = legs_per_day(cat) * (1.0 - cfg.skip_prob_per_leg);
  const double p_errand = std::clamp((cfg.mean_trips_per_active_day - expected) / 2.0, 0.0, 1.0);

  for (const Date day : active_days(gt, cfg, rng)) {
    double home_at = 0.0;  // evening arrival at home
    switch (cat) {
      case CommuterCategory::OnlyBiking:
        w.leg(day, u.home, u.work, u.depart_morning, LegRole::to_work);
        home_at = w.leg(day, u.work, u.home, u.depart_evening, LegRole::back_home);
        break;
      case CommuterCategory::BikingTransit:
        w.leg(day, u.home, u.home_dock, u.depart_morning, LegRole::to_station);
        home_at = w.leg(day, u.home_dock, u.home, u.depart_evening + u.access_min,
                        LegRole::from_station);
        break;
      case CommuterCategory::TransitBiking:
        w.leg(day, u.work_dock, u.work, u.depart_morning + u.access_min, LegRole::from_station);
        w.leg(day, u.work, u.work_dock, u.depart_evening, LegRole::to_station);
        home_at = u.depart_evening + 2.0 * u.access_min;
        break;
      case CommuterCategory::BikingTransitBiking: {
        const double at_s1 = w.leg(day, u.home, u.home_dock, u.depart_morning, LegRole::to_station);
        w.leg(day, u.work_dock, u.work, at_s1 + u.transit_min, LegRole::from_station);
        const double at_s2 = w.leg(day, u.work, u.work_dock, u.depart_evening, LegRole::to_station);
        home_at = w.leg(day, u.home_dock, u.home, at_s2 + u.transit_min, LegRole::from_station);
        break;
      }
    }
    if (!rng.chance(p_errand)) continue;
    const GeoPoint fav = u.favourites[rng.index(u.favourites.size())];
    const double start = std::max(rng.uniform(1170.0, 1290.0), home_at + 15.0);
    if (start > 1320.0) continue;
    const double arrive = w.ride(day, u.home, fav, start, LegRole::errand);
    if (arrive < 0.0) continue;
    w.ride(day, fav, u.home, arrive + rng.uniform(40.0, 120.0), LegRole::errand);
  }
  return legs;
}

bool has_commute_structure(std::span<const Leg> legs, const Projection& proj, int active) {
  std::vector<TripRecord> trips;
  trips.reserve(legs.size());
  for (const Leg& l : legs) trips.push_back(l.trip);
  std::sort(trips.begin(), trips.end(), canonical_less);
  const std::vector<Flow> flows = to_flows(trips, proj);
  const ClusterParams cp;
  const UserClusters c = run_layer1(flows, active, cp);
  return !identify_iccfs(c.istfcs, cp, DecisionParams{}).empty();
}

std::vector<Leg> noise_trips(const TruthUser& u, const GroundTruth& gt, const SynthConfig& cfg,
                             const Frame& frame) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(substream(cfg.seed, u.user_id + "/noise/" + std::to_string(attempt)));
    std::vector<Leg> legs;
    TripWriter w(u, cfg, frame, rng, legs);
    const std::vector<Date> days = active_days(gt, cfg, rng);
    for (const Date day : days) {
      const std::size_t k = 1 + rng.index(3);
      for (std::size_t i = 0; i < k; ++i) {
        PlanarPoint o, d;
        do {
          o = {rng.uniform(-frame.half, frame.half), rng.uniform(-frame.half, frame.half)};
          d = rng.polar(o, rng.uniform(500.0, 6000.0));
        } while (!frame.inside(d));
        w.ride(day, frame.geo(o), frame.geo(d), rng.uniform(360.0, 1380.0), LegRole::noise);
      }
    }
    if (!has_commute_structure(legs, frame.proj, static_cast<int>(days.size()))) return legs;
  }
  throw Error("synth: noise user " + u.user_id + " keeps forming a commute pattern");
}

std::string station_feature(const Station& s) {
  nlohmann::json routes = s.routes;
  return "{\"type\":\"Feature\",\"properties\":{\"id\":" + nlohmann::json(s.id).dump() +
         ",\"mode\":\"" + std::string(to_string(s.mode)) + "\",\"routes\":" + routes.dump() +
         "},\"geometry\":{\"type\":\"Point\",\"coordinates\":[" + fixed(s.location.lon, 6) + "," +
         fixed(s.location.lat, 6) + "]}}";
}

std::string parcel_feature(const std::string& id, const Polygon& lonlat) {
  std::string ring;
  for (std::size_t i = 0; i <= lonlat.vertices.size(); ++i) {
    const PlanarPoint v = lonlat.vertices[i % lonlat.vertices.size()];
    if (i > 0) ring += ',';
    ring += "[" + fixed(v.x, 6) + "," + fixed(v.y, 6) + "]";
  }
  return "{\"type\":\"Feature\",\"properties\":{\"id\":" + nlohmann::json(id).dump() +
         "},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[" + ring + "]]}}";
}

template <typename F>
std::string collection(std::size_t n, F&& feature) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < n; ++i) {
    out += i == 0 ? "\n" : ",\n";
    out += feature(i);
  }
  out += "\n]}\n";
  return out;
}

}  // namespace

std::string_view to_string(LegRole r) {
  switch (r) {
    case LegRole::to_work: return "to_work";
    case LegRole::back_home: return "back_home";
    case LegRole::to_station: return "to_station";
    case LegRole::from_station: return "from_station";
    case LegRole::errand: return "errand";
    case LegRole::noise: return "noise";
  }
  return "noise";
}

void SynthConfig::validate() const {
  const int counts[] = {n_only_biking, n_biking_transit,  n_transit_biking, n_biking_transit_biking,
                        n_noise,       n_metro_stations,  n_bus_stations,   n_parcels,
                        n_job_centers, study_weekdays,    rainy_days};
  for (const int c : counts) {
    if (c < 0) throw Error("synth counts must be >= 0");
  }
  const double probs[] = {skip_prob_per_leg, active_prob_dry, active_prob_rainy, bus_transfer_share};
  for (const double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("synth probabilities must lie in [0, 1]");
  }
  if (!(spatial_jitter_sd >= 0.0) || !(temporal_jitter_sd >= 0.0)) {
    throw Error("synth jitters must be >= 0");
  }
  if (!(mean_trips_per_active_day >= 0.0)) throw Error("mean_trips_per_active_day must be >= 0");
  if (!(city_size_m >= 2000.0 && city_size_m <= 150'000.0)) {
    throw Error("city_size_m must lie in [2000, 150000]");
  }
  if (!parse_date(start_date)) throw Error("synth start_date must be YYYY-MM-DD");
  if (rainy_days > study_weekdays) throw Error("more rainy days than study weekdays");
  if (study_weekdays == 0 && n_commuters() + n_noise > 0) throw Error("users need study weekdays");
  if (n_parcels == 0 && n_commuters() + n_noise > 0) throw Error("users need parcels to live in");
  if (n_only_biking > 0 && n_job_centers == 0) throw Error("OnlyBiking users need job centers");
  const int transfer = n_biking_transit + n_transit_biking + n_biking_transit_biking;
  if (transfer > 0 && n_metro_stations + n_bus_stations == 0) {
    throw Error("transfer users need at least one station");
  }
  if (n_biking_transit_biking > 0 && n_metro_stations < 2 && n_bus_stations < 2) {
    throw Error("BikingTransitBiking users need two stations of one mode");
  }
}

SynthCity generate_city(const SynthConfig& cfg) {
  cfg.validate();
  SynthCity city;
  CityBuilder b(cfg, city);
  Rng rng(substream(cfg.seed, "city"));
  b.place_stations(rng, cfg.n_metro_stations, TransitMode::metro, 'M', 0.3);
  b.place_stations(rng, cfg.n_bus_stations, TransitMode::bus, 'B', 0.45);
  b.place_parcels(rng);
  b.place_job_centers(rng);

  Date day = *parse_date(cfg.start_date);
  std::vector<Date> weekdays;
  while (static_cast<int>(weekdays.size()) < cfg.study_weekdays) {
    if (is_weekday(day)) weekdays.push_back(day);
    day += std::chrono::days{1};
  }
  std::vector<std::size_t> order(weekdays.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<Date> rainy;
  for (int k = 0; k < cfg.rainy_days; ++k) rainy.push_back(weekdays[order[static_cast<std::size_t>(k)]]);
  std::sort(rainy.begin(), rainy.end());
  if (!weekdays.empty()) city.truth.calendar = Calendar::from_range(weekdays.front(), weekdays.back(), rainy);
  city.truth.rainy_days = rainy;

  std::vector<std::optional<CommuterCategory>> cats;
  const std::pair<CommuterCategory, int> plan[] = {
      {CommuterCategory::OnlyBiking, cfg.n_only_biking},
      {CommuterCategory::BikingTransit, cfg.n_biking_transit},
      {CommuterCategory::TransitBiking, cfg.n_transit_biking},
      {CommuterCategory::BikingTransitBiking, cfg.n_biking_transit_biking},
  };
  for (const auto& [c, n] : plan) cats.insert(cats.end(), static_cast<std::size_t>(n), c);
  cats.insert(cats.end(), static_cast<std::size_t>(cfg.n_noise), std::nullopt);
  // Interleave categories so ids carry no label information.
  for (std::size_t i = cats.size(); i > 1; --i) std::swap(cats[i - 1], cats[rng.index(i)]);

  city.truth.users.resize(cats.size());
  for (std::size_t i = 0; i < cats.size(); ++i) {
    city.truth.users[i] = b.make_user(user_id_for(static_cast<int>(i)), cats[i]);
  }
  return city;
}

SynthTrips generate_trips(const SynthCity& city, const SynthConfig& cfg, int workers) {
  Frame frame{city.projection, cfg.city_size_m / 2.0};
  const auto& users = city.truth.users;
  std::vector<std::vector<Leg>> slots(users.size());
  parallel_for(users.size(), workers, [&](std::size_t i) {
    slots[i] = users[i].category ? commuter_trips(users[i], city.truth, cfg, frame)
                                 : noise_trips(users[i], city.truth, cfg, frame);
  });
  std::vector<Leg> all;
  for (auto& s : slots) {
    all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  std::sort(all.begin(), all.end(), [](const Leg& a, const Leg& b) {
    if (a.trip.start != b.trip.start) return a.trip.start < b.trip.start;
    return canonical_less(a.trip, b.trip);
  });
  SynthTrips out;
  out.trips.reserve(all.size());
  out.roles.reserve(all.size());
  for (Leg& l : all) {
    out.trips.push_back(std::move(l.trip));
    out.roles.push_back(l.role);
  }
  return out;
}

std::string format_stations_geojson(std::span<const Station> stations) {
  return collection(stations.size(), [&](std::size_t i) { return station_feature(stations[i]); });
}

std::string format_parcels_geojson(const SynthCity& city) {
  return collection(city.parcels.size(), [&](std::size_t i) {
    return parcel_feature(city.parcels[i].id, city.parcel_lonlat[i]);
  });
}

std::string format_ground_truth_csv(const GroundTruth& gt) {
  std::string out =
      "user_id,category,home_lon,home_lat,work_lon,work_lat,home_station,work_station,wh_min\n";
  for (const TruthUser& u : gt.users) {
    out += csv_field(u.user_id) + ',';
    if (!u.category) {
      out += "Noise,,,,,,,\n";
      continue;
    }
    out += std::string(to_string(*u.category)) + ',' + fixed(u.home.lon, 6) + ',' +
           fixed(u.home.lat, 6) + ',' + fixed(u.work.lon, 6) + ',' + fixed(u.work.lat, 6) + ',' +
           csv_field(u.home_station.value_or("")) + ',' + csv_field(u.work_station.value_or("")) +
           ',' + fixed(u.wh, 2) + '\n';
  }
  return out;
}

std::vector<TruthUser> parse_ground_truth_csv(std::string_view text) {
  LineCursor cur(text);
  std::string_view line;
  if (!cur.next(line) ||
      line != "user_id,category,home_lon,home_lat,work_lon,work_lat,home_station,work_station,wh_min") {
    throw Error("ground_truth.csv: unexpected header");
  }
  std::vector<TruthUser> users;
  while (cur.next(line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    const std::string where = " on line " + std::to_string(cur.line_number());
    if (f.size() != 9) throw Error("ground_truth.csv: wrong field count" + where);
    TruthUser u;
    u.user_id = f[0];
    if (f[1] != "Noise") {
      u.category = parse_category(f[1]);
      if (!u.category) throw Error("ground_truth.csv: unknown category" + where);
      const auto hl = parse_double(f[2]), ha = parse_double(f[3]);
      const auto wl = parse_double(f[4]), wa = parse_double(f[5]);
      const auto wh = parse_double(f[8]);
      if (!hl || !ha || !wl || !wa || !wh) throw Error("ground_truth.csv: bad number" + where);
      u.home = {*hl, *ha};
      u.work = {*wl, *wa};
      u.wh = *wh;
      if (!f[6].empty()) u.home_station = f[6];
      if (!f[7].empty()) u.work_station = f[7];
    }
    users.push_back(std::move(u));
  }
  return users;
}

void write_synth_outputs(const SynthCity& city, const SynthTrips& trips,
                         const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  write_file(out_dir / "trips.csv", format_trips(trips.trips));
  write_file(out_dir / "stations.geojson", format_stations_geojson(city.stations));
  write_file(out_dir / "parcels.geojson", format_parcels_geojson(city));
  std::string rainy = "# rainy study weekdays\n";
  for (const Date d : city.truth.rainy_days) rainy += format_date(d) + '\n';
  write_file(out_dir / "rainy_days.txt", rainy);
  write_file(out_dir / "ground_truth.csv", format_ground_truth_csv(city.truth));

  std::string roles = "user_id,start_time,role\n";
  for (std::size_t i = 0; i < trips.trips.size(); ++i) {
    roles += csv_field(trips.trips[i].user_id) + ',' + format_timestamp(trips.trips[i].start) + ',' +
             std::string(to_string(trips.roles[i])) + '\n';
  }
  write_file(out_dir / "ground_truth_trips.csv", roles);
}

// ---------------------------------------------------------------------------

RecoveryMetrics score_recovery(std::span<const CommuterRecord> predicted,
                               std::span<const Station> stations,
                               std::span<const TruthUser> truth, const Projection& proj,
                               double tol_m) {
  std::map<std::string_view, const TruthUser*> by_id;
  for (const TruthUser& u : truth) by_id.emplace(u.user_id, &u);
  std::map<std::string_view, const CommuterRecord*> pred;
  for (const CommuterRecord& r : predicted) {
    if (!by_id.contains(r.user_id)) {
      throw Error("score_recovery: predicted user '" + r.user_id + "' is not in the ground truth");
    }
    pred.emplace(r.user_id, &r);
  }

  RecoveryMetrics m;
  m.predicted = predicted.size();
  for (const CommuterCategory c : kAllCategories) m.per_category[c];
  std::size_t correct = 0, hits = 0, noise_fp = 0, transfer = 0, station_hits = 0;
  for (const TruthUser& u : truth) {
    const auto it = pred.find(u.user_id);
    const CommuterRecord* p = it == pred.end() ? nullptr : it->second;
    if (p) ++m.per_category[p->category].fp;  // corrected below when it is a true positive
    if (!u.category) {
      ++m.noise_users;
      if (p) ++noise_fp;
      continue;
    }
    ++m.commuters;
    const CommuterCategory c = *u.category;
    if (p && p->category == c) {
      ++correct;
      --m.per_category[c].fp;
      ++m.per_category[c].tp;
    } else {
      ++m.per_category[c].fn;
    }

    const bool needs_home = c != CommuterCategory::TransitBiking;
    const bool needs_work = c != CommuterCategory::BikingTransit;
    bool hit = p != nullptr;
    auto check = [&](const std::optional<PlanarPoint>& got, GeoPoint want) {
      if (!got) {
        hit = false;
        return;
      }
      const double e = dist(*got, proj.project(want));
      m.max_position_error_m = std::max(m.max_position_error_m, e);
      if (e > tol_m) hit = false;
    };
    if (p && needs_home) check(p->home, u.home);
    if (p && needs_work) check(p->work, u.work);
    if (hit) ++hits;

    if (u.home_station || u.work_station) {
      ++transfer;
      auto id = [&](const std::optional<std::size_t>& s) -> std::optional<std::string> {
        if (!s) return std::nullopt;
        return stations[*s].id;
      };
      if (p && id(p->home_station) == u.home_station && id(p->work_station) == u.work_station) {
        ++station_hits;
      }
    }
  }

  auto ratio = [](std::size_t a, std::size_t b, double empty) {
    return b == 0 ? empty : static_cast<double>(a) / static_cast<double>(b);
  };
  for (auto& [c, s] : m.per_category) {
    s.precision = ratio(s.tp, s.tp + s.fp, s.fn == 0 ? 1.0 : 0.0);
    s.recall = ratio(s.tp, s.tp + s.fn, s.fp == 0 ? 1.0 : 0.0);
  }
  m.category_accuracy = ratio(correct, m.commuters, 1.0);
  m.position_hit_rate = ratio(hits, m.commuters, 1.0);
  m.noise_fpr = ratio(noise_fp, m.noise_users, 0.0);
  m.station_match_rate = ratio(station_hits, transfer, 1.0);
  return m;
}

std::string format_metrics_csv(const RecoveryMetrics& m) {
  std::string out = "metric,value\n";
  auto row = [&](const std::string& k, const std::string& v) { out += k + ',' + v + '\n'; };
  row("commuters", std::to_string(m.commuters));
  row("noise_users", std::to_string(m.noise_users));
  row("predicted", std::to_string(m.predicted));
  row("category_accuracy", fixed(m.category_accuracy, 6));
  row("position_hit_rate", fixed(m.position_hit_rate, 6));
  row("max_position_error_m", fixed(m.max_position_error_m, 6));
  row("noise_fpr", fixed(m.noise_fpr, 6));
  row("station_match_rate", fixed(m.station_match_rate, 6));
  for (const auto& [c, s] : m.per_category) {
    row("precision_" + std::string(to_string(c)), fixed(s.precision, 6));
    row("recall_" + std::string(to_string(c)), fixed(s.recall, 6));
  }
  return out;
}

}  // namespace commute
