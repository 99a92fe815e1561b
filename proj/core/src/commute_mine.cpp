#include "commute/commute_mine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "commute/error.hpp"

namespace commute {

void DecisionParams::validate() const {
  if (!(t_wh > 0.0)) throw Error("t_wh must be positive");
  if (!(td_metro > 0.0) || !(td_bus > 0.0)) throw Error("transfer distances must be positive");
  if (!(iadcf_window > 0.0)) throw Error("iadcf_window must be positive");
  if (!(op_start.minutes >= 0.0 && op_end.minutes < kMinutesPerDay && op_start < op_end)) {
    throw Error("operating hours must satisfy 00:00 <= op_start < op_end < 24:00");
  }
}

bool is_earlier_side(const ISTFC& a, const ISTFC& b, const DecisionParams& dp) {
  const double da = circular_distance(a.t_o, dp.morning_anchor);
  const double db = circular_distance(b.t_o, dp.morning_anchor);
  if (da != db) return da < db;
  if (a.t_o != b.t_o) return a.t_o < b.t_o;
  return a.istfc_id <= b.istfc_id;
}

double working_gap(const ISTFC& early, const ISTFC& late) { return forward_gap(early.t_d, late.t_o); }

std::vector<ICCF> identify_iccfs(std::span<const ISTFC> istfcs, const ClusterParams& cp,
                                 const DecisionParams& dp) {
  std::vector<ICCF> out;
  for (std::size_t i = 0; i < istfcs.size(); ++i) {
    for (std::size_t j = i + 1; j < istfcs.size(); ++j) {
      const ISTFC& a = istfcs[i];
      const ISTFC& b = istfcs[j];
      const double r = boundary_radius(a.len, b.len, cp);
      if (!(dist(a.medoid_o, b.medoid_d) < 2.0 * r && dist(b.medoid_o, a.medoid_d) < 2.0 * r)) {
        continue;
      }
      const bool a_first = is_earlier_side(a, b, dp);
      const std::size_t e = a_first ? i : j;
      const std::size_t l = a_first ? j : i;
      if (working_gap(istfcs[e], istfcs[l]) < dp.t_wh) continue;
      out.push_back({static_cast<int>(out.size()), e, l});
    }
  }
  return out;
}

SICCF simplify_iccf(const ISTFC& early, const ISTFC& late, int iccf_id) {
  SICCF s;
  s.iccf_id = iccf_id;
  s.istfc_e = early.istfc_id;
  s.istfc_l = late.istfc_id;
  s.origin = midpoint(early.medoid_o, late.medoid_d);
  s.destination = midpoint(late.medoid_o, early.medoid_d);
  s.t_e = early.t_o;
  s.t_l = late.t_o;
  s.ct_e = forward_gap(early.t_o, early.t_d);
  s.ct_l = forward_gap(late.t_o, late.t_d);
  s.cd = dist(s.origin, s.destination);
  s.wh = working_gap(early, late);
  s.n_t = early.n_prime() + late.n_prime();
  s.r_rt = static_cast<double>(early.n_prime()) / static_cast<double>(s.n_t);
  return s;
}

SICCF simplify_pair(const ISTFC& a, const ISTFC& b, int iccf_id, const DecisionParams& dp) {
  return is_earlier_side(a, b, dp) ? simplify_iccf(a, b, iccf_id) : simplify_iccf(b, a, iccf_id);
}

// ---------------------------------------------------------------------------

StationIndex::StationIndex(std::vector<Station> stations, double cell_m)
    : stations_(std::move(stations)), cell_(cell_m) {
  if (!(cell_ > 0.0)) throw Error("station grid cell must be positive");
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    ModeGrid& g = stations_[i].mode == TransitMode::metro ? metro_ : bus_;
    const auto cx = static_cast<std::int64_t>(std::floor(stations_[i].xy.x / cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(stations_[i].xy.y / cell_));
    if (g.cells.empty()) {
      g.min_cx = g.max_cx = cx;
      g.min_cy = g.max_cy = cy;
    }
    g.min_cx = std::min(g.min_cx, cx);
    g.max_cx = std::max(g.max_cx, cx);
    g.min_cy = std::min(g.min_cy, cy);
    g.max_cy = std::max(g.max_cy, cy);
    g.cells.push_back({cx, cy, i});
  }
  for (ModeGrid* g : {&metro_, &bus_}) {
    std::sort(g->cells.begin(), g->cells.end(), [](const Cell& a, const Cell& b) {
      return std::tie(a.cx, a.cy, a.station) < std::tie(b.cx, b.cy, b.station);
    });
  }
}

std::optional<StationIndex::Hit> StationIndex::nearest(PlanarPoint p, TransitMode mode) const {
  const ModeGrid& g = grid(mode);
  if (g.cells.empty()) return std::nullopt;
  const auto qx = static_cast<std::int64_t>(std::floor(p.x / cell_));
  const auto qy = static_cast<std::int64_t>(std::floor(p.y / cell_));
  const std::int64_t max_ring = std::max({std::abs(qx - g.min_cx), std::abs(qx - g.max_cx),
                                          std::abs(qy - g.min_cy), std::abs(qy - g.max_cy)});
  std::optional<Hit> best;
  const auto visit = [&](std::int64_t cx, std::int64_t cy) {
    auto it = std::lower_bound(g.cells.begin(), g.cells.end(), std::pair{cx, cy},
                               [](const Cell& c, const std::pair<std::int64_t, std::int64_t>& k) {
                                 return std::tie(c.cx, c.cy) < std::tie(k.first, k.second);
                               });
    for (; it != g.cells.end() && it->cx == cx && it->cy == cy; ++it) {
      const double d = dist(p, stations_[it->station].xy);
      if (!best || d < best->distance || (d == best->distance && it->station < best->station)) {
        best = Hit{it->station, d};
      }
    }
  };
  for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
    if (ring == 0) {
      visit(qx, qy);
    } else {
      for (std::int64_t dx = -ring; dx <= ring; ++dx) {
        visit(qx + dx, qy - ring);
        visit(qx + dx, qy + ring);
      }
      for (std::int64_t dy = -ring + 1; dy <= ring - 1; ++dy) {
        visit(qx - ring, qy + dy);
        visit(qx + ring, qy + dy);
      }
    }
    // Anything in a later ring is at least ring * cell away.
    if (best && best->distance < static_cast<double>(ring) * cell_) break;
  }
  return best;
}

TransferTag classify_transfer_mode(const SICCF& s, const StationIndex& index, TransitMode mode,
                                   double td, const DecisionParams& dp) {
  TransferTag tag;
  if (s.t_e < dp.op_start || s.t_e > dp.op_end) return tag;
  const auto so = index.nearest(s.origin, mode);
  const auto sd = index.nearest(s.destination, mode);
  if (!so || !sd) return tag;
  tag.d_o = so->distance;
  tag.d_d = sd->distance;
  if (tag.d_o > td && tag.d_d > td) return tag;
  if (tag.d_o <= td && tag.d_o < tag.d_d) {
    // A station right next to the destination would have been the shorter
    // ride; the origin is then an ordinary place that happens to have a
    // station nearby.
    if (2.0 * tag.d_d <= s.cd) return tag;
    tag.end = TransferEnd::origin;
    tag.station = so->station;
    tag.mode = mode;
  } else if (tag.d_d <= td && tag.d_d < tag.d_o) {
    if (2.0 * tag.d_o <= s.cd) return tag;
    tag.end = TransferEnd::destination;
    tag.station = sd->station;
    tag.mode = mode;
  }
  return tag;
}

TransferTag classify_transfer(const SICCF& s, const StationIndex& index, const DecisionParams& dp) {
  TransferTag metro = classify_transfer_mode(s, index, TransitMode::metro, dp.td_metro, dp);
  if (metro.connected()) return metro;
  TransferTag bus = classify_transfer_mode(s, index, TransitMode::bus, dp.td_bus, dp);
  if (bus.connected()) return bus;
  return metro;
}

// ---------------------------------------------------------------------------

std::string_view to_string(CommuterCategory c) {
  switch (c) {
    case CommuterCategory::OnlyBiking: return "OnlyBiking";
    case CommuterCategory::BikingTransit: return "BikingTransit";
    case CommuterCategory::TransitBiking: return "TransitBiking";
    case CommuterCategory::BikingTransitBiking: return "BikingTransitBiking";
  }
  return "?";
}

std::optional<CommuterCategory> parse_category(std::string_view s) {
  for (const CommuterCategory c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::vector<std::size_t> CommuterRecord::transfer_stations() const {
  std::vector<std::size_t> out;
  if (home_station) out.push_back(*home_station);
  if (work_station) out.push_back(*work_station);
  return out;
}

bool idcf_before(const SICCF& a, const SICCF& b) {
  if (a.n_t != b.n_t) return a.n_t > b.n_t;
  if (a.wh != b.wh) return a.wh > b.wh;
  return a.iccf_id < b.iccf_id;
}

bool temporally_close(const SICCF& candidate, const SICCF& idcf, const DecisionParams& dp) {
  const double morning = circular_distance(candidate.t_e, idcf.t_e) - candidate.ct_e;
  const double evening = circular_distance(candidate.t_l, idcf.t_l) - idcf.ct_l;
  return morning < dp.iadcf_window || evening < dp.iadcf_window;
}

namespace {

CommuteAttributes own_attributes(const SICCF& s) {
  return {s.t_e, s.t_l, s.ct_e, s.ct_l, s.cd, s.wh, s.n_t, s.r_rt};
}

CommuteAttributes chain_attributes(const SICCF& home_side, const SICCF& work_side,
                                   const SICCF& idcf, PlanarPoint home, PlanarPoint work) {
  CommuteAttributes a;
  a.t_e = home_side.t_e;
  a.t_l = work_side.t_l;
  a.ct_e = forward_gap(home_side.t_e, work_side.t_e) + work_side.ct_e;
  a.ct_l = forward_gap(work_side.t_l, home_side.t_l) + home_side.ct_l;
  a.cd = dist(home, work);
  a.wh = work_side.wh;
  a.n_t = idcf.n_t;
  a.r_rt = idcf.r_rt;
  return a;
}

}  // namespace

std::optional<CommuterRecord> classify_commuter(std::string user_id,
                                                std::span<const SICCF> siccfs,
                                                std::span<const TransferTag> tags,
                                                const DecisionParams& dp) {
  if (siccfs.empty()) return std::nullopt;
  if (tags.size() != siccfs.size()) throw Error("classify_commuter: one tag per SICCF required");

  std::vector<std::size_t> rank(siccfs.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(),
            [&](std::size_t a, std::size_t b) { return idcf_before(siccfs[a], siccfs[b]); });

  const std::size_t top = rank.front();
  CommuterRecord rec;
  rec.user_id = std::move(user_id);
  rec.idcf = siccfs[top];
  rec.idcf_tag = tags[top];

  rec.attrs = own_attributes(rec.idcf);
  if (!rec.idcf_tag.connected()) {
    rec.category = CommuterCategory::OnlyBiking;
    rec.home = rec.idcf.origin;
    rec.work = rec.idcf.destination;
    return rec;
  }

  // The IADCF must connect at the opposite end through a different station.
  const TransferEnd wanted = rec.idcf_tag.end == TransferEnd::origin ? TransferEnd::destination
                                                                      : TransferEnd::origin;
  std::optional<std::size_t> extra;
  for (std::size_t k = 1; k < rank.size(); ++k) {
    const std::size_t c = rank[k];
    if (tags[c].end != wanted || tags[c].station == rec.idcf_tag.station) continue;
    if (!temporally_close(siccfs[c], rec.idcf, dp)) continue;
    extra = c;
    break;
  }

  if (rec.idcf_tag.end == TransferEnd::origin) {
    rec.work = rec.idcf.destination;
    rec.work_station = rec.idcf_tag.station;
    if (extra) {
      rec.category = CommuterCategory::BikingTransitBiking;
      rec.iadcf = siccfs[*extra];
      rec.home = rec.iadcf->origin;
      rec.home_station = tags[*extra].station;
      rec.attrs = chain_attributes(*rec.iadcf, rec.idcf, rec.idcf, *rec.home, *rec.work);
    } else {
      rec.category = CommuterCategory::TransitBiking;
    }
  } else {
    rec.home = rec.idcf.origin;
    rec.home_station = rec.idcf_tag.station;
    if (extra) {
      rec.category = CommuterCategory::BikingTransitBiking;
      rec.iadcf = siccfs[*extra];
      rec.work = rec.iadcf->destination;
      rec.work_station = tags[*extra].station;
      rec.attrs = chain_attributes(rec.idcf, *rec.iadcf, rec.idcf, *rec.home, *rec.work);
    } else {
      rec.category = CommuterCategory::BikingTransit;
    }
  }
  return rec;
}

UserCommute run_layer2(const std::string& user_id, std::span<const ISTFC> istfcs,
                       const ClusterParams& cp, const DecisionParams& dp,
                       const StationIndex& stations) {
  UserCommute out;
  out.iccfs = identify_iccfs(istfcs, cp, dp);
  out.siccfs.reserve(out.iccfs.size());
  out.tags.reserve(out.iccfs.size());
  for (const ICCF& c : out.iccfs) {
    out.siccfs.push_back(simplify_iccf(istfcs[c.early], istfcs[c.late], c.iccf_id));
    out.tags.push_back(classify_transfer(out.siccfs.back(), stations, dp));
  }
  out.record = classify_commuter(user_id, out.siccfs, out.tags, dp);
  return out;
}

}  // namespace commute
