#include "commute/flow_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "commute/error.hpp"

namespace commute {

namespace {

// Slack for fractional thresholds whose product is not exactly representable
// (0.3 * 10 must still admit n' = 3).
constexpr double kThresholdSlack = 1e-9;

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

// Groups local indices by component. Members ascend by trip_ref and groups
// are ordered by their first member.
std::vector<std::vector<std::uint32_t>> components(DisjointSets& sets,
                                                   std::span<const std::uint32_t> by_ref) {
  std::vector<std::vector<std::uint32_t>> groups;
  std::vector<long> root_group(by_ref.size(), -1);
  for (std::size_t k = 0; k < by_ref.size(); ++k) {
    const std::size_t root = sets.find(k);
    if (root_group[root] < 0) {
      root_group[root] = static_cast<long>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(root_group[root])].push_back(by_ref[k]);
  }
  return groups;
}

// Local positions 0..n-1 of `flows`, sorted by trip_ref.
std::vector<std::uint32_t> order_by_ref(std::span<const Flow> flows,
                                        std::span<const std::uint32_t> subset) {
  std::vector<std::uint32_t> idx(subset.begin(), subset.end());
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    return flows[a].trip_ref < flows[b].trip_ref;
  });
  return idx;
}

struct CellKey {
  std::int64_t cx;
  std::int64_t cy;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

double arc_overlap(double a0, double alen, double b0, double blen) {
  if (alen >= kMinutesPerDay) return std::min(blen, kMinutesPerDay);
  if (blen >= kMinutesPerDay) return alen;
  double total = 0.0;
  for (int k = -2; k <= 2; ++k) {
    const double shift = k * kMinutesPerDay;
    const double lo = std::max(a0, b0 + shift);
    const double hi = std::min(a0 + alen, b0 + blen + shift);
    if (hi > lo) total += hi - lo;
  }
  return total;
}

struct ExpandedSpan {
  double start;  // [0, 1440)
  double len;    // capped at 1440
};

ExpandedSpan expand(const TimeSpan& s, double beta) {
  return {wrap_minutes(s.start.minutes - beta), std::min(s.end_offset + 2.0 * beta, kMinutesPerDay)};
}

double expanded_similarity(ExpandedSpan a, ExpandedSpan b) {
  // Fixed argument order keeps the result bit-symmetric.
  if (std::tie(b.start, b.len) < std::tie(a.start, a.len)) std::swap(a, b);
  const double inter = arc_overlap(a.start, a.len, b.start, b.len);
  const double uni = a.len + b.len - inter;
  if (uni <= 0.0) return a.start == b.start ? 1.0 : 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace

Flow make_flow(std::uint32_t trip_ref, PlanarPoint o, PlanarPoint d, TimeSpan span, Date date) {
  return {trip_ref, o, d, dist(o, d), span, date};
}

std::vector<Flow> to_flows(std::span<const TripRecord> trips, const Projection& proj,
                           std::uint32_t first_ref) {
  std::vector<Flow> flows;
  flows.reserve(trips.size());
  for (const TripRecord& t : trips) {
    const TimeSpan span{time_of(t.start), t.duration_minutes()};
    flows.push_back(make_flow(first_ref++, proj.project(t.origin), proj.project(t.destination),
                              span, date_of(t.start)));
  }
  return flows;
}

void ClusterParams::validate() const {
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (!(r_max > 0.0)) throw Error("r_max must be positive");
  if (!(beta >= 0.0)) throw Error("beta must be non-negative");
  if (!(ts_min > 0.0 && ts_min <= 1.0)) throw Error("ts_min must lie in (0, 1]");
  if (!(sd_max > 0.0)) throw Error("sd_max must be positive");
  if (!(isfc_weekday_fraction >= 0.0)) throw Error("isfc_weekday_fraction must be >= 0");
  if (!(istfc_parent_fraction >= 0.0)) throw Error("istfc_parent_fraction must be >= 0");
}

double boundary_radius(double len_i, double len_j, const ClusterParams& p) {
  return std::min(p.alpha * std::min(len_i, len_j), p.r_max);
}

SimilarityScores spatial_similarity(const Flow& a, const Flow& b, const ClusterParams& p) {
  if (!(a.len > 0.0) || !(b.len > 0.0)) throw Error("spatial similarity of a zero-length flow");
  SimilarityScores s;
  s.r = boundary_radius(a.len, b.len, p);
  s.sd_o = dist(a.origin, b.origin) / s.r;
  s.sd_d = dist(a.destination, b.destination) / s.r;
  s.sd = std::sqrt(s.sd_o * s.sd_o + s.sd_d * s.sd_d);
  return s;
}

double temporal_similarity(const TimeSpan& a, const TimeSpan& b, double beta) {
  return expanded_similarity(expand(a, beta), expand(b, beta));
}

PlanarPoint compute_medoid(std::span<const PlanarPoint> points) {
  if (points.empty()) throw Error("medoid of an empty point set");
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    double sum = 0.0;
    for (const PlanarPoint q : points) sum += dist(points[i], q);
    // Sums of the same distances in a different order can differ in the
    // last bits; treat those as ties.
    const double tol = 1e-12 * std::max(1.0, std::abs(best_sum));
    if (i == 0 || sum < best_sum - tol) {
      best = i;
      best_sum = sum;
    } else if (sum <= best_sum + tol && points[i] < points[best]) {
      best = i;
      best_sum = std::min(sum, best_sum);
    }
  }
  return points[best];
}

std::vector<ISFC> cluster_spatial(std::span<const Flow> flows, const ClusterParams& p) {
  std::vector<ISFC> out;
  if (flows.empty()) return out;
  double max_len = 0.0;
  for (const Flow& f : flows) {
    if (!(f.len > 0.0)) throw Error("cluster_spatial: zero-length flow");
    max_len = std::max(max_len, f.len);
  }
  std::vector<std::uint32_t> all(flows.size());
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  const std::vector<std::uint32_t> by_ref = order_by_ref(flows, all);
  const std::size_t n = by_ref.size();

  // Similar flows have origins at most r <= min(r_max, alpha * max_len)
  // apart, so a grid of twice that size only needs the 3x3 neighbourhood.
  const double cell = 2.0 * std::min(p.r_max, p.alpha * max_len);
  std::vector<std::pair<CellKey, std::uint32_t>> grid(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PlanarPoint o = flows[by_ref[k]].origin;
    grid[k] = {{static_cast<std::int64_t>(std::floor(o.x / cell)),
                static_cast<std::int64_t>(std::floor(o.y / cell))},
               static_cast<std::uint32_t>(k)};
  }
  std::sort(grid.begin(), grid.end());

  DisjointSets sets(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Flow& fi = flows[by_ref[k]];
    const CellKey home{static_cast<std::int64_t>(std::floor(fi.origin.x / cell)),
                       static_cast<std::int64_t>(std::floor(fi.origin.y / cell))};
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const CellKey key{home.cx + dx, home.cy + dy};
        auto it = std::lower_bound(grid.begin(), grid.end(), key,
                                   [](const auto& e, const CellKey& k2) { return e.first < k2; });
        for (; it != grid.end() && it->first == key; ++it) {
          const std::size_t m = it->second;
          if (m <= k) continue;
          if (spatial_similarity(fi, flows[by_ref[m]], p).similar(p)) sets.unite(k, m);
        }
      }
    }
  }

  auto groups = components(sets, by_ref);
  out.reserve(groups.size());
  std::vector<PlanarPoint> os;
  std::vector<PlanarPoint> ds;
  for (auto& members : groups) {
    ISFC c;
    c.isfc_id = static_cast<int>(out.size());
    os.clear();
    ds.clear();
    for (const std::uint32_t m : members) {
      os.push_back(flows[m].origin);
      ds.push_back(flows[m].destination);
    }
    c.medoid_o = compute_medoid(os);
    c.medoid_d = compute_medoid(ds);
    c.len = dist(c.medoid_o, c.medoid_d);
    c.members = std::move(members);
    out.push_back(std::move(c));
  }
  return out;
}

std::size_t isfc_min_size(int active_weekdays, const ClusterParams& p) {
  const double raw = p.isfc_weekday_fraction * static_cast<double>(std::max(active_weekdays, 0));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - kThresholdSlack)));
}

std::vector<ISFC> filter_reliable_isfc(std::vector<ISFC> isfcs, int active_weekdays,
                                       const ClusterParams& p) {
  const std::size_t min_n = isfc_min_size(active_weekdays, p);
  std::erase_if(isfcs, [&](const ISFC& c) { return c.n() < min_n; });
  return isfcs;
}

void refresh_aggregates(ISTFC& c, std::span<const Flow> flows) {
  std::vector<PlanarPoint> os;
  std::vector<PlanarPoint> ds;
  std::vector<TimeOfDay> starts;
  std::vector<TimeOfDay> ends;
  os.reserve(c.members.size());
  ds.reserve(c.members.size());
  starts.reserve(c.members.size());
  ends.reserve(c.members.size());
  for (const std::uint32_t m : c.members) {
    os.push_back(flows[m].origin);
    ds.push_back(flows[m].destination);
    starts.push_back(flows[m].span.start);
    ends.push_back(flows[m].span.end());
  }
  c.medoid_o = compute_medoid(os);
  c.medoid_d = compute_medoid(ds);
  c.len = dist(c.medoid_o, c.medoid_d);
  c.t_o = circular_mean(starts);
  c.t_d = circular_mean(ends);
}

std::vector<ISTFC> cluster_temporal(std::span<const Flow> flows, const ISFC& isfc,
                                    const ClusterParams& p) {
  const std::vector<std::uint32_t> by_ref = order_by_ref(flows, isfc.members);
  const std::size_t n = by_ref.size();
  std::vector<ExpandedSpan> spans(n);
  for (std::size_t k = 0; k < n; ++k) spans[k] = expand(flows[by_ref[k]].span, p.beta);

  // Two arcs overlap only if one starts inside the other, so sweeping each
  // arc over the starts it covers finds every candidate pair.
  std::vector<std::uint32_t> by_start(n);
  std::iota(by_start.begin(), by_start.end(), std::uint32_t{0});
  std::sort(by_start.begin(), by_start.end(), [&](std::uint32_t a, std::uint32_t b) {
    return spans[a].start < spans[b].start || (spans[a].start == spans[b].start && a < b);
  });

  DisjointSets sets(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::uint32_t i = by_start[pos];
    const double reach = spans[i].start + spans[i].len;
    for (std::size_t step = 1; step < n; ++step) {
      const std::size_t q = pos + step;
      const std::uint32_t j = by_start[q % n];
      const double sj = spans[j].start + (q >= n ? kMinutesPerDay : 0.0);
      if (sj > reach && spans[i].len < kMinutesPerDay) break;
      if (expanded_similarity(spans[i], spans[j]) >= p.ts_min) sets.unite(i, j);
    }
  }

  std::vector<ISTFC> out;
  for (auto& members : components(sets, by_ref)) {
    ISTFC c;
    c.isfc_id = isfc.isfc_id;
    c.parent_n = isfc.n();
    c.members = std::move(members);
    refresh_aggregates(c, flows);
    out.push_back(std::move(c));
  }
  return out;
}

void sort_by_size(std::vector<ISTFC>& clusters) {
  std::stable_sort(clusters.begin(), clusters.end(), [](const ISTFC& a, const ISTFC& b) {
    if (a.n_prime() != b.n_prime()) return a.n_prime() > b.n_prime();
    return a.istfc_id < b.istfc_id;
  });
}

std::vector<ISTFC> merge_neighbor_istfcs(std::vector<ISTFC> clusters, std::span<const Flow> flows,
                                         const ClusterParams& p) {
  sort_by_size(clusters);
  std::vector<bool> absorbed(clusters.size(), false);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (absorbed[i]) continue;
    ISTFC& host = clusters[i];
    for (std::size_t j = i + 1; j < clusters.size(); ++j) {
      if (absorbed[j]) continue;
      const ISTFC& guest = clusters[j];
      const double r = boundary_radius(host.len, guest.len, p);
      const double ts = temporal_similarity(host.span(), guest.span(), p.beta);
      if (ts >= p.ts_min && dist(host.medoid_o, guest.medoid_o) < 2.0 * r &&
          dist(host.medoid_d, guest.medoid_d) < 2.0 * r) {
        std::vector<std::uint32_t> merged;
        merged.reserve(host.members.size() + guest.members.size());
        std::merge(host.members.begin(), host.members.end(), guest.members.begin(),
                   guest.members.end(), std::back_inserter(merged),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return flows[a].trip_ref < flows[b].trip_ref;
                   });
        host.members = std::move(merged);
        absorbed[j] = true;
        refresh_aggregates(host, flows);
      }
    }
  }
  std::vector<ISTFC> out;
  out.reserve(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (!absorbed[i]) out.push_back(std::move(clusters[i]));
  }
  return out;
}

std::vector<ISTFC> filter_reliable_istfc(std::vector<ISTFC> clusters, const ClusterParams& p) {
  std::erase_if(clusters, [&](const ISTFC& c) {
    return static_cast<double>(c.n_prime()) <
           p.istfc_parent_fraction * static_cast<double>(c.parent_n) - kThresholdSlack;
  });
  return clusters;
}

UserClusters run_layer1(std::span<const Flow> flows, int active_weekdays, const ClusterParams& p) {
  UserClusters out;
  out.isfcs = cluster_spatial(flows, p);
  out.reliable_isfcs = filter_reliable_isfc(out.isfcs, active_weekdays, p);
  for (const ISFC& s : out.reliable_isfcs) {
    for (ISTFC& t : cluster_temporal(flows, s, p)) {
      t.istfc_id = static_cast<int>(out.raw_istfcs.size());
      out.raw_istfcs.push_back(std::move(t));
    }
  }
  out.merged_istfcs = merge_neighbor_istfcs(out.raw_istfcs, flows, p);
  out.istfcs = filter_reliable_istfc(out.merged_istfcs, p);
  sort_by_size(out.istfcs);
  return out;
}

}  // namespace commute
