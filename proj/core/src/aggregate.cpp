#include "commute/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "commute/error.hpp"

namespace commute {

std::vector<double> residence_distances(std::span<const CommuterRecord> records,
                                        std::span<const ResidentialParcel> parcels) {
  if (parcels.empty()) throw Error("residence validation needs at least one parcel");
  std::vector<double> out;
  for (const CommuterRecord& r : records) {
    if (!r.home) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const ResidentialParcel& parcel : parcels) {
      best = std::min(best, point_to_polygon_distance(*r.home, parcel.boundary));
      if (best == 0.0) break;
    }
    out.push_back(best);
  }
  return out;
}

ValidationCurve validate_residences(std::span<const CommuterRecord> records,
                                    std::span<const ResidentialParcel> parcels, double step_m,
                                    double max_m) {
  if (!(step_m > 0.0)) throw Error("validation step must be positive");
  std::vector<double> d = residence_distances(records, parcels);
  std::sort(d.begin(), d.end());
  ValidationCurve curve;
  curve.users = d.size();
  const auto steps = static_cast<int>(std::floor(max_m / step_m + 1e-9));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * step_m;
    const auto within = static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), t) - d.begin());
    curve.thresholds.push_back(t);
    curve.cumulative_pct.push_back(
        d.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(d.size()));
  }
  return curve;
}

void Histogram::add(double v) {
  ++counts_[static_cast<std::int64_t>(std::floor(v / width_))];
  ++total_;
}

double Histogram::fraction(std::int64_t bin) const {
  const auto it = counts_.find(bin);
  if (it == counts_.end() || total_ == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total_);
}

SummaryTables summarize_commuters(std::span<const CommuterRecord> records,
                                  const HistogramBins& bins) {
  SummaryTables s;
  auto hist = [&](const std::string& metric, CommuterCategory c, double width) -> Histogram& {
    return s.histograms[metric].try_emplace(c, width).first->second;
  };
  for (const CommuterRecord& r : records) {
    ++s.counts[r.category];
    const CommuteAttributes& f = r.attrs;
    const bool complete_chain = r.category == CommuterCategory::OnlyBiking ||
                                r.category == CommuterCategory::BikingTransitBiking;
    if (complete_chain) {
      hist("ct_e", r.category, bins.ct_min).add(f.ct_e);
      hist("ct_l", r.category, bins.ct_min).add(f.ct_l);
      hist("cd", r.category, bins.cd_m).add(f.cd);
    }
    if (r.category != CommuterCategory::BikingTransit) hist("wh", r.category, bins.wh_min).add(f.wh);
    hist("r_rt", r.category, bins.r_rt).add(f.r_rt);
    hist("t_e", r.category, bins.time_min).add(f.t_e.minutes);
    hist("t_l", r.category, bins.time_min).add(f.t_l.minutes);
  }
  const double total = static_cast<double>(records.size());
  for (const auto& [c, n] : s.counts) s.shares[c] = static_cast<double>(n) / total;
  return s;
}

std::map<std::size_t, StationCounts> station_usage(std::span<const CommuterRecord> records) {
  std::map<std::size_t, StationCounts> usage;
  for (const CommuterRecord& r : records) {
    if (r.home_station) ++usage[*r.home_station].bike_to_transit;
    if (r.work_station) ++usage[*r.work_station].transit_to_bike;
  }
  return usage;
}

std::vector<CommuteFlowCluster> cluster_commute_flows(std::span<const CommuterRecord> records,
                                                      const ClusterParams& p) {
  std::vector<CommuteFlowCluster> out;
  for (const CommuterCategory cat : kAllCategories) {
    std::vector<Flow> flows;
    std::vector<const CommuterRecord*> owners;
    for (const CommuterRecord& r : records) {
      if (r.category != cat || !r.home || !r.work || *r.home == *r.work) continue;
      flows.push_back(make_flow(static_cast<std::uint32_t>(flows.size()), *r.home, *r.work, {}, {}));
      owners.push_back(&r);
    }
    if (flows.empty()) continue;
    for (const ISFC& c : cluster_spatial(flows, p)) {
      CommuteFlowCluster cf;
      cf.category = cat;
      for (const std::uint32_t m : c.members) cf.users.push_back(owners[m]->user_id);
      std::sort(cf.users.begin(), cf.users.end());
      cf.medoid_home = c.medoid_o;
      cf.medoid_work = c.medoid_d;
      cf.len = c.len;
      out.push_back(std::move(cf));
    }
  }
  return out;
}

}  // namespace commute
