#pragma once

// Layer 2: the rule-based decision trees that turn a user's reliable ISTFCs
// into a commuter classification.
//
//   identify_iccfs     round trips separated by at least T_wh
//   simplify_iccf      pair -> single flow with the eight commute attributes
//   classify_transfer  does either end connect to a metro / bus station
//   classify_commuter  IDCF / IADCF selection and the four categories

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "commute/flow_cluster.hpp"
#include "commute/geo_time.hpp"
#include "commute/ingest.hpp"

namespace commute {

struct DecisionParams {
  double t_wh = 240.0;         // minimum working hours, minutes
  double td_metro = 60.0;      // metres
  double td_bus = 30.0;        // metres
  TimeOfDay op_start{360.0};   // transit service hours
  TimeOfDay op_end{1410.0};
  double iadcf_window = 120.0;  // minutes
  TimeOfDay morning_anchor{480.0};  // the earlier side of a pair is the one nearer this

  void validate() const;
};

struct ICCF {
  int iccf_id = 0;
  std::size_t early = 0;  // index of ISTFC_e in the list given to identify_iccfs
  std::size_t late = 0;   // index of ISTFC_l
};

/// True when `a` is the earlier-side cluster of the pair: its T_o is
/// circularly nearer the morning anchor, ties going to the smaller T_o, then
/// to the smaller istfc id.
bool is_earlier_side(const ISTFC& a, const ISTFC& b, const DecisionParams& dp);

/// Working-hours gap of an ordered pair: minutes from T_d of the earlier side
/// forward to T_o of the later side.
double working_gap(const ISTFC& early, const ISTFC& late);

/// All unordered pairs whose opposite endpoints are within 2r and whose
/// working gap is at least T_wh. Pairs are enumerated in the order of
/// `istfcs` (expected sorted with sort_by_size); an ISTFC may appear in
/// several ICCFs.
std::vector<ICCF> identify_iccfs(std::span<const ISTFC> istfcs, const ClusterParams& cp,
                                 const DecisionParams& dp);

struct SICCF {
  int iccf_id = 0;
  int istfc_e = 0;
  int istfc_l = 0;
  PlanarPoint origin;       // O_ICCF
  PlanarPoint destination;  // D_ICCF
  TimeOfDay t_e;
  TimeOfDay t_l;
  double ct_e = 0.0;
  double ct_l = 0.0;
  double cd = 0.0;
  double wh = 0.0;
  std::size_t n_t = 0;
  double r_rt = 0.0;
};

SICCF simplify_iccf(const ISTFC& early, const ISTFC& late, int iccf_id);
/// simplify_iccf after ordering the pair with is_earlier_side.
SICCF simplify_pair(const ISTFC& a, const ISTFC& b, int iccf_id, const DecisionParams& dp);

/// Nearest-station lookups per transit mode over a uniform grid.
class StationIndex {
 public:
  struct Hit {
    std::size_t station = 0;
    double distance = 0.0;
  };

  StationIndex() = default;
  explicit StationIndex(std::vector<Station> stations, double cell_m = 500.0);

  std::optional<Hit> nearest(PlanarPoint p, TransitMode mode) const;
  const std::vector<Station>& stations() const { return stations_; }
  bool empty() const { return stations_.empty(); }

 private:
  struct Cell {
    std::int64_t cx;
    std::int64_t cy;
    std::size_t station;
  };
  struct ModeGrid {
    std::vector<Cell> cells;  // sorted by (cx, cy, station)
    std::int64_t min_cx = 0, max_cx = -1, min_cy = 0, max_cy = -1;
  };

  const ModeGrid& grid(TransitMode m) const { return m == TransitMode::metro ? metro_ : bus_; }

  std::vector<Station> stations_;
  double cell_ = 500.0;
  ModeGrid metro_;
  ModeGrid bus_;
};

enum class TransferEnd { none, origin, destination };

struct TransferTag {
  TransferEnd end = TransferEnd::none;
  std::optional<std::size_t> station;  // index into StationIndex::stations()
  std::optional<TransitMode> mode;
  double d_o = 0.0;  // to the nearest station of the deciding mode
  double d_d = 0.0;

  bool connected() const { return end != TransferEnd::none; }
};

/// Transfer decision for one mode with its own distance threshold.
TransferTag classify_transfer_mode(const SICCF& s, const StationIndex& index, TransitMode mode,
                                   double td, const DecisionParams& dp);

/// Metro is tried first and wins whenever it connects; bus otherwise.
TransferTag classify_transfer(const SICCF& s, const StationIndex& index, const DecisionParams& dp);

enum class CommuterCategory { OnlyBiking, BikingTransit, TransitBiking, BikingTransitBiking };

inline constexpr CommuterCategory kAllCategories[] = {
    CommuterCategory::OnlyBiking, CommuterCategory::BikingTransit,
    CommuterCategory::TransitBiking, CommuterCategory::BikingTransitBiking};

std::string_view to_string(CommuterCategory c);
std::optional<CommuterCategory> parse_category(std::string_view s);

/// Door-to-door attributes of the daily commute. They equal the IDCF's own
/// attributes except for biking-transit-biking chains, where durations run
/// from the first ride's departure to the last ride's arrival, the distance
/// is home to work, and WH comes from the work-side flow.
struct CommuteAttributes {
  TimeOfDay t_e;
  TimeOfDay t_l;
  double ct_e = 0.0;
  double ct_l = 0.0;
  double cd = 0.0;
  double wh = 0.0;
  std::size_t n_t = 0;
  double r_rt = 0.0;
};

struct CommuterRecord {
  std::string user_id;
  CommuterCategory category = CommuterCategory::OnlyBiking;
  SICCF idcf;
  TransferTag idcf_tag;
  std::optional<SICCF> iadcf;
  std::optional<PlanarPoint> home;
  std::optional<PlanarPoint> work;
  std::optional<std::size_t> home_station;  // bike-to-transit end
  std::optional<std::size_t> work_station;  // transit-to-bike end
  CommuteAttributes attrs;

  std::vector<std::size_t> transfer_stations() const;
};

/// Rank used for IDCF selection: n_t desc, WH desc, iccf_id asc.
bool idcf_before(const SICCF& a, const SICCF& b);

/// IADCF temporal closeness against the IDCF.
bool temporally_close(const SICCF& candidate, const SICCF& idcf, const DecisionParams& dp);

/// `tags[i]` belongs to `siccfs[i]`. Returns nothing when there is no SICCF.
std::optional<CommuterRecord> classify_commuter(std::string user_id,
                                                std::span<const SICCF> siccfs,
                                                std::span<const TransferTag> tags,
                                                const DecisionParams& dp);

struct UserCommute {
  std::vector<ICCF> iccfs;
  std::vector<SICCF> siccfs;
  std::vector<TransferTag> tags;
  std::optional<CommuterRecord> record;
};

/// Layer 2 for one user; `istfcs` are the reliable clusters from Layer 1.
UserCommute run_layer2(const std::string& user_id, std::span<const ISTFC> istfcs,
                       const ClusterParams& cp, const DecisionParams& dp,
                       const StationIndex& stations);

}  // namespace commute
