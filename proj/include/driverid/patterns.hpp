#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "driverid/windowing.hpp"

namespace driverid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class PatternMode { MS, ST, FUSED };

constexpr int kNumStates = 9;
constexpr int kNumSignals = 6;
constexpr int kNumStatistics = 7; // mean, min, max, q25, q50, q75, std
constexpr int kMsDim = kNumSignals * kNumStatistics; // 42
constexpr int kStDim = kNumStates * kNumStates;      // 81

int feature_dim(PatternMode mode); // 42 | 81 | 123
PatternMode parse_mode(const std::string& name);
std::string mode_name(PatternMode mode);

struct StateThresholds {
  double dv = 1.0; // km/h; |v_t - v_{t-1}| below this is 'constant'
  double db = 1.0; // degrees; |signed db| at or below this is 'straight'
};

struct PatternOptions {
  StateThresholds thresholds;
  // Eq-literal intensity uses the raw bearing difference; this switches to
  // the wrapped (shortest-arc) difference instead.
  bool wrap_st_bearing = false;
  // Fit/apply min-max scaling on the ST columns only, leaving MS raw.
  bool scale_st_only = false;
};

// Table-2 state index in 1..9: rows accel/decel/constant, columns
// right/left/straight.
int classify_state(double v_prev, double v_cur, double signed_db,
                   const StateThresholds& th);

// States for indices 1..ls-1 (index i classified from points i-1 and i).
// Returned vector has length ls with entry 0 unused (set to 0).
std::vector<int> state_sequence(const Subtrajectory& sub,
                                const StateThresholds& th);

// Eq-style transition weight: Euclidean speed/bearing change plus 1.
double transition_intensity(const TrajectoryPoint& src,
                            const TrajectoryPoint& dst,
                            bool wrap_bearing = false);

struct StMatrix {
  MatrixXd cells = MatrixXd::Zero(kNumStates, kNumStates); // mean intensity
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts =
      Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(kNumStates,
                                                                kNumStates);
  bool degenerate = false; // fewer than 2 classified states in the segment
};

struct MsMatrix {
  MatrixXd cells = MatrixXd::Zero(kNumSignals, kNumStatistics);
};

// Average transition intensity per ordered state pair among the consecutive
// state pairs inside [seg.start, seg.start+seg.len). States are taken from
// state_sequence of the whole subtrajectory (index 0 has no state).
StMatrix st_matrix(const Subtrajectory& sub, const std::vector<int>& states,
                   const Segment& seg, bool wrap_bearing = false);

// 7 descriptive statistics per signal over the segment's points.
MsMatrix ms_matrix(const Subtrajectory& sub, const Segment& seg);

struct PatternSequence {
  MatrixXd x; // T x M
  int y = -1;
  std::string driver_id;
  PatternMode mode = PatternMode::FUSED;
};

// Encodes all segments of a subtrajectory; row t is the flattened MS
// (signal-major), ST (row-major), or their concatenation [MS | ST].
PatternSequence encode_subtrajectory(const Subtrajectory& sub,
                                     PatternMode mode,
                                     const WindowConfig& cfg,
                                     const PatternOptions& opts);

struct FeatureScaler {
  VectorXd min;
  VectorXd max;
  bool st_only = false;
  int st_offset = 0; // first ST column when st_only applies (FUSED: 42)

  int dim() const { return static_cast<int>(min.size()); }
};

// Per-dimension min/max over all segments of all training sequences.
FeatureScaler fit_scaler(const std::vector<PatternSequence>& training,
                         bool st_only = false);

// (x - min)/(max - min) per dimension, clipped to [0,1]; constant
// dimensions map to 0. With st_only, MS columns pass through unscaled.
PatternSequence apply_scaler(const FeatureScaler& scaler,
                             const PatternSequence& seq);

// Full encode step: slice, encode, label. Labels are assigned by sorted
// driver_id order; the mapping is returned through label_map.
std::vector<PatternSequence> encode_trips(
    const std::vector<Trip>& trips, PatternMode mode, const WindowConfig& cfg,
    const PatternOptions& opts, std::vector<std::string>& label_map);

}  // namespace driverid
