#include "driverid/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "driverid/ingest.hpp"

namespace driverid {

int feature_dim(PatternMode mode) {
  switch (mode) {
    case PatternMode::MS: return kMsDim;
    case PatternMode::ST: return kStDim;
    case PatternMode::FUSED: return kMsDim + kStDim;
  }
  throw ValidationError("bad pattern mode");
}

PatternMode parse_mode(const std::string& name) {
  if (name == "MS" || name == "ms") return PatternMode::MS;
  if (name == "ST" || name == "st") return PatternMode::ST;
  if (name == "FUSED" || name == "fused" || name == "MS+ST")
    return PatternMode::FUSED;
  throw ValidationError("unknown mode '" + name + "' (MS|ST|FUSED)");
}

std::string mode_name(PatternMode mode) {
  switch (mode) {
    case PatternMode::MS: return "MS";
    case PatternMode::ST: return "ST";
    case PatternMode::FUSED: return "FUSED";
  }
  return "?";
}

int classify_state(double v_prev, double v_cur, double signed_db,
                   const StateThresholds& th) {
  double dv = v_cur - v_prev;
  int lon; // 0 accel, 1 decel, 2 constant
  if (std::abs(dv) < th.dv)
    lon = 2;
  else
    lon = dv > 0 ? 0 : 1;
  int lat; // 0 right, 1 left, 2 straight
  if (signed_db > th.db)
    lat = 0;
  else if (signed_db < -th.db)
    lat = 1;
  else
    lat = 2;
  return lon * 3 + lat + 1;
}

std::vector<int> state_sequence(const Subtrajectory& sub,
                                const StateThresholds& th) {
  std::vector<int> states(sub.points.size(), 0);
  for (std::size_t i = 1; i < sub.points.size(); ++i)
    states[i] = classify_state(sub.points[i - 1].v, sub.points[i].v,
                               sub.signed_db[i], th);
  return states;
}

double transition_intensity(const TrajectoryPoint& src,
                            const TrajectoryPoint& dst, bool wrap_bearing) {
  double dv = src.v - dst.v;
  double db = wrap_bearing ? bearing_delta(dst.b, src.b) : src.b - dst.b;
  return std::sqrt(dv * dv + db * db) + 1.0;
}

StMatrix st_matrix(const Subtrajectory& sub, const std::vector<int>& states,
                   const Segment& seg, bool wrap_bearing) {
  StMatrix m;
  int first = std::max(seg.start, 1); // index 0 has no state
  int last = seg.start + seg.len - 1;
  if (last - first < 1) {
    m.degenerate = true;
    return m;
  }
  MatrixXd sums = MatrixXd::Zero(kNumStates, kNumStates);
  for (int i = first; i < last; ++i) {
    int src = states[i] - 1;
    int dst = states[i + 1] - 1;
    sums(src, dst) +=
        transition_intensity(sub.points[i], sub.points[i + 1], wrap_bearing);
    m.counts(src, dst) += 1;
  }
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j)
      if (m.counts(i, j) > 0) m.cells(i, j) = sums(i, j) / double(m.counts(i, j));
  return m;
}

MsMatrix ms_matrix(const Subtrajectory& sub, const Segment& seg) {
  MsMatrix m;
  std::vector<double> col(seg.len);
  for (int s = 0; s < kNumSignals; ++s) {
    for (int i = 0; i < seg.len; ++i) {
      const TrajectoryPoint& p = sub.points[seg.start + i];
      switch (s) {
        case 0: col[i] = p.v; break;
        case 1: col[i] = p.a; break;
        case 2: col[i] = p.j; break;
        case 3: col[i] = p.b; break;
        case 4: col[i] = p.ba; break;
        default: col[i] = p.bj; break;
      }
    }
    double mean = 0;
    for (double x : col) mean += x;
    mean /= double(col.size());
    double var = 0;
    for (double x : col) var += (x - mean) * (x - mean);
    m.cells(s, 0) = mean;
    m.cells(s, 1) = *std::min_element(col.begin(), col.end());
    m.cells(s, 2) = *std::max_element(col.begin(), col.end());
    m.cells(s, 3) = quantile(col, 0.25);
    m.cells(s, 4) = quantile(col, 0.50);
    m.cells(s, 5) = quantile(col, 0.75);
    m.cells(s, 6) = std::sqrt(var / double(col.size()));
  }
  return m;
}

PatternSequence encode_subtrajectory(const Subtrajectory& sub,
                                     PatternMode mode,
                                     const WindowConfig& cfg,
                                     const PatternOptions& opts) {
  auto segs = slice_segments(cfg);
  auto states = state_sequence(sub, opts.thresholds);
  const int m_dim = feature_dim(mode);
  PatternSequence seq;
  seq.mode = mode;
  seq.driver_id = sub.driver_id;
  seq.x.resize(static_cast<int>(segs.size()), m_dim);
  for (std::size_t t = 0; t < segs.size(); ++t) {
    int col = 0;
    if (mode != PatternMode::ST) {
      MsMatrix ms = ms_matrix(sub, segs[t]);
      for (int s = 0; s < kNumSignals; ++s)
        for (int k = 0; k < kNumStatistics; ++k)
          seq.x(static_cast<int>(t), col++) = ms.cells(s, k);
    }
    if (mode != PatternMode::MS) {
      StMatrix st = st_matrix(sub, states, segs[t], opts.wrap_st_bearing);
      for (int i = 0; i < kNumStates; ++i)
        for (int j = 0; j < kNumStates; ++j)
          seq.x(static_cast<int>(t), col++) = st.cells(i, j);
    }
  }
  return seq;
}

FeatureScaler fit_scaler(const std::vector<PatternSequence>& training,
                         bool st_only) {
  if (training.empty()) throw ValidationError("EmptyTrainingSet");
  const int m_dim = static_cast<int>(training.front().x.cols());
  FeatureScaler s;
  s.min = training.front().x.colwise().minCoeff().transpose();
  s.max = training.front().x.colwise().maxCoeff().transpose();
  for (std::size_t i = 1; i < training.size(); ++i) {
    if (training[i].x.cols() != m_dim)
      throw DimensionMismatch("inconsistent feature dims in training set");
    s.min = s.min.cwiseMin(training[i].x.colwise().minCoeff().transpose());
    s.max = s.max.cwiseMax(training[i].x.colwise().maxCoeff().transpose());
  }
  s.st_only = st_only;
  if (st_only) {
    switch (training.front().mode) {
      case PatternMode::FUSED: s.st_offset = kMsDim; break;
      case PatternMode::ST: s.st_offset = 0; break;
      case PatternMode::MS: s.st_offset = m_dim; break;
    }
  }
  return s;
}

PatternSequence apply_scaler(const FeatureScaler& scaler,
                             const PatternSequence& seq) {
  if (seq.x.cols() != scaler.dim())
    throw DimensionMismatch("scaler dim " + std::to_string(scaler.dim()) +
                            " vs features " + std::to_string(seq.x.cols()));
  PatternSequence out = seq;
  const int start = scaler.st_only ? scaler.st_offset : 0;
  for (int d = start; d < scaler.dim(); ++d) {
    double range = scaler.max(d) - scaler.min(d);
    for (int t = 0; t < out.x.rows(); ++t) {
      double v = range == 0.0 ? 0.0 : (out.x(t, d) - scaler.min(d)) / range;
      out.x(t, d) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<PatternSequence> encode_trips(
    const std::vector<Trip>& trips, PatternMode mode, const WindowConfig& cfg,
    const PatternOptions& opts, std::vector<std::string>& label_map) {
  std::set<std::string> drivers;
  for (const auto& trip : trips) drivers.insert(trip.driver_id);
  label_map.assign(drivers.begin(), drivers.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < label_map.size(); ++i)
    index[label_map[i]] = static_cast<int>(i);

  std::vector<PatternSequence> out;
  for (const auto& trip : trips) {
    for (const auto& sub : slice_subtrajectories(trip, cfg)) {
      PatternSequence seq = encode_subtrajectory(sub, mode, cfg, opts);
      seq.y = index[trip.driver_id];
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace driverid
