#include "driverid/windowing.hpp"

namespace driverid {

void WindowConfig::validate() const {
  if (lf <= 0 || ls <= 0) throw ValidationError("window lengths must be positive");
  if (lf % 2 != 0) throw ValidationError("lf must be even");
  if (lf >= ls) throw ValidationError("lf must be smaller than ls");
  if (ls % lf != 0) throw ValidationError("ls must be divisible by lf");
}

std::vector<Subtrajectory> slice_subtrajectories(const Trip& trip,
                                                 const WindowConfig& cfg) {
  cfg.validate();
  std::vector<Subtrajectory> out;
  const std::size_t ls = static_cast<std::size_t>(cfg.ls);
  for (std::size_t start = 0; start + ls <= trip.points.size(); start += ls) {
    Subtrajectory sub;
    sub.driver_id = trip.driver_id;
    sub.points.assign(trip.points.begin() + start,
                      trip.points.begin() + start + ls);
    sub.signed_db.assign(trip.signed_db.begin() + start,
                         trip.signed_db.begin() + start + ls);
    out.push_back(std::move(sub));
  }
  return out;
}

std::vector<Segment> slice_segments(const WindowConfig& cfg) {
  cfg.validate();
  std::vector<Segment> segs;
  const int stride = cfg.lf / 2;
  const int count = cfg.timesteps();
  for (int k = 0; k < count; ++k) {
    int start = k * stride;
    int len = (k == count - 1) ? stride : cfg.lf; // final segment truncated
    segs.push_back({start, len});
  }
  return segs;
}

}  // namespace driverid
