#pragma once
#include <vector>

#include "driverid/ingest.hpp"

namespace driverid {

struct WindowConfig {
  int ls = 60; // subtrajectory length in points (1 Hz seconds)
  int lf = 10; // segment length; stride is lf/2

  void validate() const; // throws ValidationError
  // Segments per subtrajectory: 2*ls/lf (the last one is lf/2 long).
  int timesteps() const { return 2 * ls / lf; }
};

struct Subtrajectory {
  std::string driver_id;
  std::vector<TrajectoryPoint> points; // exactly ls
  std::vector<double> signed_db;       // exactly ls
};

struct Segment {
  int start = 0;
  int len = 0;
};

// Consecutive non-overlapping ls-point windows from index 0; a trailing
// remainder shorter than ls is discarded.
std::vector<Subtrajectory> slice_subtrajectories(const Trip& trip,
                                                 const WindowConfig& cfg);

// 2*ls/lf segments with stride lf/2; all have length lf except the final
// one, which is truncated to lf/2 at the subtrajectory boundary.
std::vector<Segment> slice_segments(const WindowConfig& cfg);

}  // namespace driverid
