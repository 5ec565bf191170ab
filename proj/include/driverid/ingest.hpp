#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "driverid/errors.hpp"

namespace driverid {

struct GpsRecord {
  std::string driver_id;
  std::string trip_id;
  std::int64_t t = 0;   // seconds, strictly increasing within a trip
  double speed = 0.0;   // km/h, >= 0
  double bearing = 0.0; // degrees in [0, 360)
};

// One 1 Hz sample with the six kinematic signals:
// speed, acceleration, jerk, bearing, angular speed, angular jerk.
struct TrajectoryPoint {
  double v = 0.0;  // km/h
  double a = 0.0;  // km/h per s
  double j = 0.0;  // km/h per s^2
  double b = 0.0;  // degrees
  double ba = 0.0; // degrees per s, >= 0
  double bj = 0.0; // degrees per s^2, >= 0
};

struct Trip {
  std::string driver_id;
  std::string trip_id;
  std::vector<TrajectoryPoint> points;
  // Signed wrapped bearing delta per point (index 0 is 0); kept separately
  // because state classification needs the turn direction.
  std::vector<double> signed_db;
};

struct RawTrip {
  std::string driver_id;
  std::string trip_id;
  std::vector<GpsRecord> records;
};

struct ParseResult {
  std::vector<RawTrip> trips;
  std::size_t parsed_rows = 0;
  std::size_t rejected_rows = 0;
};

// CSV schema: header `driver_id,trip_id,t,speed_kmh,bearing_deg`.
// With strict=true any invalid row (speed < 0, bearing outside [0,360),
// non-monotonic timestamp) throws ValidationError naming the row; with
// strict=false such rows are dropped and counted in rejected_rows.
ParseResult parse_fleet_csv(const std::string& path, bool strict = true);
ParseResult parse_fleet_csv(std::istream& in, bool strict = true);

// Splits a time-sorted record run at sampling gaps larger than max_gap
// seconds. Gaps of 2..max_gap seconds are filled in place: speed by linear
// interpolation, bearing by shortest-arc interpolation. Runs shorter than
// 3 points are dropped.
std::vector<std::vector<GpsRecord>> split_on_gaps(
    const std::vector<GpsRecord>& records, std::int64_t max_gap = 3);

// Derives the six-signal representation of a contiguous 1 Hz run.
// a_t = v_t - v_{t-1}; j_t = a_t - a_{t-1}; ba = |wrapped db|; bj = |dba|.
// Indices 0 and 1 get zeros for the fields that cannot be derived yet.
Trip derive_kinematics(const std::vector<GpsRecord>& run);

// Wrapped bearing delta in (-180, 180].
double bearing_delta(double from_deg, double to_deg);

struct SignalStats {
  std::size_t count = 0;
  double mean = 0, std = 0, min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
};

struct FleetDescription {
  // One entry per signal, ordered v, a, j, b, ba, bj.
  std::vector<SignalStats> per_signal;
  std::size_t trip_count = 0;
};

// Per-signal descriptive statistics over every point of every trip.
// Quantiles use linear interpolation between order statistics; std is the
// population standard deviation.
FleetDescription describe_fleet(const std::vector<Trip>& trips);

// Full pipeline: parse, split on gaps, derive kinematics per run.
// min_trip_secs drops derived trips shorter than that many points (0 keeps
// everything of length >= 3).
std::vector<Trip> prep_trips(const ParseResult& parsed,
                             std::int64_t max_gap = 3,
                             std::size_t min_trip_secs = 0);

// Sort-based quantile with linear interpolation, exposed for the stats
// oracle tests. q in [0,1]; data need not be sorted.
double quantile(std::vector<double> data, double q);

}  // namespace driverid
