#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "driverid/ingest.hpp"

namespace driverid {

// One parameterized driver archetype for the synthetic fleet.
struct ArchetypeSpec {
  std::string name;
  double cruise_mean = 60;      // km/h
  double cruise_std = 3;        // km/h, per-trip draw
  double sigma_a = 1.0;         // km/h per s, accel aggressiveness
  double accel_rate = 4;        // events per minute
  double brake_rate = 4;        // events per minute
  double turn_rate = 3;         // events per minute
  double turn_sharpness = 6;    // deg/s mean ramp rate
  double persistence = 0.8;     // state-dwell probability, in (0,1)

  void validate() const;
};

struct FleetSpec {
  std::vector<ArchetypeSpec> archetypes;
  int trips_per_driver = 3;
  int trip_secs = 600;
  std::uint64_t seed = 1;

  void validate() const;
};

// Deterministic synthetic fleet in the ingest CSV schema. Each driver is a
// latent three-mode Markov process (accelerate / cruise / brake) plus
// independent turn events; speeds clipped to [0, 130], bearings to [0,360).
std::vector<GpsRecord> generate_fleet(const FleetSpec& spec);

void write_fleet_csv(const std::vector<GpsRecord>& rows,
                     const std::string& path);

// Named presets: separable5, separable10 (well-separated archetypes) and
// hard10 (deliberately overlapping).
FleetSpec preset_fleet(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace driverid
