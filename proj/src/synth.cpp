#include "driverid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "driverid/io.hpp"
#include "driverid/net.hpp"

namespace driverid {

void ArchetypeSpec::validate() const {
  if (cruise_mean < 0 || cruise_std < 0 || sigma_a < 0)
    throw ValidationError("InvalidSpec: negative speed parameters");
  if (accel_rate < 0 || brake_rate < 0 || turn_rate < 0 || turn_sharpness < 0)
    throw ValidationError("InvalidSpec: negative event rates");
  if (persistence <= 0.0 || persistence >= 1.0)
    throw ValidationError("InvalidSpec: persistence must be in (0,1)");
}

void FleetSpec::validate() const {
  if (archetypes.size() < 2)
    throw ValidationError("InvalidSpec: need >= 2 archetypes");
  if (trips_per_driver < 1 || trip_secs < 60)
    throw ValidationError("InvalidSpec: trips_per_driver >= 1, trip_secs >= 60");
  for (const auto& a : archetypes) a.validate();
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (a * 7919ull + b + 1ull));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x;
}

enum Mode { kCruise = 0, kAccel = 1, kBrake = 2 };

void generate_trip(const ArchetypeSpec& arch, const std::string& driver_id,
                   const std::string& trip_id, int secs, std::uint64_t seed,
                   std::vector<GpsRecord>& out) {
  std::mt19937_64 rng(seed);
  double cruise = std::clamp(
      normal_real(rng, arch.cruise_mean, arch.cruise_std), 5.0, 125.0);
  double v = cruise;
  double bearing = uniform_real(rng, 0.0, 360.0);
  Mode mode = kCruise;
  int turn_left_secs = 0;
  double turn_rate = 0;

  for (int t = 0; t < secs; ++t) {
    GpsRecord rec;
    rec.driver_id = driver_id;
    rec.trip_id = trip_id;
    rec.t = t;
    rec.speed = v;
    rec.bearing = bearing;
    out.push_back(rec);

    // latent longitudinal regime
    double u = uniform_real(rng, 0.0, 1.0);
    if (mode == kCruise) {
      double pa = arch.accel_rate / 60.0;
      double pb = arch.brake_rate / 60.0;
      if (u < pa)
        mode = kAccel;
      else if (u < pa + pb)
        mode = kBrake;
    } else if (u > arch.persistence) {
      mode = kCruise;
    }

    double dv;
    switch (mode) {
      case kAccel:
        dv = std::max(0.0, normal_real(rng, 1.5 * arch.sigma_a, 0.5 * arch.sigma_a));
        break;
      case kBrake:
        dv = -std::max(0.0, normal_real(rng, 1.5 * arch.sigma_a, 0.5 * arch.sigma_a));
        break;
      default:
        dv = 0.1 * (cruise - v) +
             normal_real(rng, 0.0, 0.15 * arch.sigma_a);
        break;
    }
    v = std::clamp(v + dv, 0.0, 130.0);

    // independent turn events: a bearing ramp for a few seconds
    if (turn_left_secs == 0) {
      if (uniform_real(rng, 0.0, 1.0) < arch.turn_rate / 60.0) {
        turn_left_secs = 2 + static_cast<int>(rng() % 5);
        double sign = (rng() & 1) ? 1.0 : -1.0;
        turn_rate = sign * std::max(0.0, normal_real(rng, arch.turn_sharpness,
                                                     0.3 * arch.turn_sharpness));
      }
    } else {
      bearing += turn_rate;
      --turn_left_secs;
    }
    bearing = std::fmod(bearing, 360.0);
    if (bearing < 0) bearing += 360.0;
  }
}

}  // namespace

std::vector<GpsRecord> generate_fleet(const FleetSpec& spec) {
  spec.validate();
  std::vector<GpsRecord> rows;
  rows.reserve(spec.archetypes.size() * spec.trips_per_driver * spec.trip_secs);
  for (std::size_t d = 0; d < spec.archetypes.size(); ++d) {
    const auto& arch = spec.archetypes[d];
    std::string driver_id =
        arch.name.empty() ? "driver" + std::to_string(d) : arch.name;
    for (int k = 0; k < spec.trips_per_driver; ++k)
      generate_trip(arch, driver_id, "trip" + std::to_string(k),
                    spec.trip_secs, mix(spec.seed, d, k), rows);
  }
  return rows;
}

void write_fleet_csv(const std::vector<GpsRecord>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "driver_id,trip_id,t,speed_kmh,bearing_deg\n";
  for (const auto& r : rows)
    out << r.driver_id << ',' << r.trip_id << ',' << r.t << ','
        << format_double(r.speed) << ',' << format_double(r.bearing) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

FleetSpec preset_fleet(const std::string& name) {
  auto arch = [](std::string n, double cruise, double sa, double rate,
                 double turn, double sharp, double rho) {
    ArchetypeSpec a;
    a.name = std::move(n);
    a.cruise_mean = cruise;
    a.cruise_std = 2.0;
    a.sigma_a = sa;
    a.accel_rate = rate;
    a.brake_rate = rate;
    a.turn_rate = turn;
    a.turn_sharpness = sharp;
    a.persistence = rho;
    return a;
  };

  FleetSpec spec;
  if (name == "separable5") {
    spec.archetypes = {
        arch("calm", 30, 0.4, 2.0, 1.0, 3.0, 0.55),
        arch("steady", 45, 0.9, 3.5, 2.0, 5.0, 0.65),
        arch("brisk", 60, 1.4, 5.0, 3.0, 7.0, 0.72),
        arch("eager", 75, 1.9, 6.5, 4.0, 9.0, 0.78),
        arch("aggressive", 90, 2.4, 8.0, 5.0, 11.0, 0.85),
    };
    spec.trips_per_driver = 3;
    spec.trip_secs = 600;
    spec.seed = 12345;
  } else if (name == "separable10") {
    for (int i = 0; i < 10; ++i)
      spec.archetypes.push_back(arch(
          "d" + std::to_string(i), 20.0 + 10.0 * i, 0.3 + 0.5 * i,
          2.0 + 0.7 * i, 1.0 + 0.5 * i, 3.0 + 1.0 * i, 0.50 + 0.04 * i));
    spec.trips_per_driver = 3;
    spec.trip_secs = 600;
    spec.seed = 23456;
  } else if (name == "hard10") {
    for (int i = 0; i < 10; ++i)
      spec.archetypes.push_back(arch(
          "h" + std::to_string(i), 48.0 + 0.8 * i, 0.9 + 0.06 * i,
          4.0 + 0.2 * i, 2.5 + 0.1 * i, 5.5 + 0.3 * i, 0.68 + 0.01 * i));
    spec.trips_per_driver = 3;
    spec.trip_secs = 600;
    spec.seed = 34567;
  } else {
    throw ValidationError("unknown preset '" + name +
                          "' (separable5|separable10|hard10)");
  }
  return spec;
}

std::vector<std::string> preset_names() {
  return {"separable5", "separable10", "hard10"};
}

}  // namespace driverid
