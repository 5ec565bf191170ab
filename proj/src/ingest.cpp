#include "driverid/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace driverid {

double bearing_delta(double from_deg, double to_deg) {
  double d = std::fmod(to_deg - from_deg + 180.0, 360.0);
  if (d < 0) d += 360.0;
  d -= 180.0;
  return d == -180.0 ? 180.0 : d; // keep the range (-180, 180]
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

const std::vector<std::string> kColumns = {"driver_id", "trip_id", "t",
                                           "speed_kmh", "bearing_deg"};

}  // namespace

ParseResult parse_fleet_csv(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_fleet_csv(in, strict);
}

ParseResult parse_fleet_csv(std::istream& in, bool strict) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("EmptyFile: no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header != kColumns) {
    for (const auto& col : kColumns)
      if (std::find(header.begin(), header.end(), col) == header.end())
        throw ValidationError("MissingColumn: " + col);
    throw ValidationError("bad header: expected driver_id,trip_id,t,speed_kmh,bearing_deg");
  }

  ParseResult result;
  std::map<std::pair<std::string, std::string>, std::vector<GpsRecord>> groups;
  std::size_t row = 1;
  bool any_row = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    any_row = true;
    auto fields = split_csv_line(line);
    if (fields.size() != kColumns.size())
      throw ValidationError("row " + std::to_string(row) + ": expected 5 fields");
    GpsRecord rec;
    rec.driver_id = fields[0];
    rec.trip_id = fields[1];
    try {
      rec.t = std::stoll(fields[2]);
      rec.speed = std::stod(fields[3]);
      rec.bearing = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw ValidationError("row " + std::to_string(row) + ": unparseable number");
    }
    if (rec.speed < 0 || rec.bearing < 0 || rec.bearing >= 360.0 ||
        !std::isfinite(rec.speed) || !std::isfinite(rec.bearing)) {
      if (strict)
        throw ValidationError("OutOfRangeValue at row " + std::to_string(row));
      ++result.rejected_rows;
      continue;
    }
    groups[{rec.driver_id, rec.trip_id}].push_back(rec);
    ++result.parsed_rows;
  }
  if (!any_row) throw ValidationError("EmptyFile: header only");

  for (auto& [key, records] : groups) {
    std::stable_sort(records.begin(), records.end(),
                     [](const GpsRecord& a, const GpsRecord& b) { return a.t < b.t; });
    std::vector<GpsRecord> kept;
    kept.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (i > 0 && records[i].t <= kept.back().t) {
        if (strict)
          throw ValidationError("NonMonotonicTimestamp in trip " + key.second +
                                " at t=" + std::to_string(records[i].t));
        ++result.rejected_rows;
        --result.parsed_rows;
        continue;
      }
      kept.push_back(records[i]);
    }
    result.trips.push_back({key.first, key.second, std::move(kept)});
  }
  return result;
}

std::vector<std::vector<GpsRecord>> split_on_gaps(
    const std::vector<GpsRecord>& records, std::int64_t max_gap) {
  std::vector<std::vector<GpsRecord>> runs;
  std::vector<GpsRecord> cur;
  auto flush = [&]() {
    if (cur.size() >= 3) runs.push_back(std::move(cur));
    cur.clear();
  };
  for (const auto& rec : records) {
    if (cur.empty()) {
      cur.push_back(rec);
      continue;
    }
    std::int64_t dt = rec.t - cur.back().t;
    if (dt == 1) {
      cur.push_back(rec);
    } else if (dt >= 2 && dt <= max_gap) {
      // fill the hole: linear speed, shortest-arc bearing
      const GpsRecord& prev = cur.back();
      double db = bearing_delta(prev.bearing, rec.bearing);
      for (std::int64_t k = 1; k < dt; ++k) {
        double f = static_cast<double>(k) / static_cast<double>(dt);
        GpsRecord mid = prev;
        mid.t = prev.t + k;
        mid.speed = prev.speed + f * (rec.speed - prev.speed);
        mid.bearing = std::fmod(prev.bearing + f * db + 360.0, 360.0);
        cur.push_back(mid);
      }
      cur.push_back(rec);
    } else {
      flush();
      cur.push_back(rec);
    }
  }
  flush();
  return runs;
}

Trip derive_kinematics(const std::vector<GpsRecord>& run) {
  if (run.size() < 3) throw ValidationError("TooShort: run needs >= 3 points");
  Trip trip;
  trip.driver_id = run.front().driver_id;
  trip.trip_id = run.front().trip_id;
  const std::size_t n = run.size();
  trip.points.resize(n);
  trip.signed_db.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    trip.points[t].v = run[t].speed;
    trip.points[t].b = run[t].bearing;
  }
  for (std::size_t t = 1; t < n; ++t) {
    double a = run[t].speed - run[t - 1].speed;
    double db = bearing_delta(run[t - 1].bearing, run[t].bearing);
    trip.signed_db[t] = db;
    if (t >= 2) {
      trip.points[t].a = a;
      trip.points[t].j = a - (run[t - 1].speed - run[t - 2].speed);
      trip.points[t].ba = std::abs(db);
      trip.points[t].bj =
          std::abs(std::abs(db) - std::abs(trip.signed_db[t - 1]));
    }
  }
  return trip;
}

double quantile(std::vector<double> data, double q) {
  if (data.empty()) throw ValidationError("quantile of empty data");
  std::sort(data.begin(), data.end());
  if (data.size() == 1) return data[0];
  double pos = q * static_cast<double>(data.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, data.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return data[lo] + frac * (data[hi] - data[lo]);
}

namespace {

SignalStats stats_of(const std::vector<double>& xs) {
  SignalStats s;
  s.count = xs.size();
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  double var = 0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / double(xs.size()));
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  s.q25 = quantile(xs, 0.25);
  s.q50 = quantile(xs, 0.50);
  s.q75 = quantile(xs, 0.75);
  return s;
}

}  // namespace

FleetDescription describe_fleet(const std::vector<Trip>& trips) {
  if (trips.empty()) throw ValidationError("EmptyFleet");
  std::vector<std::vector<double>> cols(6);
  for (const auto& trip : trips)
    for (const auto& p : trip.points) {
      cols[0].push_back(p.v);
      cols[1].push_back(p.a);
      cols[2].push_back(p.j);
      cols[3].push_back(p.b);
      cols[4].push_back(p.ba);
      cols[5].push_back(p.bj);
    }
  if (cols[0].empty()) throw ValidationError("EmptyFleet: no points");
  FleetDescription d;
  d.trip_count = trips.size();
  for (const auto& col : cols) d.per_signal.push_back(stats_of(col));
  return d;
}

std::vector<Trip> prep_trips(const ParseResult& parsed, std::int64_t max_gap,
                             std::size_t min_trip_secs) {
  std::vector<Trip> trips;
  for (const auto& raw : parsed.trips) {
    int run_idx = 0;
    for (const auto& run : split_on_gaps(raw.records, max_gap)) {
      Trip trip = derive_kinematics(run);
      if (trip.points.size() < std::max<std::size_t>(min_trip_secs, 3)) continue;
      if (run_idx > 0) trip.trip_id += "#" + std::to_string(run_idx);
      ++run_idx;
      trips.push_back(std::move(trip));
    }
  }
  return trips;
}

}  // namespace driverid
