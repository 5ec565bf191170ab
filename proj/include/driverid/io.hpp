#pragma once
#include <string>
#include <vector>

#include "driverid/patterns.hpp"
#include "driverid/train_eval.hpp"

namespace driverid {

// prep output: JSON Lines, one object per trip
// {"driver_id":..., "trip_id":..., "points":[[v,a,j,b,ba,bj],...], "db":[...]}
void write_trips_jsonl(const std::vector<Trip>& trips, const std::string& path);
std::vector<Trip> read_trips_jsonl(const std::string& path);

// encode output: JSON Lines, one object per subtrajectory
// {"y": int, "driver_id": str, "x": [[...]xT]}
void write_dataset_jsonl(const Dataset& ds, const std::string& path);
Dataset read_dataset_jsonl(const std::string& path);

// sidecar scaler file: {"min": [...], "max": [...]}
void write_scaler_json(const FeatureScaler& s, const std::string& path);
FeatureScaler read_scaler_json(const std::string& path);

std::string metrics_report_json(const MetricsReport& r);
void write_metrics_json(const MetricsReport& r, const std::string& path);
// CSV columns: grid_point, fold, repeat, top1, top3, seconds
void write_metrics_csv(const std::vector<SweepRow>& rows,
                       const std::string& path);

std::string describe_fleet_json(const FleetDescription& d);
std::string format_fleet_table(const FleetDescription& d);

// Canonical shortest round-trip formatting for doubles in all JSON output.
std::string format_double(double v);

}  // namespace driverid
