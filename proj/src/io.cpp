#include "driverid/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace driverid {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trips_jsonl(const std::vector<Trip>& trips,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& trip : trips) {
    json points = json::array();
    for (const auto& p : trip.points)
      points.push_back({p.v, p.a, p.j, p.b, p.ba, p.bj});
    json obj = {{"driver_id", trip.driver_id},
                {"trip_id", trip.trip_id},
                {"points", std::move(points)},
                {"db", trip.signed_db}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Trip> read_trips_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Trip> trips;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
      Trip trip;
      trip.driver_id = obj.at("driver_id").get<std::string>();
      trip.trip_id = obj.at("trip_id").get<std::string>();
      for (const auto& p : obj.at("points")) {
        if (p.size() != 6)
          throw ValidationError("point needs 6 signals");
        trip.points.push_back({p[0].get<double>(), p[1].get<double>(),
                               p[2].get<double>(), p[3].get<double>(),
                               p[4].get<double>(), p[5].get<double>()});
      }
      trip.signed_db = obj.at("db").get<std::vector<double>>();
      if (trip.signed_db.size() != trip.points.size())
        throw ValidationError("db length mismatch");
      trips.push_back(std::move(trip));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  return trips;
}

void write_dataset_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& s : ds.samples) {
    json x = json::array();
    for (int t = 0; t < s.x.rows(); ++t) {
      json row = json::array();
      for (int d = 0; d < s.x.cols(); ++d) row.push_back(s.x(t, d));
      x.push_back(std::move(row));
    }
    json obj = {{"y", s.y}, {"driver_id", s.driver_id}, {"x", std::move(x)}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Dataset ds;
  std::map<int, std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json obj = json::parse(line);
      PatternSequence s;
      s.y = obj.at("y").get<int>();
      s.driver_id = obj.at("driver_id").get<std::string>();
      const auto& x = obj.at("x");
      if (x.empty()) throw ValidationError("empty x");
      s.x.resize(static_cast<long>(x.size()),
                 static_cast<long>(x[0].size()));
      for (std::size_t t = 0; t < x.size(); ++t)
        for (std::size_t d = 0; d < x[t].size(); ++d)
          s.x(static_cast<long>(t), static_cast<long>(d)) = x[t][d].get<double>();
      labels[s.y] = s.driver_id;
      ds.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  if (ds.samples.empty()) throw ValidationError(path + ": empty dataset");
  ds.classes = labels.empty() ? 0 : labels.rbegin()->first + 1;
  ds.label_map.resize(ds.classes);
  for (const auto& [y, id] : labels)
    ds.label_map[static_cast<std::size_t>(y)] = id;
  const long m = ds.samples.front().x.cols();
  ds.mode = m == kMsDim ? PatternMode::MS
            : m == kStDim ? PatternMode::ST
                          : PatternMode::FUSED;
  return ds;
}

void write_scaler_json(const FeatureScaler& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  json obj = {{"min", std::vector<double>(s.min.data(), s.min.data() + s.min.size())},
              {"max", std::vector<double>(s.max.data(), s.max.data() + s.max.size())},
              {"st_only", s.st_only},
              {"st_offset", s.st_offset}};
  out << obj.dump() << '\n';
}

FeatureScaler read_scaler_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    json obj;
    in >> obj;
    FeatureScaler s;
    auto mins = obj.at("min").get<std::vector<double>>();
    auto maxs = obj.at("max").get<std::vector<double>>();
    s.min = Eigen::Map<VectorXd>(mins.data(), static_cast<long>(mins.size()));
    s.max = Eigen::Map<VectorXd>(maxs.data(), static_cast<long>(maxs.size()));
    s.st_only = obj.value("st_only", false);
    s.st_offset = obj.value("st_offset", 0);
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

namespace {

json report_to_json(const MetricsReport& r) {
  // Wall-clock is reported on the console and in the CSV, not here, so two
  // identical runs produce byte-identical report files.
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"repeat", f.repeat},
                     {"fold", f.fold},
                     {"top1", f.top1},
                     {"top3", f.top3}});
  return json{{"top1_mean", r.top1_mean},
              {"top1_ci95", r.top1_ci},
              {"top3_mean", r.top3_mean},
              {"top3_ci95", r.top3_ci},
              {"config", r.config_echo},
              {"folds", std::move(folds)}};
}

}  // namespace

std::string metrics_report_json(const MetricsReport& r) {
  return report_to_json(r).dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << metrics_report_json(r);
}

void write_metrics_csv(const std::vector<SweepRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "grid_point,fold,repeat,top1,top3,seconds\n";
  for (const auto& row : rows)
    for (const auto& f : row.report.folds)
      out << row.grid_point << ',' << f.fold << ',' << f.repeat << ','
          << format_double(f.top1) << ',' << format_double(f.top3) << ','
          << format_double(f.seconds) << '\n';
}

std::string describe_fleet_json(const FleetDescription& d) {
  static const char* signals[] = {"speed",        "acceleration", "jerk",
                                  "bearing",      "angular_speed",
                                  "angular_jerk"};
  json obj;
  obj["trips"] = d.trip_count;
  for (std::size_t i = 0; i < d.per_signal.size(); ++i) {
    const auto& s = d.per_signal[i];
    obj["signals"][signals[i]] = {{"count", s.count}, {"mean", s.mean},
                                  {"std", s.std},     {"min", s.min},
                                  {"25%", s.q25},     {"50%", s.q50},
                                  {"75%", s.q75},     {"max", s.max}};
  }
  return obj.dump(2) + "\n";
}

std::string format_fleet_table(const FleetDescription& d) {
  static const char* signals[] = {"speed", "accel", "jerk",
                                  "bearing", "angSpeed", "angJerk"};
  static const char* rows[] = {"count", "mean", "std", "min",
                               "25%",  "50%",  "75%", "max"};
  std::ostringstream os;
  os << std::left << std::setw(8) << "";
  for (const char* s : signals) os << std::right << std::setw(12) << s;
  os << '\n';
  for (int r = 0; r < 8; ++r) {
    os << std::left << std::setw(8) << rows[r];
    for (const auto& s : d.per_signal) {
      double v = 0;
      switch (r) {
        case 0: v = double(s.count); break;
        case 1: v = s.mean; break;
        case 2: v = s.std; break;
        case 3: v = s.min; break;
        case 4: v = s.q25; break;
        case 5: v = s.q50; break;
        case 6: v = s.q75; break;
        case 7: v = s.max; break;
      }
      os << std::right << std::setw(12) << std::fixed << std::setprecision(2) << v;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace driverid
