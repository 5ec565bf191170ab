#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "driverid/io.hpp"
#include "driverid/synth.hpp"

using namespace driverid;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("format_double round trips exactly") {
  for (double v : {0.0, 1.0, -1.5, 0.1, 1e-15, 33.36, 1.0 / 3.0, 1e300}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("trips jsonl round trip") {
  TempFile f("io_trips.jsonl");
  std::vector<Trip> trips(2);
  trips[0].driver_id = "d1";
  trips[0].trip_id = "t1";
  trips[0].points = {{10, 0, 0, 90, 0, 0}, {11, 1, 0, 92, 2, 0}};
  trips[0].signed_db = {0, 2};
  trips[1].driver_id = "d2";
  trips[1].trip_id = "t2#1";
  trips[1].points = {{0.125, -0.5, 0.25, 359.9, 0.1, 0.05}};
  trips[1].signed_db = {0};
  write_trips_jsonl(trips, f.path);
  auto back = read_trips_jsonl(f.path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].driver_id == "d1");
  CHECK(back[1].trip_id == "t2#1");
  CHECK(back[0].points[1].a == 1);
  CHECK(back[1].points[0].v == 0.125); // exact, not approximate
  CHECK(back[0].signed_db == trips[0].signed_db);
}

TEST_CASE("dataset jsonl round trip infers mode and labels") {
  TempFile f("io_dataset.jsonl");
  Dataset ds;
  ds.classes = 2;
  ds.label_map = {"a", "b"};
  ds.mode = PatternMode::MS;
  for (int i = 0; i < 4; ++i) {
    PatternSequence s;
    s.y = i % 2;
    s.driver_id = ds.label_map[static_cast<std::size_t>(s.y)];
    s.x = MatrixXd::Constant(3, 42, 0.25 * i);
    ds.samples.push_back(std::move(s));
  }
  write_dataset_jsonl(ds, f.path);
  auto back = read_dataset_jsonl(f.path);
  CHECK(back.classes == 2);
  CHECK(back.mode == PatternMode::MS);
  CHECK(back.label_map == ds.label_map);
  REQUIRE(back.samples.size() == 4);
  CHECK(back.samples[3].x(0, 0) == 0.75);
  CHECK(back.samples[3].x.rows() == 3);
}

TEST_CASE("scaler json round trip") {
  TempFile f("io_scaler.json");
  FeatureScaler s;
  s.min = VectorXd::Zero(4);
  s.max = VectorXd::Constant(4, 3.5);
  s.st_only = true;
  s.st_offset = 2;
  write_scaler_json(s, f.path);
  auto back = read_scaler_json(f.path);
  CHECK((back.min - s.min).cwiseAbs().maxCoeff() == 0);
  CHECK((back.max - s.max).cwiseAbs().maxCoeff() == 0);
  CHECK(back.st_only);
  CHECK(back.st_offset == 2);
}

TEST_CASE("metrics report json is stable and omits timing") {
  MetricsReport r;
  r.folds = {{0, 0, 0.9, 1.0, 12.5}, {0, 1, 0.8, 0.95, 11.0}};
  r.top1_mean = 0.85;
  r.top1_ci = 0.05;
  r.top3_mean = 0.975;
  r.top3_ci = 0.02;
  r.wall_clock_seconds = 23.5;
  r.config_echo = "folds=2";
  auto a = metrics_report_json(r);
  r.wall_clock_seconds = 99.0; // timing must not leak into the report
  auto b = metrics_report_json(r);
  CHECK(a == b);
  CHECK(a.find("0.85") != std::string::npos);
  CHECK(a.find("folds=2") != std::string::npos);
}

TEST_CASE("metrics csv layout") {
  TempFile f("io_metrics.csv");
  MetricsReport r;
  r.folds = {{0, 0, 0.9, 1.0, 2.0}, {1, 2, 0.5, 0.75, 3.0}};
  write_metrics_csv({{"lambda=0.5", r}}, f.path);
  std::ifstream in(f.path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "grid_point,fold,repeat,top1,top3,seconds");
  std::getline(in, line);
  CHECK(line == "lambda=0.5,0,0,0.9,1,2");
  std::getline(in, line);
  CHECK(line == "lambda=0.5,2,1,0.5,0.75,3");
}

TEST_CASE("fleet csv output parses back through ingest") {
  TempFile f("io_fleet.csv");
  auto spec = preset_fleet("separable5");
  spec.trip_secs = 60;
  auto rows = generate_fleet(spec);
  write_fleet_csv(rows, f.path);
  auto parsed = parse_fleet_csv(f.path, true); // strict: no invalid rows
  CHECK(parsed.parsed_rows == rows.size());
  CHECK(parsed.rejected_rows == 0);
  CHECK(parsed.trips.size() == 15);
}
