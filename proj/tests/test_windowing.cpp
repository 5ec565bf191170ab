#include <doctest.h>

#include "driverid/windowing.hpp"

using namespace driverid;

namespace {

Trip fake_trip(int n) {
  Trip t;
  t.driver_id = "d";
  t.trip_id = "t";
  for (int i = 0; i < n; ++i) {
    TrajectoryPoint p;
    p.v = i;
    t.points.push_back(p);
    t.signed_db.push_back(0.1 * i);
  }
  return t;
}

}  // namespace

TEST_CASE("window config validation") {
  CHECK_NOTHROW((WindowConfig{60, 10}.validate()));
  CHECK_NOTHROW((WindowConfig{256, 16}.validate()));
  CHECK_THROWS_AS((WindowConfig{60, 7}.validate()), ValidationError);  // odd lf
  CHECK_THROWS_AS((WindowConfig{60, 25}.validate()), ValidationError); // ls % lf
  CHECK_THROWS_AS((WindowConfig{10, 10}.validate()), ValidationError); // lf >= ls
  CHECK_THROWS_AS((WindowConfig{60, 0}.validate()), ValidationError);
}

TEST_CASE("segment count is 2*ls/lf for the standard grid") {
  for (int lf : {10, 20, 30}) {
    WindowConfig cfg{60, lf};
    auto segs = slice_segments(cfg);
    CHECK(static_cast<int>(segs.size()) == 2 * 60 / lf);
    CHECK(cfg.timesteps() == 2 * 60 / lf);
  }
  // lf=15 is odd, so slicing rejects it, but the count formula still applies
  CHECK(WindowConfig{60, 15}.timesteps() == 8);
  WindowConfig wide{256, 16};
  CHECK(slice_segments(wide).size() == 32);
}

TEST_CASE("segment geometry: stride lf/2, truncated tail") {
  WindowConfig cfg{60, 10};
  auto segs = slice_segments(cfg);
  REQUIRE(segs.size() == 12);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(segs[i].start == static_cast<int>(i) * 5);
    CHECK(segs[i].len == (i + 1 == segs.size() ? 5 : 10));
    CHECK(segs[i].start + segs[i].len <= cfg.ls);
  }
  // last segment ends exactly at the subtrajectory boundary
  CHECK(segs.back().start + segs.back().len == 60);
}

TEST_CASE("subtrajectory slicing is non-overlapping and drops the remainder") {
  WindowConfig cfg{60, 10};
  auto subs = slice_subtrajectories(fake_trip(150), cfg);
  REQUIRE(subs.size() == 2);
  CHECK(subs[0].points.size() == 60);
  CHECK(subs[0].points[0].v == doctest::Approx(0));
  CHECK(subs[1].points[0].v == doctest::Approx(60));
  CHECK(subs[1].signed_db[0] == doctest::Approx(6.0));
  CHECK(slice_subtrajectories(fake_trip(59), cfg).empty());
  CHECK(slice_subtrajectories(fake_trip(60), cfg).size() == 1);
}
