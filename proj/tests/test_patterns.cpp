#include <doctest.h>

#include <cmath>
#include <random>

#include "driverid/patterns.hpp"

using namespace driverid;

namespace {

Subtrajectory random_sub(std::mt19937_64& rng, int ls) {
  Subtrajectory sub;
  sub.driver_id = "d";
  auto real = [&](double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1p-53);
  };
  for (int i = 0; i < ls; ++i) {
    TrajectoryPoint p;
    p.v = real(0, 120);
    p.a = real(-5, 5);
    p.j = real(-5, 5);
    p.b = real(0, 360);
    p.ba = real(0, 30);
    p.bj = real(0, 30);
    sub.points.push_back(p);
    sub.signed_db.push_back(real(-30, 30));
  }
  sub.signed_db[0] = 0;
  return sub;
}

// independent re-implementation of the transition matrix, plain loops
StMatrix brute_st(const Subtrajectory& sub, const std::vector<int>& states,
                  const Segment& seg) {
  StMatrix m;
  double sums[10][10] = {};
  long counts[10][10] = {};
  int first = seg.start < 1 ? 1 : seg.start;
  int last = seg.start + seg.len - 1; // last index in the segment
  int pairs = 0;
  for (int i = first; i < last; ++i) {
    int s = states[i], d = states[i + 1];
    double dv = sub.points[i].v - sub.points[i + 1].v;
    double db = sub.points[i].b - sub.points[i + 1].b;
    sums[s][d] += std::sqrt(dv * dv + db * db) + 1.0;
    counts[s][d] += 1;
    ++pairs;
  }
  for (int i = 1; i <= 9; ++i)
    for (int j = 1; j <= 9; ++j)
      if (counts[i][j]) {
        m.cells(i - 1, j - 1) = sums[i][j] / counts[i][j];
        m.counts(i - 1, j - 1) = counts[i][j];
      }
  m.degenerate = pairs < 1;
  return m;
}

// independent statistics, straight from the definitions
MsMatrix brute_ms(const Subtrajectory& sub, const Segment& seg) {
  MsMatrix m;
  for (int sig = 0; sig < 6; ++sig) {
    std::vector<double> vals;
    for (int i = seg.start; i < seg.start + seg.len; ++i) {
      const auto& p = sub.points[i];
      double v[6] = {p.v, p.a, p.j, p.b, p.ba, p.bj};
      vals.push_back(v[sig]);
    }
    std::sort(vals.begin(), vals.end());
    double mean = 0;
    for (double x : vals) mean += x;
    mean /= vals.size();
    double var = 0;
    for (double x : vals) var += (x - mean) * (x - mean);
    var /= vals.size();
    auto q = [&](double p) {
      double pos = p * (vals.size() - 1);
      std::size_t lo = static_cast<std::size_t>(pos);
      double frac = pos - lo;
      if (lo + 1 >= vals.size()) return vals.back();
      return vals[lo] * (1 - frac) + vals[lo + 1] * frac;
    };
    m.cells(sig, 0) = mean;
    m.cells(sig, 1) = vals.front();
    m.cells(sig, 2) = vals.back();
    m.cells(sig, 3) = q(0.25);
    m.cells(sig, 4) = q(0.5);
    m.cells(sig, 5) = q(0.75);
    m.cells(sig, 6) = std::sqrt(var);
  }
  return m;
}

}  // namespace

TEST_CASE("state classification follows the nine-state table") {
  StateThresholds th; // dv=1, db=1
  // longitudinal: accel / decel / constant; lateral: right / left / straight
  CHECK(classify_state(10, 12, 5, th) == 1);   // accel right
  CHECK(classify_state(10, 12, -5, th) == 2);  // accel left
  CHECK(classify_state(10, 12, 0, th) == 3);   // accel straight
  CHECK(classify_state(12, 10, 5, th) == 4);   // decel right
  CHECK(classify_state(12, 10, -5, th) == 5);  // decel left
  CHECK(classify_state(12, 10, 0, th) == 6);   // decel straight
  CHECK(classify_state(10, 10.5, 5, th) == 7); // constant right
  CHECK(classify_state(10, 10.5, -5, th) == 8);
  CHECK(classify_state(10, 10.5, 0.5, th) == 9);
  // constant means |dv| strictly below the threshold; straight means
  // |db| at or below it
  CHECK(classify_state(10, 11, 0, th) == 3);    // |dv| == 1 -> accelerating
  CHECK(classify_state(10, 10.99, 0, th) == 9); // just under -> constant
  CHECK(classify_state(10, 10, 1.0, th) == 9);  // |db| == 1 -> straight
  CHECK(classify_state(10, 10, 1.01, th) == 7);
}

TEST_CASE("state sequence over a subtrajectory") {
  Subtrajectory sub;
  for (int i = 0; i < 5; ++i) {
    TrajectoryPoint p;
    p.v = 10.0 + 3.0 * i; // monotone accelerating
    sub.points.push_back(p);
    sub.signed_db.push_back(0.0); // straight
  }
  auto states = state_sequence(sub, {});
  REQUIRE(states.size() == 5);
  CHECK(states[0] == 0); // no predecessor
  for (int i = 1; i < 5; ++i) CHECK(states[i] == 3);
}

TEST_CASE("transition intensity worked examples") {
  TrajectoryPoint a, b;
  a.v = 10; a.b = 90;
  b.v = 13; b.b = 94;
  CHECK(transition_intensity(a, b) == doctest::Approx(6.0)); // 3-4-5 triangle
  CHECK(transition_intensity(a, a) == doctest::Approx(1.0));
  TrajectoryPoint c, d;
  c.b = 0; d.b = 180;
  CHECK(transition_intensity(c, d) == doctest::Approx(181.0)); // raw bearing
  // wrapped variant sees the same 180-degree arc here
  CHECK(transition_intensity(c, d, true) == doctest::Approx(181.0));
  TrajectoryPoint e, f;
  e.b = 10; f.b = 350;
  CHECK(transition_intensity(e, f) == doctest::Approx(341.0));
  CHECK(transition_intensity(e, f, true) == doctest::Approx(21.0));
}

TEST_CASE("st_matrix hand-worked examples") {
  SUBCASE("single transition") {
    Subtrajectory sub;
    TrajectoryPoint p0, p1, p2;
    p0.v = 10; p1.v = 12; p2.v = 12.5;
    p0.b = p1.b = p2.b = 0;
    sub.points = {p0, p1, p2};
    sub.signed_db = {0, 0, 0};
    auto states = state_sequence(sub, {});
    CHECK(states[1] == 3); // dv = 2 -> accelerating straight
    CHECK(states[2] == 9); // dv = 0.5 -> constant straight
    Segment seg{0, 3};
    auto m = st_matrix(sub, states, seg);
    CHECK(m.cells(2, 8) == doctest::Approx(std::sqrt(0.25) + 1)); // 1.5
    CHECK(m.counts(2, 8) == 1);
    CHECK(m.cells.sum() == doctest::Approx(m.cells(2, 8)));
    CHECK_FALSE(m.degenerate);
  }
  SUBCASE("identical points average to 1") {
    Subtrajectory sub;
    sub.points.assign(4, TrajectoryPoint{});
    sub.signed_db.assign(4, 0.0);
    auto states = state_sequence(sub, {});
    auto m = st_matrix(sub, states, Segment{0, 4});
    CHECK(m.cells(8, 8) == doctest::Approx(1.0));
    CHECK(m.counts(8, 8) == 2); // index 0 has no state, so 2 pairs out of 4 points
  }
  SUBCASE("degenerate segment is flagged and zero") {
    Subtrajectory sub;
    sub.points.assign(3, TrajectoryPoint{});
    sub.signed_db.assign(3, 0.0);
    auto states = state_sequence(sub, {});
    auto m = st_matrix(sub, states, Segment{0, 1}); // no pair inside
    CHECK(m.degenerate);
    CHECK(m.cells.sum() == 0);
  }
}

TEST_CASE("st/ms invariants hold and match brute force on random segments") {
  std::mt19937_64 rng(4242);
  WindowConfig cfg{60, 10};
  auto segs = slice_segments(cfg);
  for (int trial = 0; trial < 1000 / static_cast<int>(segs.size()) + 1;
       ++trial) {
    auto sub = random_sub(rng, 60);
    auto states = state_sequence(sub, {});
    for (const auto& seg : segs) {
      auto st = st_matrix(sub, states, seg);
      auto st_ref = brute_st(sub, states, seg);
      CHECK((st.cells - st_ref.cells).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((st.counts - st_ref.counts).cwiseAbs().maxCoeff() == 0);
      // invariants: zero where count zero, >= 1 elsewhere
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
          if (st.counts(i, j) == 0)
            CHECK(st.cells(i, j) == 0);
          else
            CHECK(st.cells(i, j) >= 1.0);
        }
      auto ms = ms_matrix(sub, seg);
      auto ms_ref = brute_ms(sub, seg);
      CHECK((ms.cells - ms_ref.cells).cwiseAbs().maxCoeff() <= 1e-12);
      for (int sig = 0; sig < 6; ++sig) {
        CHECK(ms.cells(sig, 1) <= ms.cells(sig, 3)); // min <= q25
        CHECK(ms.cells(sig, 3) <= ms.cells(sig, 4));
        CHECK(ms.cells(sig, 4) <= ms.cells(sig, 5));
        CHECK(ms.cells(sig, 5) <= ms.cells(sig, 2)); // q75 <= max
        CHECK(ms.cells(sig, 1) <= ms.cells(sig, 0));
        CHECK(ms.cells(sig, 0) <= ms.cells(sig, 2));
        CHECK(ms.cells(sig, 6) >= 0);
      }
    }
  }
}

TEST_CASE("ms_matrix worked examples") {
  Subtrajectory sub;
  for (double v : {1.0, 2.0, 3.0, 4.0}) {
    TrajectoryPoint p;
    p.v = v;
    p.a = 5; // constant signal
    sub.points.push_back(p);
    sub.signed_db.push_back(0);
  }
  auto m = ms_matrix(sub, Segment{0, 4});
  CHECK(m.cells(0, 0) == doctest::Approx(2.5));
  CHECK(m.cells(0, 3) == doctest::Approx(1.75));
  CHECK(m.cells(0, 4) == doctest::Approx(2.5));
  CHECK(m.cells(0, 5) == doctest::Approx(3.25));
  CHECK(m.cells(0, 6) == doctest::Approx(std::sqrt(1.25)));
  // constant signal: all location stats equal, std 0
  for (int c = 0; c < 6; ++c) CHECK(m.cells(1, c) == doctest::Approx(5));
  CHECK(m.cells(1, 6) == doctest::Approx(0));
}

TEST_CASE("encoding layout and dimensions") {
  std::mt19937_64 rng(7);
  auto sub = random_sub(rng, 60);
  WindowConfig cfg{60, 10};
  PatternOptions opts;
  auto ms = encode_subtrajectory(sub, PatternMode::MS, cfg, opts);
  auto st = encode_subtrajectory(sub, PatternMode::ST, cfg, opts);
  auto fused = encode_subtrajectory(sub, PatternMode::FUSED, cfg, opts);
  CHECK(ms.x.rows() == 12);
  CHECK(ms.x.cols() == 42);
  CHECK(st.x.cols() == 81);
  CHECK(fused.x.cols() == 123);
  // fused rows are [MS | ST]
  CHECK((fused.x.leftCols(42) - ms.x).cwiseAbs().maxCoeff() == 0);
  CHECK((fused.x.rightCols(81) - st.x).cwiseAbs().maxCoeff() == 0);
  // MS flattening is signal-major: first 7 entries are the speed statistics
  auto m0 = ms_matrix(sub, Segment{0, 10});
  for (int c = 0; c < 7; ++c)
    CHECK(ms.x(0, c) == doctest::Approx(m0.cells(0, c)));
  for (int c = 0; c < 7; ++c)
    CHECK(ms.x(0, 7 + c) == doctest::Approx(m0.cells(1, c)));
  // ST flattening is row-major over the 9x9 matrix
  auto states = state_sequence(sub, {});
  auto s0 = st_matrix(sub, states, Segment{0, 10});
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      CHECK(st.x(0, i * 9 + j) == doctest::Approx(s0.cells(i, j)));
}

TEST_CASE("scaler maps to [0,1], constants to 0, and clips") {
  std::vector<PatternSequence> train(3);
  for (auto& s : train) s.x = MatrixXd::Zero(2, 3);
  train[0].x << 0, 5, 1, 1, 5, 1;
  train[1].x << 2, 5, 3, 3, 5, 2;
  train[2].x << 4, 5, 0, 2, 5, 4;
  auto scaler = fit_scaler(train);
  CHECK(scaler.min(0) == doctest::Approx(0));
  CHECK(scaler.max(0) == doctest::Approx(4));
  CHECK(scaler.min(1) == doctest::Approx(5));
  auto out = apply_scaler(scaler, train[1]);
  CHECK(out.x(0, 0) == doctest::Approx(0.5));
  CHECK(out.x(0, 1) == doctest::Approx(0)); // constant dimension
  CHECK(out.x(0, 2) == doctest::Approx(0.75));
  // unseen values clip into [0,1]
  PatternSequence far;
  far.x = MatrixXd::Zero(1, 3);
  far.x << 100, -100, -100;
  auto clipped = apply_scaler(scaler, far);
  CHECK(clipped.x(0, 0) == doctest::Approx(1));
  CHECK(clipped.x(0, 2) == doctest::Approx(0));
}

TEST_CASE("st-only scaling leaves the statistics columns raw") {
  std::mt19937_64 rng(11);
  std::vector<PatternSequence> seqs;
  WindowConfig cfg{60, 10};
  PatternOptions opts;
  for (int i = 0; i < 4; ++i)
    seqs.push_back(
        encode_subtrajectory(random_sub(rng, 60), PatternMode::FUSED, cfg, opts));
  auto scaler = fit_scaler(seqs, true);
  CHECK(scaler.st_only);
  CHECK(scaler.st_offset == 42);
  auto out = apply_scaler(scaler, seqs[0]);
  CHECK((out.x.leftCols(42) - seqs[0].x.leftCols(42)).cwiseAbs().maxCoeff() == 0);
  CHECK(out.x.rightCols(81).maxCoeff() <= 1.0);
  CHECK(out.x.rightCols(81).minCoeff() >= 0.0);
}

TEST_CASE("encode_trips assigns labels by sorted driver id") {
  std::mt19937_64 rng(5);
  std::vector<Trip> trips;
  for (const char* id : {"zoe", "amy", "mia"}) {
    auto sub = random_sub(rng, 120);
    Trip t;
    t.driver_id = id;
    t.trip_id = "t";
    t.points = sub.points;
    t.signed_db = sub.signed_db;
    trips.push_back(std::move(t));
  }
  std::vector<std::string> labels;
  auto seqs = encode_trips(trips, PatternMode::FUSED, {60, 10}, {}, labels);
  REQUIRE(labels.size() == 3);
  CHECK(labels[0] == "amy");
  CHECK(labels[1] == "mia");
  CHECK(labels[2] == "zoe");
  CHECK(seqs.size() == 6); // two subtrajectories per 120-point trip
  for (const auto& s : seqs)
    CHECK(labels[static_cast<std::size_t>(s.y)] == s.driver_id);
}

TEST_CASE("mode helpers") {
  CHECK(feature_dim(PatternMode::MS) == 42);
  CHECK(feature_dim(PatternMode::ST) == 81);
  CHECK(feature_dim(PatternMode::FUSED) == 123);
  CHECK(parse_mode("ms") == PatternMode::MS);
  CHECK(parse_mode("FUSED") == PatternMode::FUSED);
  CHECK_THROWS_AS(parse_mode("bogus"), ValidationError);
  CHECK(mode_name(PatternMode::ST) == "ST");
}
