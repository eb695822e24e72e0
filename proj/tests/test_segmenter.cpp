#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dsfsum/segmenter.hpp"
#include "support/oracles.hpp"

using namespace dsf;

namespace {

FeatureTrack make_track(double duration_s, double fps, int dim = 3, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureTrack t;
  t.video_id = "seg_test";
  t.dim = dim;
  t.fps = fps;
  t.duration_s = duration_s;
  for (long j = 0;; ++j) {
    const double ts = static_cast<double>(j) / fps;
    if (ts > duration_s) break;
    t.times.push_back(ts);
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) v[d] = gauss(rng);
    t.frames.push_back(v);
  }
  return t;
}

// independent nearest-timestamp mapping by linear scan, ties to the earlier
std::size_t scan_nearest(const FeatureTrack& t, double instant) {
  std::size_t best = 0;
  double best_dist = std::abs(t.times[0] - instant);
  for (std::size_t i = 1; i < t.times.size(); ++i) {
    const double d = std::abs(t.times[i] - instant);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("segment count: 10s video, 5s window, 1s stride") {
  const FeatureTrack t = make_track(10.0, 2.0);
  const auto segs = extract_segments(t, {5.0, 1.0, 1.0});
  REQUIRE(segs.size() == 6);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(segs[i].start_s == doctest::Approx(static_cast<double>(i)).epsilon(1e-12));
    CHECK(segs[i].end_s - segs[i].start_s == doctest::Approx(5.0));
    CHECK(segs[i].cost == doctest::Approx(5.0));
    CHECK_FALSE(segs[i].degenerate);
  }
}

TEST_CASE("segment count: boundary case duration == window") {
  const FeatureTrack t = make_track(5.0, 2.0);
  const auto segs = extract_segments(t, {5.0, 1.0, 1.0});
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_s == 0.0);
  CHECK_FALSE(segs[0].degenerate);
}

TEST_CASE("60s track at 1 fps: 56 segments of 5 frames, indices match a scan oracle") {
  const FeatureTrack t = make_track(60.0, 1.0);
  const auto segs = extract_segments(t, {5.0, 1.0, 1.0});
  REQUIRE(segs.size() == 56);
  for (const Segment& s : segs) REQUIRE(s.frames.size() == 5);

  const Segment& s10 = segs[10];
  for (int j = 0; j < 5; ++j) {
    const double instant = s10.start_s + (j + 0.5);  // bin width 1s at 1 fps
    CHECK(s10.frame_indices[static_cast<std::size_t>(j)] == scan_nearest(t, instant));
  }
}

TEST_CASE("short track yields a single flagged whole-video segment") {
  const FeatureTrack t = make_track(3.0, 2.0);
  const auto segs = extract_segments(t, {5.0, 1.0, 1.0});
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].degenerate);
  CHECK(segs[0].start_s == 0.0);
  CHECK(segs[0].end_s == 3.0);
  CHECK(segs[0].frames.size() == 3);  // duration * sample_fps
}

TEST_CASE("errors: empty track and bad params") {
  FeatureTrack empty;
  empty.video_id = "e";
  empty.dim = 2;
  empty.fps = 1.0;
  empty.duration_s = 10.0;
  CHECK_THROWS_AS(extract_segments(empty, {5.0, 1.0, 1.0}), ValidationError);

  const FeatureTrack t = make_track(10.0, 1.0);
  CHECK_THROWS_AS(extract_segments(t, {0.0, 1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(extract_segments(t, {5.0, -1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(extract_segments(t, {5.0, 1.0, 0.0}), ValidationError);
}

TEST_CASE("property: count matches the closed form over random parameters") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> window(0.5, 12.0);
  std::uniform_real_distribution<double> stride(0.1, 6.0);
  std::uniform_real_distribution<double> extra(0.0, 120.0);
  for (int iter = 0; iter < 300; ++iter) {
    const double w = window(rng);
    const double s = stride(rng);
    const double duration = w + extra(rng);
    const long expected = static_cast<long>(std::floor((duration - w) / s)) + 1;
    CHECK(segment_count(duration, w, s) == expected);
  }
}

TEST_CASE("property: emitted frames are track frames; overlap equals window - stride") {
  const FeatureTrack t = make_track(30.0, 3.0, 4, 77);
  const auto segs = extract_segments(t, {5.0, 2.0, 2.0});
  for (const Segment& s : segs) {
    REQUIRE(s.frames.size() == 10);  // window * sample_fps
    for (std::size_t j = 0; j < s.frames.size(); ++j) {
      REQUIRE(s.frame_indices[j] < t.frames.size());
      CHECK(s.frames[j] == t.frames[s.frame_indices[j]]);  // no interpolation
    }
  }
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    const double overlap = segs[i].end_s - segs[i + 1].start_s;
    CHECK(overlap == doctest::Approx(5.0 - 2.0).epsilon(1e-12));
  }
}

TEST_CASE("nearest frame: ties go to the earlier frame") {
  FeatureTrack t;
  t.video_id = "tie";
  t.dim = 1;
  t.fps = 1.0;
  t.duration_s = 10.0;
  t.times = {1.0, 3.0};
  t.frames = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0)};
  CHECK(nearest_frame(t, 2.0) == 0);  // equidistant
  CHECK(nearest_frame(t, 2.1) == 1);
  CHECK(nearest_frame(t, 0.0) == 0);
  CHECK(nearest_frame(t, 9.9) == 1);
}

TEST_CASE("manifest round trip rebinds identical segments") {
  oracles::TempDir dir("manifest");
  const FeatureTrack t = make_track(20.0, 2.0, 3, 5);
  const SegmenterParams params{5.0, 1.0, 1.0};
  const auto segs = extract_segments(t, params);
  write_segment_manifest(dir.path / "m.jsonl", t, params, segs);

  const SegmentManifest mf = read_segment_manifest(dir.path / "m.jsonl");
  CHECK(mf.video_id == t.video_id);
  CHECK(mf.duration_s == t.duration_s);
  CHECK(mf.params.window_s == params.window_s);
  const auto rebound = attach_frames(mf, t);
  REQUIRE(rebound.size() == segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(rebound[i].index == segs[i].index);
    CHECK(rebound[i].start_s == segs[i].start_s);
    CHECK(rebound[i].frame_indices == segs[i].frame_indices);
    CHECK(rebound[i].frames == segs[i].frames);
  }

  FeatureTrack other = t;
  other.video_id = "someone_else";
  CHECK_THROWS_AS(attach_frames(mf, other), ValidationError);
}
