#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "dsfsum/feature_io.hpp"

namespace dsf {

struct SegmenterParams {
  double window_s = 5.0;
  double stride_s = 1.0;
  double sample_fps = 1.0;
};

// A fixed-length window of the track with M resampled descriptor frames.
// `degenerate` marks the whole-video fallback emitted for tracks shorter
// than the window; only then may end_s - start_s differ from window_s.
struct Segment {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  double cost = 0.0;  // seconds
  bool degenerate = false;
  std::vector<std::size_t> frame_indices;  // into FeatureTrack::frames
  std::vector<Eigen::VectorXd> frames;
};

// M = window_s * sample_fps, rounded; must come out >= 1.
int frames_per_window(const SegmenterParams& params);

// Number of complete windows: floor((duration - window) / stride) + 1.
// Callers must ensure duration_s >= window_s.
long segment_count(double duration_s, double window_s, double stride_s);

// Index of the track frame whose timestamp is nearest to t; ties go to the
// earlier frame.
std::size_t nearest_frame(const FeatureTrack& track, double t);

// m mid-bin sample instants over [start_s, end_s], each mapped to the
// nearest frame. No interpolation: every entry indexes an existing frame.
std::vector<std::size_t> resample_indices(const FeatureTrack& track, double start_s, double end_s,
                                          int m);

std::vector<Segment> extract_segments(const FeatureTrack& track,
                                      const SegmenterParams& params = {});

// Segment manifest file:
//   {"video_id","duration_s","window_s","stride_s","sample_fps","count"}
//   {"index","start_s","end_s","frame_indices":[..],"degenerate"} per segment
struct SegmentManifest {
  std::string video_id;
  double duration_s = 0.0;
  SegmenterParams params;
  std::vector<Segment> segments;  // frames left empty; use attach_frames
};

void write_segment_manifest(const std::filesystem::path& path, const FeatureTrack& track,
                            const SegmenterParams& params,
                            const std::vector<Segment>& segments);
SegmentManifest read_segment_manifest(const std::filesystem::path& path);

// Rebinds manifest segments to the track's frame vectors.
std::vector<Segment> attach_frames(const SegmentManifest& manifest, const FeatureTrack& track);

}  // namespace dsf
