#include "dsfsum/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dsf {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_params(const SegmenterParams& p) {
  if (!(p.window_s > 0) || !std::isfinite(p.window_s))
    throw ValidationError("segmenter: window_s must be > 0");
  if (!(p.stride_s > 0) || !std::isfinite(p.stride_s))
    throw ValidationError("segmenter: stride_s must be > 0");
  if (!(p.sample_fps > 0) || !std::isfinite(p.sample_fps))
    throw ValidationError("segmenter: sample_fps must be > 0");
}

}  // namespace

int frames_per_window(const SegmenterParams& p) {
  check_params(p);
  const long m = std::lround(p.window_s * p.sample_fps);
  if (m < 1)
    throw ValidationError("segmenter: window_s * sample_fps rounds to zero frames per window");
  return static_cast<int>(m);
}

long segment_count(double duration_s, double window_s, double stride_s) {
  return static_cast<long>(std::floor((duration_s - window_s) / stride_s)) + 1;
}

std::size_t nearest_frame(const FeatureTrack& track, double t) {
  if (track.times.empty()) throw ValidationError("nearest_frame: track has no frames");
  const auto it = std::lower_bound(track.times.begin(), track.times.end(), t);
  if (it == track.times.begin()) return 0;
  if (it == track.times.end()) return track.times.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - track.times.begin());
  const std::size_t lo = hi - 1;
  // ties go to the earlier frame
  return (t - track.times[lo] <= track.times[hi] - t) ? lo : hi;
}

std::vector<std::size_t> resample_indices(const FeatureTrack& track, double start_s, double end_s,
                                          int m) {
  if (m < 1) throw ValidationError("resample_indices: need at least one sample");
  if (!(end_s > start_s)) throw ValidationError("resample_indices: empty window");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(m));
  const double bin = (end_s - start_s) / static_cast<double>(m);
  for (int j = 0; j < m; ++j) {
    const double instant = start_s + (static_cast<double>(j) + 0.5) * bin;
    out.push_back(nearest_frame(track, instant));
  }
  return out;
}

std::vector<Segment> extract_segments(const FeatureTrack& track, const SegmenterParams& p) {
  check_params(p);
  if (track.frames.empty()) throw ValidationError("extract_segments: track has no frames");

  auto gather = [&track](Segment& s) {
    s.frames.reserve(s.frame_indices.size());
    for (std::size_t idx : s.frame_indices) s.frames.push_back(track.frames[idx]);
  };

  std::vector<Segment> out;
  if (track.duration_s < p.window_s) {
    // whole-video fallback so short inputs still summarize
    Segment s;
    s.index = 0;
    s.start_s = 0.0;
    s.end_s = track.duration_s;
    s.cost = track.duration_s;
    s.degenerate = true;
    const int m =
        static_cast<int>(std::max<long>(1, std::lround(track.duration_s * p.sample_fps)));
    s.frame_indices = resample_indices(track, 0.0, track.duration_s, m);
    gather(s);
    out.push_back(std::move(s));
    return out;
  }

  const int m = frames_per_window(p);
  const long count = segment_count(track.duration_s, p.window_s, p.stride_s);
  out.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) {
    Segment s;
    s.index = static_cast<int>(k);
    s.start_s = static_cast<double>(k) * p.stride_s;
    s.end_s = s.start_s + p.window_s;
    s.cost = p.window_s;
    s.frame_indices = resample_indices(track, s.start_s, s.end_s, m);
    gather(s);
    out.push_back(std::move(s));
  }
  return out;
}

void write_segment_manifest(const std::filesystem::path& path, const FeatureTrack& track,
                            const SegmenterParams& params,
                            const std::vector<Segment>& segments) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  ordered_json h;
  h["video_id"] = track.video_id;
  h["duration_s"] = track.duration_s;
  h["window_s"] = params.window_s;
  h["stride_s"] = params.stride_s;
  h["sample_fps"] = params.sample_fps;
  h["count"] = segments.size();
  out << h.dump() << "\n";
  for (const Segment& s : segments) {
    ordered_json r;
    r["index"] = s.index;
    r["start_s"] = s.start_s;
    r["end_s"] = s.end_s;
    r["frame_indices"] = s.frame_indices;
    r["degenerate"] = s.degenerate;
    out << r.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

SegmentManifest read_segment_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&path, &lineno](const std::string& msg) {
    return ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };

  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty manifest");
  ++lineno;
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw bad(std::string("malformed JSON record: ") + e.what());
  }

  SegmentManifest mf;
  try {
    mf.video_id = h.at("video_id").get<std::string>();
    mf.duration_s = h.at("duration_s").get<double>();
    mf.params.window_s = h.at("window_s").get<double>();
    mf.params.stride_s = h.at("stride_s").get<double>();
    mf.params.sample_fps = h.at("sample_fps").get<double>();
  } catch (const json::exception& e) {
    throw bad(std::string("malformed manifest header: ") + e.what());
  }
  std::size_t declared = 0;
  if (auto it = h.find("count"); it != h.end()) declared = it->get<std::size_t>();

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      throw bad(std::string("malformed JSON record: ") + e.what());
    }
    Segment s;
    try {
      s.index = r.at("index").get<int>();
      s.start_s = r.at("start_s").get<double>();
      s.end_s = r.at("end_s").get<double>();
      s.frame_indices = r.at("frame_indices").get<std::vector<std::size_t>>();
      s.degenerate = r.value("degenerate", false);
    } catch (const json::exception& e) {
      throw bad(std::string("malformed segment record: ") + e.what());
    }
    if (!(s.end_s > s.start_s)) throw bad("segment has start_s >= end_s");
    s.cost = s.end_s - s.start_s;
    mf.segments.push_back(std::move(s));
  }
  if (declared != 0 && declared != mf.segments.size())
    throw ValidationError(path.string() + ": header count " + std::to_string(declared) +
                          " does not match " + std::to_string(mf.segments.size()) + " records");
  return mf;
}

std::vector<Segment> attach_frames(const SegmentManifest& manifest, const FeatureTrack& track) {
  if (manifest.video_id != track.video_id)
    throw ValidationError("attach_frames: manifest is for video '" + manifest.video_id +
                          "' but track is '" + track.video_id + "'");
  std::vector<Segment> out = manifest.segments;
  for (Segment& s : out) {
    s.frames.clear();
    s.frames.reserve(s.frame_indices.size());
    for (std::size_t idx : s.frame_indices) {
      if (idx >= track.frames.size())
        throw ValidationError("attach_frames: frame index " + std::to_string(idx) +
                              " out of range for track with " +
                              std::to_string(track.frames.size()) + " frames");
      s.frames.push_back(track.frames[idx]);
    }
  }
  return out;
}

}  // namespace dsf
