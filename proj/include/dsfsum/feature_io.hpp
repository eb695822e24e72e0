#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dsfsum/errors.hpp"

namespace dsf {

// Half-open time interval [start_s, end_s) in seconds.
struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Time-stamped per-frame descriptor vectors for one video.
//
// File format (line-delimited JSON):
//   {"video_id":..,"dim":..,"fps":..,"duration_s":..}
//   {"t":..,"v":[..]}        one record per frame
// Timestamps must be strictly increasing and inside [0, duration_s];
// every v must have exactly `dim` finite components.
struct FeatureTrack {
  std::string video_id;
  int dim = 0;
  double fps = 0.0;  // rate of the stored descriptor stream
  double duration_s = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> frames;

  std::size_t frame_count() const { return frames.size(); }
};

// One precomputed sentence embedding attached to a span of a video.
// File format: one {"desc_id","video_id","start_s","end_s","y":[..],"text"?} per line.
struct DescriptionVector {
  std::string desc_id;
  std::string video_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Eigen::VectorXd y;
  std::string text;  // optional, carried as a comment only
};

// Manually-created summaries for one video.
// File format: {"video_id","fps","duration_s"} header, then one
// {"annotator_id","intervals":[[s,e],..]} per annotator.
struct ReferenceSummarySet {
  struct Reference {
    std::string annotator_id;
    std::vector<Interval> intervals;
  };
  std::string video_id;
  double fps = 0.0;
  double duration_s = 0.0;
  std::vector<Reference> references;
};

// In-memory image of the binary model container. Tensor payloads are 32-bit
// floats, exactly what is stored on disk, so a write/read round trip is
// bit-exact.
//
// Binary layout, all integers and floats little-endian:
//   magic "DSFE" | u32 version | u64 metadata length | metadata (UTF-8 JSON)
//   u32 tensor count
//   per tensor: u32 name length | name | u32 rank | rank x u64 dims | f32 data
struct ModelFile {
  struct Tensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> data;  // row-major
  };
  std::uint32_t version = 1;
  nlohmann::json metadata;  // dims, training config snapshot, seed
  std::vector<Tensor> tensors;

  const Tensor* find(const std::string& name) const;
  const Tensor& require(const std::string& name) const;
};

FeatureTrack read_feature_track(const std::filesystem::path& path);
void write_feature_track(const std::filesystem::path& path, const FeatureTrack& track);

std::vector<DescriptionVector> read_descriptions(const std::filesystem::path& path);
void write_descriptions(const std::filesystem::path& path,
                        const std::vector<DescriptionVector>& descs);

ReferenceSummarySet read_references(const std::filesystem::path& path);
void write_references(const std::filesystem::path& path, const ReferenceSummarySet& refs);

ModelFile read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const ModelFile& model);

void validate(const FeatureTrack& track);
void validate(const DescriptionVector& desc);
void validate(const ReferenceSummarySet& refs);
void validate(const ModelFile& model);

}  // namespace dsf
