#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dsfsum/embedding.hpp"
#include "dsfsum/feature_io.hpp"
#include "dsfsum/trainer.hpp"

namespace dsf {

// Projection onto the top-2 principal components of the mean-centered set.
// Sign convention: each component's largest-magnitude loading is positive.
std::vector<Eigen::Vector2d> pca_project(std::span<const Eigen::VectorXd> points);

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Eigen::VectorXd> centers;
  double inertia = 0.0;
};

// Seeded Lloyd iterations with restarts; fully deterministic.
KMeansResult kmeans(std::span<const Eigen::VectorXd> points, int k, std::uint64_t seed,
                    int max_iterations = 50, int restarts = 5);

// Scatter plot with a temporal-adjacency polyline; labels color points by
// cluster id, point_labels (optional, may be empty strings) annotate points.
std::string scatter_svg(std::span<const Eigen::Vector2d> coords, std::span<const int> labels,
                        std::span<const std::string> point_labels);

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_videos = 8;
  int n_clusters = 2;
  int video_dim = 16;
  int text_dim = 12;
  double fps = 2.0;          // descriptor stream rate
  double duration_s = 30.0;  // per video
  int descs_per_video = 1;
  int annotators = 3;
  double noise_scale = 0.05;
  int latent_dim = 2;         // per-video variation shared by both modalities
  double latent_scale = 0.5;
  double center_scale = 0.8;
};

// Paired video/text features drawn from matched cluster centers plus a
// per-video latent that both modalities share, so associated pairs are
// alignable while clusters stay separated. Regeneration from the same seed
// is bit-identical.
struct SyntheticWorld {
  SynthConfig config;
  std::vector<Eigen::VectorXd> video_centers;  // per cluster
  std::vector<Eigen::VectorXd> text_centers;   // per cluster
  std::vector<int> cluster_of_video;
  std::vector<FeatureTrack> tracks;
  std::vector<DescriptionVector> descriptions;
  std::vector<ReferenceSummarySet> references;  // one set per video

  const FeatureTrack& track_of(const std::string& video_id) const;
  // One positive pair per description: frames resampled from the
  // description's span.
  std::vector<TrainingPair> training_pairs(int frames_per_pair) const;
};

SyntheticWorld make_synthetic_world(const SynthConfig& config);

// A single track whose frames cycle through n_scenes distinct feature-space
// scenes in blocks of scene_len_s seconds, n_blocks times.
FeatureTrack make_scene_track(std::uint64_t seed, int n_scenes, double scene_len_s, int n_blocks,
                              int dim, double fps, double noise_scale,
                              const std::string& video_id = "scene_track");

}  // namespace dsf
