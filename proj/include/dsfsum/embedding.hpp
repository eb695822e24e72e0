#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dsfsum/feature_io.hpp"
#include "dsfsum/segmenter.hpp"

namespace dsf {

// One branch of the joint network: two fully connected layers with tanh
// after each. Forward convention is tanh(W2^T tanh(W1^T v + b1) + b2).
struct ProjectionHead {
  Eigen::MatrixXd W1;  // d_in x h
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd W2;  // h x d_out
  Eigen::VectorXd b2;  // d_out

  int input_dim() const { return static_cast<int>(W1.rows()); }
  int hidden_dim() const { return static_cast<int>(W1.cols()); }
  int output_dim() const { return static_cast<int>(W2.cols()); }
};

using SemanticPoint = Eigen::VectorXd;

// Glorot-uniform weights, zero biases, deterministic per seed.
ProjectionHead init_head(int d_in, int h, int d_out, std::uint64_t seed);

SemanticPoint text_forward(const Eigen::VectorXd& y, const ProjectionHead& head);

// Per-frame two-layer forward, then component-wise mean over the frames.
// Frame outputs are pooled in a canonical order, so the result is exactly
// invariant under permutations of the frames.
SemanticPoint video_forward(std::span<const Eigen::VectorXd> frames, const ProjectionHead& head);
SemanticPoint video_forward(const Segment& segment, const ProjectionHead& head);

// Squared Euclidean distance.
double distance(const SemanticPoint& x, const SemanticPoint& y);

// Activations kept around for backpropagation.
struct BranchCache {
  std::vector<Eigen::VectorXd> a1;  // per frame, post-tanh hidden
  std::vector<Eigen::VectorXd> a2;  // per frame, post-tanh output
  SemanticPoint out;                // pooled (video) or single (text)
};
BranchCache video_forward_cached(std::span<const Eigen::VectorXd> frames,
                                 const ProjectionHead& head);
BranchCache text_forward_cached(const Eigen::VectorXd& y, const ProjectionHead& head);

// Model container round trip. Parameters are quantized to 32-bit floats on
// save; arithmetic stays at 64 bits in memory.
ModelFile heads_to_model(const ProjectionHead& video, const ProjectionHead& text,
                         nlohmann::json metadata);
std::pair<ProjectionHead, ProjectionHead> heads_from_model(const ModelFile& model);

// Embedded-points file: {"video_id","dim","count"} header, then
// {"index","x":[..]} per segment.
struct EmbeddedPoints {
  std::string video_id;
  int dim = 0;
  std::vector<std::pair<int, SemanticPoint>> points;
};

void write_embedded_points(const std::filesystem::path& path, const EmbeddedPoints& points);
EmbeddedPoints read_embedded_points(const std::filesystem::path& path);

}  // namespace dsf
