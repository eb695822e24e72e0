#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsfsum/embedding.hpp"

namespace dsf {

// One (video segment, description) pair. positive == true iff the
// description belongs to the segment's video.
struct TrainingPair {
  std::string video_id;
  std::vector<Eigen::VectorXd> frames;
  Eigen::VectorXd y;
  bool positive = true;
};

struct TrainConfig {
  enum class MarginPolicy { kDerived, kFixed };

  MarginPolicy margin_policy = MarginPolicy::kDerived;
  double fixed_margin = 0.0;  // used when margin_policy == kFixed
  int negatives_per_positive = 20;
  double learning_rate = 2e-4;
  int epochs = 4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  int hidden_dim = 1000;
  int embed_dim = 300;
};

// Pairwise loss: distance for positives, hinge max(0, alpha - d) for
// negatives.
double contrastive_loss(const SemanticPoint& x, const SemanticPoint& y, bool positive,
                        double alpha);

// Largest positive-pair distance under the given (expected: freshly
// initialized) heads. A zero result is a degenerate margin; train() rejects it.
double derive_margin(std::span<const TrainingPair> positives, const ProjectionHead& video_head,
                     const ProjectionHead& text_head);

struct HeadGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static HeadGradients zeros_like(const ProjectionHead& head);
  void operator+=(const HeadGradients& other);
};

struct PairGradients {
  double loss = 0.0;
  HeadGradients video;
  HeadGradients text;
  void operator+=(const PairGradients& other);
};

// Exact analytic gradients of the pair loss for all 8 parameter tensors,
// including the mean-pooling path on the video branch. For an inactive
// hinge (negative pair, d >= alpha) all gradients are zero.
PairGradients loss_gradients(const TrainingPair& pair, const ProjectionHead& video_head,
                             const ProjectionHead& text_head, double alpha);
PairGradients loss_gradients(std::span<const Eigen::VectorXd> frames, const Eigen::VectorXd& y,
                             bool positive, const ProjectionHead& video_head,
                             const ProjectionHead& text_head, double alpha);

struct AdamState {
  HeadGradients m_video, v_video, m_text, v_text;
  std::int64_t step = 0;

  static AdamState zeros_like(const ProjectionHead& video, const ProjectionHead& text);
};

// One bias-corrected Adam update applied to both heads in place.
void adam_step(ProjectionHead& video, ProjectionHead& text, const HeadGradients& grad_video,
               const HeadGradients& grad_text, AdamState& state, const TrainConfig& config);

struct TrainLog {
  struct Step {
    int epoch = 0;
    int step = 0;     // global step counter, 1-based
    double loss = 0;  // summed over the 1 + negatives_per_positive pairs
  };
  double alpha = 0.0;
  std::vector<Step> steps;
  std::vector<double> epoch_mean_loss;
};

struct TrainResult {
  ProjectionHead video;
  ProjectionHead text;
  TrainLog log;
};

// Indices into `pairs` whose description may serve as a negative for
// `video_id` (all pairs from other videos).
std::vector<int> negative_pool(std::span<const TrainingPair> pairs, const std::string& video_id);

// Joint training: one positive plus its sampled negatives per Adam step,
// epochs over a seeded shuffle. Deterministic for a fixed seed.
TrainResult train(std::span<const TrainingPair> positives, const TrainConfig& config);

// Training log file: {"alpha","epochs","steps","config"} header, then
// {"epoch","step","loss"} per step with {"epoch","mean_loss"} after each epoch.
void write_train_log(const std::filesystem::path& path, const TrainLog& log,
                     const TrainConfig& config);

struct GradCheckDims {
  int video_dim = 5;
  int text_dim = 6;
  int hidden_dim = 4;
  int embed_dim = 3;
  int frames = 2;
};

struct GradCheckReport {
  struct Entry {
    std::string tensor;
    double max_rel_error = 0.0;
  };
  std::vector<Entry> tensors;
  double max_rel_error = 0.0;
  bool within(double tolerance) const { return max_rel_error <= tolerance; }
};

// Compares analytic gradients against central finite differences on random
// small heads, for an active positive and an active negative pair. The
// relative error uses a unit floor: |a - n| / max(1, |a|, |n|).
GradCheckReport gradient_check(std::uint64_t seed, const GradCheckDims& dims = {},
                               double fd_step = 1e-3);

}  // namespace dsf
