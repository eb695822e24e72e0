#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dsfsum/embedding.hpp"
#include "dsfsum/feature_io.hpp"
#include "dsfsum/segmenter.hpp"

namespace dsf {

struct PointEntry {
  int index = 0;  // segment index
  double start_s = 0.0;
  double end_s = 0.0;
  double cost = 1.0;  // seconds
  Eigen::VectorXd x;
};

struct PointSet {
  std::vector<PointEntry> points;

  std::size_t size() const { return points.size(); }
  const PointEntry& at_index(int segment_index) const;

  static PointSet from(const EmbeddedPoints& embedded, const SegmentManifest& manifest);
  // index == position, unit cost, start == position in seconds
  static PointSet from_vectors(std::span<const Eigen::VectorXd> xs);
};

struct Summary {
  std::vector<int> selected;  // segment indices, temporal order
  int k = 0;                  // requested budget
  double objective_value = 0.0;
  std::vector<Interval> merged_timeline;
};

struct SelectOptions {
  bool cost_aware = false;  // rank candidates by gain / cost
  bool no_overlap = false;  // reject candidates overlapping prior picks
};

// Sum over all points of the squared distance to the nearest medoid.
double objective(const PointSet& points, std::span<const int> medoid_indices);

// K = max(1, floor(ratio * duration / window)).
int budget_k(double duration_s, double window_s, double ratio = 0.15);

// Greedy minimization via the coverage gain G(S) = sum_j (D0 - min_s d(j,s))
// with D0 the max pairwise squared distance; lazy evaluation re-checks only
// the top of a priority queue of stale gains. Ties break on earliest start
// time, then lowest index. Returns exactly min(K, L) medoids (fewer only if
// no_overlap exhausts the candidates).
Summary lazy_greedy_select(const PointSet& points, int k, const SelectOptions& options = {});

// Reference implementation recomputing every gain each round; O(L^2 K).
Summary naive_greedy_select(const PointSet& points, int k, const SelectOptions& options = {});

// True arg-min over all C(L, K) subsets; ties by lexicographic index order.
// Feasible for small L only.
Summary exhaustive_select(const PointSet& points, int k);

// K evenly spaced picks: round(j * (L-1) / (K-1)), middle point when K == 1.
Summary uniform_baseline(const PointSet& points, int k);

// Union of the selected segments' [start, end) intervals, merged and sorted.
std::vector<Interval> render_timeline(const PointSet& points, std::span<const int> selected);

// Summary file: {"video_id","algorithm","k","objective"} header, then
// {"selected":[..]} and {"timeline":[[s,e],..]}.
struct SummaryFile {
  std::string video_id;
  std::string algorithm;
  Summary summary;
};

void write_summary(const std::filesystem::path& path, const SummaryFile& file);
SummaryFile read_summary(const std::filesystem::path& path);

}  // namespace dsf
