#include "dsfsum/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <unordered_map>

namespace dsf {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Pairwise squared distances, fully cached as a lower triangle up to
// kCacheLimit points, computed on demand above that. Results are identical
// either way.
class DistanceOracle {
 public:
  static constexpr std::size_t kCacheLimit = 4096;

  explicit DistanceOracle(const PointSet& ps) : points_(ps.points) {
    const std::size_t n = points_.size();
    if (n <= kCacheLimit) {
      cache_.resize(n * (n + 1) / 2);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
          cache_[i * (i + 1) / 2 + j] = (points_[i].x - points_[j].x).squaredNorm();
      cached_ = true;
    }
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (cached_) {
      if (i < j) std::swap(i, j);
      return cache_[i * (i + 1) / 2 + j];
    }
    return (points_[i].x - points_[j].x).squaredNorm();
  }

  double max_pairwise() const {
    double d0 = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) d0 = std::max(d0, (*this)(i, j));
    return d0;
  }

 private:
  const std::vector<PointEntry>& points_;
  std::vector<double> cache_;
  bool cached_ = false;
};

void check_points(const PointSet& ps) {
  if (ps.points.empty()) throw ValidationError("summarizer: empty point set");
  std::unordered_map<int, int> seen;
  for (const PointEntry& p : ps.points) {
    if (!seen.emplace(p.index, 1).second)
      throw ValidationError("summarizer: duplicate segment index " + std::to_string(p.index));
    if (!(p.cost > 0) || !std::isfinite(p.cost))
      throw ValidationError("summarizer: segment " + std::to_string(p.index) +
                            " has non-positive cost");
  }
}

bool overlaps(const PointEntry& a, const PointEntry& b) {
  return a.start_s < b.end_s && b.start_s < a.end_s;
}

// true if a is a strictly better pick than b
bool better(double key_a, const PointEntry& a, double key_b, const PointEntry& b) {
  if (key_a != key_b) return key_a > key_b;
  if (a.start_s != b.start_s) return a.start_s < b.start_s;
  return a.index < b.index;
}

struct GreedyState {
  const PointSet& ps;
  DistanceOracle dist;
  double d0;
  std::vector<double> mind;     // current min distance to a selected medoid (D0 when none)
  std::vector<char> selected;   // per position
  std::vector<std::size_t> picks;

  explicit GreedyState(const PointSet& points)
      : ps(points),
        dist(points),
        d0(dist.max_pairwise()),
        mind(points.size(), 0.0),
        selected(points.size(), 0) {
    std::fill(mind.begin(), mind.end(), d0);
  }

  double gain(std::size_t c) const {
    double g = 0.0;
    for (std::size_t j = 0; j < mind.size(); ++j) g += std::max(0.0, mind[j] - dist(c, j));
    return g;
  }

  double key(std::size_t c, const SelectOptions& opt) const {
    const double g = gain(c);
    return opt.cost_aware ? g / ps.points[c].cost : g;
  }

  bool allowed(std::size_t c, const SelectOptions& opt) const {
    if (!opt.no_overlap) return true;
    for (std::size_t s : picks)
      if (overlaps(ps.points[c], ps.points[s])) return false;
    return true;
  }

  void select(std::size_t c) {
    selected[c] = 1;
    picks.push_back(c);
    for (std::size_t j = 0; j < mind.size(); ++j) mind[j] = std::min(mind[j], dist(c, j));
  }
};

Summary finish(const PointSet& ps, std::vector<std::size_t> picks, int k) {
  std::sort(picks.begin(), picks.end(), [&ps](std::size_t a, std::size_t b) {
    const PointEntry& pa = ps.points[a];
    const PointEntry& pb = ps.points[b];
    if (pa.start_s != pb.start_s) return pa.start_s < pb.start_s;
    return pa.index < pb.index;
  });
  Summary s;
  s.k = k;
  for (std::size_t p : picks) s.selected.push_back(ps.points[p].index);
  s.objective_value = objective(ps, s.selected);
  s.merged_timeline = render_timeline(ps, s.selected);
  return s;
}

int clamp_k(const PointSet& ps, int k) {
  if (k < 1) throw ValidationError("summarizer: k must be >= 1");
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), ps.size()));
}

}  // namespace

const PointEntry& PointSet::at_index(int segment_index) const {
  for (const PointEntry& p : points)
    if (p.index == segment_index) return p;
  throw ValidationError("point set has no segment with index " + std::to_string(segment_index));
}

PointSet PointSet::from(const EmbeddedPoints& embedded, const SegmentManifest& manifest) {
  if (embedded.video_id != manifest.video_id)
    throw ValidationError("points are for video '" + embedded.video_id + "' but manifest is '" +
                          manifest.video_id + "'");
  std::unordered_map<int, const Segment*> by_index;
  for (const Segment& s : manifest.segments) by_index[s.index] = &s;
  PointSet ps;
  for (const auto& [index, x] : embedded.points) {
    auto it = by_index.find(index);
    if (it == by_index.end())
      throw ValidationError("embedded point " + std::to_string(index) +
                            " has no segment in the manifest");
    const Segment& seg = *it->second;
    ps.points.push_back({index, seg.start_s, seg.end_s, seg.cost, x});
  }
  check_points(ps);
  return ps;
}

PointSet PointSet::from_vectors(std::span<const Eigen::VectorXd> xs) {
  PointSet ps;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double t = static_cast<double>(i);
    ps.points.push_back({static_cast<int>(i), t, t + 1.0, 1.0, xs[i]});
  }
  check_points(ps);
  return ps;
}

double objective(const PointSet& ps, std::span<const int> medoid_indices) {
  check_points(ps);
  if (medoid_indices.empty()) throw ValidationError("objective: empty medoid set");
  std::vector<const PointEntry*> medoids;
  for (int idx : medoid_indices) medoids.push_back(&ps.at_index(idx));
  double total = 0.0;
  for (const PointEntry& p : ps.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const PointEntry* m : medoids) best = std::min(best, (p.x - m->x).squaredNorm());
    total += best;
  }
  return total;
}

int budget_k(double duration_s, double window_s, double ratio) {
  if (!(duration_s > 0) || !(window_s > 0) || !(ratio > 0))
    throw ValidationError("budget_k: duration, window and ratio must be > 0");
  const int k = static_cast<int>(std::floor(ratio * duration_s / window_s));
  return std::max(1, k);
}

Summary lazy_greedy_select(const PointSet& ps, int k, const SelectOptions& opt) {
  check_points(ps);
  k = clamp_k(ps, k);
  GreedyState st(ps);

  struct Entry {
    double key;
    double start_s;
    int index;
    std::size_t pos;
    std::size_t snapshot;  // number of picks when key was computed
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.start_s != b.start_s) return a.start_s > b.start_s;
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  for (std::size_t c = 0; c < ps.size(); ++c)
    heap.push({st.key(c, opt), ps.points[c].start_s, ps.points[c].index, c, 0});

  while (static_cast<int>(st.picks.size()) < k && !heap.empty()) {
    Entry top = heap.top();
    heap.pop();
    if (st.selected[top.pos]) continue;
    if (!st.allowed(top.pos, opt)) continue;  // overlap only grows; drop for good
    if (top.snapshot == st.picks.size()) {
      st.select(top.pos);
    } else {
      // stale upper bound: refresh and reinsert
      heap.push({st.key(top.pos, opt), top.start_s, top.index, top.pos, st.picks.size()});
    }
  }
  return finish(ps, std::move(st.picks), k);
}

Summary naive_greedy_select(const PointSet& ps, int k, const SelectOptions& opt) {
  check_points(ps);
  k = clamp_k(ps, k);
  GreedyState st(ps);
  while (static_cast<int>(st.picks.size()) < k) {
    bool found = false;
    std::size_t best = 0;
    double best_key = 0.0;
    for (std::size_t c = 0; c < ps.size(); ++c) {
      if (st.selected[c] || !st.allowed(c, opt)) continue;
      const double key = st.key(c, opt);
      if (!found || better(key, ps.points[c], best_key, ps.points[best])) {
        found = true;
        best = c;
        best_key = key;
      }
    }
    if (!found) break;
    st.select(best);
  }
  return finish(ps, std::move(st.picks), k);
}

Summary exhaustive_select(const PointSet& ps, int k) {
  check_points(ps);
  k = clamp_k(ps, k);
  const std::size_t n = ps.size();
  DistanceOracle dist(ps);

  std::vector<std::size_t> combo(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = i;
  std::vector<std::size_t> best_combo = combo;
  double best_f = std::numeric_limits<double>::infinity();

  auto evaluate = [&](const std::vector<std::size_t>& medoids) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t m : medoids) d = std::min(d, dist(j, m));
      total += d;
    }
    return total;
  };

  while (true) {
    const double f = evaluate(combo);
    if (f < best_f) {  // strict: ties keep the lexicographically first subset
      best_f = f;
      best_combo = combo;
    }
    // next combination in lexicographic order
    int i = k - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] ==
                         n - static_cast<std::size_t>(k - i)) --i;
    if (i < 0) break;
    ++combo[static_cast<std::size_t>(i)];
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < combo.size(); ++j)
      combo[j] = combo[j - 1] + 1;
  }
  return finish(ps, std::move(best_combo), k);
}

Summary uniform_baseline(const PointSet& ps, int k) {
  check_points(ps);
  k = clamp_k(ps, k);
  const long n = static_cast<long>(ps.size());
  std::vector<std::size_t> picks;
  if (k == 1) {
    picks.push_back(static_cast<std::size_t>(std::lround((n - 1) / 2.0)));
  } else {
    for (int j = 0; j < k; ++j)
      picks.push_back(static_cast<std::size_t>(
          std::lround(static_cast<double>(j) * static_cast<double>(n - 1) /
                      static_cast<double>(k - 1))));
  }
  return finish(ps, std::move(picks), k);
}

std::vector<Interval> render_timeline(const PointSet& ps, std::span<const int> selected) {
  std::vector<Interval> ivs;
  for (int idx : selected) {
    const PointEntry& p = ps.at_index(idx);
    ivs.push_back({p.start_s, p.end_s});
  }
  std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) {
    if (a.start_s != b.start_s) return a.start_s < b.start_s;
    return a.end_s < b.end_s;
  });
  std::vector<Interval> merged;
  for (const Interval& iv : ivs) {
    if (!merged.empty() && iv.start_s <= merged.back().end_s)
      merged.back().end_s = std::max(merged.back().end_s, iv.end_s);
    else
      merged.push_back(iv);
  }
  return merged;
}

void write_summary(const std::filesystem::path& path, const SummaryFile& file) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  ordered_json h;
  h["video_id"] = file.video_id;
  h["algorithm"] = file.algorithm;
  h["k"] = file.summary.k;
  h["objective"] = file.summary.objective_value;
  out << h.dump() << "\n";
  ordered_json sel;
  sel["selected"] = file.summary.selected;
  out << sel.dump() << "\n";
  ordered_json tl;
  json arr = json::array();
  for (const Interval& iv : file.summary.merged_timeline) arr.push_back({iv.start_s, iv.end_s});
  tl["timeline"] = arr;
  out << tl.dump() << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

SummaryFile read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  auto next = [&in, &line, &path](const char* what) {
    if (!std::getline(in, line))
      throw ValidationError(path.string() + ": truncated summary file, expected " +
                            std::string(what));
    try {
      return json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": malformed JSON record: " + e.what());
    }
  };
  SummaryFile f;
  try {
    const json h = next("header");
    f.video_id = h.at("video_id").get<std::string>();
    f.algorithm = h.at("algorithm").get<std::string>();
    f.summary.k = h.at("k").get<int>();
    f.summary.objective_value = h.at("objective").get<double>();
    const json sel = next("selected indices");
    f.summary.selected = sel.at("selected").get<std::vector<int>>();
    const json tl = next("timeline");
    for (const json& e : tl.at("timeline")) {
      if (!e.is_array() || e.size() != 2)
        throw ValidationError(path.string() + ": malformed timeline entry");
      f.summary.merged_timeline.push_back({e[0].get<double>(), e[1].get<double>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed summary file: " + e.what());
  }
  return f;
}

}  // namespace dsf
